"""Static Cosserat rod networks with linear-strain elements.

Nodes carry SE(3) poses; each element carries a mean strain recovered from
its end poses and, for linear-strain elements, a strain slope.  Equilibrium
is found by a Riemannian Newton iteration with load stepping.
"""

import os as _os

# COSSERAT_THREADS caps BLAS/OpenMP threads; it has to be applied before
# numpy loads its BLAS, i.e. before anything below is imported.
_threads = _os.environ.get("COSSERAT_THREADS", "").strip()
if _threads:
    if not _threads.isdigit() or int(_threads) < 1:
        raise ValueError(f"COSSERAT_THREADS must be a positive integer, got {_threads!r}")
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ[_var] = _threads

__version__ = "0.1.0"

from .config import Ramp, SolverConfig
from .element import Mode, SectionStiffness
from .errors import CosseratError, SceneValidationError, SolverError
from .liegroup import Pose
from .network import Constraint, ElementSpec, GlobalState, Load, Material, NetworkScene
from .scene_io import load_scene, save_scene
from .solver import SolveReport, load_stepped_solve, newton_solve

__all__ = [
    "__version__",
    "Constraint",
    "CosseratError",
    "ElementSpec",
    "GlobalState",
    "Load",
    "Material",
    "Mode",
    "NetworkScene",
    "Pose",
    "Ramp",
    "SceneValidationError",
    "SectionStiffness",
    "SolveReport",
    "SolverConfig",
    "SolverError",
    "load_scene",
    "load_stepped_solve",
    "newton_solve",
    "save_scene",
]
