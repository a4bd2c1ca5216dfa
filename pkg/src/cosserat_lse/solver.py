"""Riemannian Newton iteration with Gauss-Newton tangent and load stepping."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import network as nw
from .config import Ramp, SolverConfig
from .errors import (
    CosseratError,
    LineSearchStallError,
    SingularSystemError,
    SolverError,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig", "SolveReport", "newton_solve", "load_stepped_solve",
    "roundoff_floor", "attainable_tolerance",
]


@dataclass
class SolveReport:
    converged: bool = False
    iterations: list = field(default_factory=list)  # residual evaluations per load step
    residual_history: list = field(default_factory=list)  # one list of norms per step
    final_energy: float = float("nan")
    final_residual: float = float("nan")
    wall_time: float = 0.0
    steps_completed: int = 0
    steps_total: int = 0
    message: str = ""

    def flat_history(self):
        return [v for step in self.residual_history for v in step]

    def rows(self):
        """``(step, iteration, norm)`` rows for CSV export."""
        return [
            (k + 1, i, v)
            for k, step in enumerate(self.residual_history)
            for i, v in enumerate(step)
        ]

    def to_dict(self):
        return asdict(self)

    def extend(self, other):
        self.iterations += other.iterations
        self.residual_history += other.residual_history
        self.final_energy = other.final_energy
        self.final_residual = other.final_residual
        self.wall_time += other.wall_time


def _dof_name(dofmap, k):
    node = np.where((dofmap.node_offset >= 0) & (dofmap.node_offset <= k) & (k < dofmap.node_offset + 6))[0]
    if len(node):
        return f"node {int(node[0])} component {k - dofmap.node_offset[node[0]]}"
    elem = np.where((dofmap.beta_offset >= 0) & (dofmap.beta_offset <= k) & (k < dofmap.beta_offset + 6))[0]
    return f"slope of element {int(elem[0])} component {k - dofmap.beta_offset[elem[0]]}"


def solve_linear(K, rhs, regularization=0.0, dofmap=None):
    """Sparse LU solve with one regularized retry on factorization failure."""
    n = K.shape[0]
    if n == 0:
        return np.zeros(0)
    eye = sp.identity(n, format="csc")
    lam = regularization
    for attempt in range(2):
        A = K + lam * eye if lam else K
        try:
            x = splu(A.tocsc(), permc_spec="COLAMD").solve(rhs)
            if np.all(np.isfinite(x)):
                return x
        except RuntimeError:
            pass
        lam = 1e-10 * float(np.mean(np.abs(K.diagonal()))) or 1e-10
        log.warning("tangent factorization failed, retrying with regularization %.3e", lam)
    diag = np.abs(K.diagonal())
    k = int(np.argmin(diag))
    where = _dof_name(dofmap, k) if dofmap is not None else f"dof {k}"
    raise SingularSystemError(f"singular tangent; smallest pivot at {where}", dof=k)


def roundoff_floor(scene):
    """Order of magnitude of the smallest attainable ``|r|``.

    Node coordinates carry an absolute error of ``eps * max|p|``; divided by
    the element length this is a strain error that the stiffest section
    entry turns into a force, summed over elements in quadrature.
    """
    m = scene.model
    pos = max(float(np.max(np.abs([g.position for g in scene.nodes]))), float(np.max(m.h)))
    return float(np.finfo(float).eps * pos * np.max(m.kdiag / m.h[:, None]) * np.sqrt(len(m.h)))


def attainable_tolerance(scene, tol=None, factor=10.0):
    """``max(tol, factor * roundoff_floor)``; ``tol`` defaults to the scene's."""
    tol = scene.solver.residual_tol if tol is None else tol
    return max(tol, factor * roundoff_floor(scene))


def _step_cap(dq, dofmap, max_rotation):
    """Largest ``alpha <= 1`` keeping every nodal rotation increment below ``max_rotation``."""
    free = dofmap.node_offset[dofmap.node_offset >= 0]
    if not len(free) or not np.isfinite(max_rotation):
        return 1.0
    rot = np.linalg.norm(dq[free[:, None] + np.arange(3)], axis=1).max()
    return min(1.0, max_rotation / rot) if rot > 0 else 1.0


def newton_solve(scene, state=None, config=None, dofmap=None, ramp_factor=1.0):
    """Solve ``r(q) = 0`` for fixed loads and fixed constrained poses.

    Returns ``(state, report)``.  Running out of iterations is reported with
    ``converged=False``; a stalled line search or a singular tangent raises,
    carrying the best state found.
    """
    config = config or scene.solver
    dofmap = dofmap or nw.build_dof_map(scene)
    state = nw.initial_state(scene) if state is None else state
    t0 = time.perf_counter()
    history = []
    report = SolveReport(steps_total=1)
    best = (np.inf, state)

    def finish(converged, message=""):
        report.converged = converged
        report.iterations = [len(history)]
        report.residual_history = [list(history)]
        report.final_residual = history[-1]
        report.final_energy = nw.internal_energy(scene, best[1], config.dexp_order)
        report.wall_time = time.perf_counter() - t0
        report.steps_completed = int(converged)
        report.message = message
        return best[1], report

    r, K = nw.assemble(scene, state, dofmap, ramp_factor, order=config.dexp_order,
                               load_stiffness=config.load_stiffness, kind=config.tangent)
    for it in range(config.max_iters):
        norm = float(np.linalg.norm(r))
        history.append(norm)
        if norm < best[0]:
            best = (norm, state)
        if norm < config.residual_tol:
            return finish(True)
        if it == config.max_iters - 1:
            break
        try:
            dq = solve_linear(K, -r, config.regularization, dofmap)
        except SingularSystemError as exc:
            st, rep = finish(False, str(exc))
            exc.state, exc.report = st, rep
            raise
        if config.decrement_tol > 0:
            energy = nw.internal_energy(scene, state, config.dexp_order)
            if abs(float(r @ dq)) <= config.decrement_tol * energy:
                best = (norm, state)
                return finish(True, "converged on Newton decrement")
        backtrack = config.line_search == "backtracking"
        alpha = _step_cap(dq, dofmap, config.max_rotation_step)
        for _ in range(config.max_halvings + 1):
            trial = nw.apply_update(state, dofmap, dq, alpha)
            try:
                r_trial, K_trial = nw.assemble(scene, trial, dofmap, ramp_factor, order=config.dexp_order,
                               load_stiffness=config.load_stiffness, kind=config.tangent)
                trial_norm = np.linalg.norm(r_trial)
                ok = np.isfinite(trial_norm) and (
                    not backtrack
                    or trial_norm < (1.0 - config.sufficient_decrease * alpha) * norm
                )
            except CosseratError:
                # invalid trial (element past the log branch cut, ...): shorten
                ok = False
            if ok:
                state, r, K = trial, r_trial, K_trial
                break
            alpha *= config.ls_factor
        else:
            st, rep = finish(False, "line search stalled")
            raise LineSearchStallError(
                f"no acceptable step after {config.max_halvings} halvings "
                f"(|r| = {norm:.3e})",
                state=st,
                report=rep,
            )
    return finish(False, f"no convergence in {config.max_iters} iterations")


def _step_count(scene, config, ramp):
    n = config.steps
    for ld in scene.loads:
        n = max(n, (ramp or ld.ramp).steps)
    for c in scene.constraints:
        if c.kind == "prescribed":
            n = max(n, c.ramp.steps)
    return n


def load_stepped_solve(scene, config=None, state=None):
    """Ramp loads and prescribed motions, warm-starting each step.

    On failure the partial report covers every converged step and the
    returned state is the last converged one.
    """
    config = config or scene.solver
    ramp = config.ramp
    dofmap = nw.build_dof_map(scene)
    state = nw.initial_state(scene) if state is None else state
    n = _step_count(scene, config, ramp)
    report = SolveReport(steps_total=n)
    for k in range(1, n + 1):
        factors = np.array([(ramp or ld.ramp).factor(k) for ld in scene.loads])
        trial = nw.prescribe_step(scene, state, nw.constraint_fractions(scene, k))
        try:
            trial, step = newton_solve(scene, trial, config, dofmap, factors)
        except SolverError as exc:
            if exc.report is not None:
                report.extend(exc.report)
            report.message = f"step {k}/{n}: {exc}"
            report.converged = False
            return state, report
        report.extend(step)
        if not step.converged:
            report.message = f"step {k}/{n}: {step.message}"
            report.converged = False
            return state, report
        state = trial
        report.steps_completed = k
    report.converged = True
    return state, report
