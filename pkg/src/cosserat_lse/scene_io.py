"""JSON scene files.

Layout (all quantities SI)::

    {
      "nodes": [{"position": [x, y, z], "quaternion": [w, x, y, z]}, ...],
      "elements": [{"nodes": [a, b], "material": 0, "mode": "LSE"}, ...],
      "materials": [{"E_Pa": 1e6, "nu": 0.45, "radius_m": 0.01}, ...],
      "constraints": [{"node": 0, "kind": "clamped"}, ...],
      "loads": [{"node": 4, "wrench": [0, 0, 0, 0, 0, 1], "frame": "dead"}],
      "solver": {"residual_tol": 1e-9, ...}
    }

A node gives its orientation either as a unit quaternion (``wxyz``) or as a
row-major ``rotation`` 3x3 matrix.  A material is either a circular section
(``E_Pa``, ``nu``, ``radius_m``) or the diagonal stiffness entries
(``GJx``, ``EJy``, ``EJz``, ``EA``, ``GA1``, ``GA2``).  Elements may carry an
explicit ``rest_strain`` and ``length``; constraints a ``target`` pose and a
``ramp``; loads a ``ramp`` such as ``"linear:10"``.  Unknown keys are errors.

Writing always stores rotations as matrices, so ``load(dump(scene))``
reproduces every float bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import SolverConfig, TANGENT_KINDS
from .element import Mode, SectionStiffness
from .errors import ConfigurationError, SceneValidationError
from .liegroup import Pose
from .network import Constraint, ElementSpec, Load, Material, NetworkScene

__all__ = ["load_scene", "save_scene", "scene_from_dict", "scene_to_dict", "scene_hash"]

Vec3 = tuple[float, float, float]
Vec6 = tuple[float, float, float, float, float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PoseModel(_Strict):
    position: Vec3
    quaternion: Optional[tuple[float, float, float, float]] = None
    rotation: Optional[tuple[float, float, float, float, float, float, float, float, float]] = None

    @model_validator(mode="after")
    def _one_orientation(self):
        if self.quaternion is not None and self.rotation is not None:
            raise ValueError("give either quaternion or rotation, not both")
        if self.quaternion is not None and not np.linalg.norm(self.quaternion) > 0:
            raise ValueError("quaternion must be non-zero")
        return self

    def pose(self):
        if self.quaternion is not None:
            return Pose.from_quaternion(self.quaternion, self.position)
        if self.rotation is not None:
            return Pose(np.reshape(self.rotation, (3, 3)), self.position)
        return Pose(np.eye(3), self.position)

    @classmethod
    def of(cls, pose):
        return cls(position=tuple(pose.position.tolist()), rotation=tuple(pose.rotation.ravel().tolist()))


class CircularMaterial(_Strict):
    name: Optional[str] = None
    E_Pa: float = Field(gt=0)
    nu: float = Field(gt=-1.0, lt=0.5)
    radius_m: float = Field(gt=0)

    def stiffness(self):
        return SectionStiffness.circular(self.E_Pa, self.nu, self.radius_m)


class DirectMaterial(_Strict):
    name: Optional[str] = None
    GJx: float = Field(gt=0)
    EJy: float = Field(gt=0)
    EJz: float = Field(gt=0)
    EA: float = Field(gt=0)
    GA1: float = Field(gt=0)
    GA2: float = Field(gt=0)

    def stiffness(self):
        return SectionStiffness(self.GJx, self.EJy, self.EJz, self.EA, self.GA1, self.GA2)


class ElementModel(_Strict):
    nodes: tuple[int, int]
    material: int = 0
    mode: Literal["LSE", "CSE"] = "LSE"
    rest_strain: Optional[Vec6] = None
    length: Optional[float] = Field(default=None, gt=0)


class ConstraintModel(_Strict):
    node: int
    kind: Literal["clamped", "prescribed"] = "clamped"
    target: Optional[PoseModel] = None
    ramp: str = "linear:1"


class LoadModel(_Strict):
    node: int
    wrench: Vec6
    frame: Literal["dead", "follower"] = "dead"
    ramp: str = "single"


class SolverModel(_Strict):
    residual_tol: float = Field(default=1e-9, gt=0)
    max_iters: int = Field(default=100, ge=1)
    line_search: Literal["none", "backtracking"] = "none"
    ls_factor: float = Field(default=0.5, gt=0, lt=1)
    max_halvings: int = Field(default=25, ge=0)
    sufficient_decrease: float = Field(default=1e-4, ge=0)
    regularization: float = Field(default=0.0, ge=0)
    load_stiffness: bool = True
    max_rotation_step: float = Field(default=1.0, gt=0)
    decrement_tol: float = Field(default=0.0, ge=0)
    tangent: Literal[TANGENT_KINDS] = "gauss-newton"
    dexp_order: int = Field(default=8, ge=1)
    ramp: Optional[str] = None
    steps: int = Field(default=1, ge=1)


class SceneModel(_Strict):
    nodes: list[PoseModel]
    elements: list[ElementModel]
    materials: list[Union[CircularMaterial, DirectMaterial]]
    constraints: list[ConstraintModel] = []
    loads: list[LoadModel] = []
    solver: SolverModel = SolverModel()


def _material(spec):
    if isinstance(spec, (CircularMaterial, DirectMaterial)):
        return Material(spec.stiffness(), spec.model_dump(exclude={"name"}), spec.name)
    raise SceneValidationError(f"unknown material entry {spec!r}")


def scene_from_dict(data):
    """Validate a parsed document and build the scene."""
    try:
        doc = SceneModel.model_validate(data)
        solver = SolverConfig(**doc.solver.model_dump())
    except ValidationError as exc:
        raise SceneValidationError(f"invalid scene: {exc}") from None
    except ConfigurationError as exc:
        raise SceneValidationError(f"invalid solver settings: {exc}") from None
    try:
        nodes = [n.pose() for n in doc.nodes]
    except ValueError as exc:
        raise SceneValidationError(f"invalid node pose: {exc}") from None
    elements = [
        ElementSpec(e.nodes[0], e.nodes[1], e.material, Mode(e.mode), e.rest_strain, e.length)
        for e in doc.elements
    ]
    constraints = [
        Constraint(c.node, c.kind, None if c.target is None else c.target.pose(), c.ramp)
        for c in doc.constraints
    ]
    loads = [Load(ld.node, ld.wrench, ld.frame, ld.ramp) for ld in doc.loads]
    materials = [_material(m) for m in doc.materials]
    return NetworkScene(nodes, elements, materials, constraints, loads, solver).validate()


def scene_to_dict(scene):
    """Plain-JSON document for ``scene``; the inverse of ``scene_from_dict``."""
    mats = []
    for m in scene.materials:
        spec = dict(m.spec) if m.spec else dict(zip(
            ("GJx", "EJy", "EJz", "EA", "GA1", "GA2"), m.stiffness.diagonal.tolist()
        ))
        if m.name is not None:
            spec = {"name": m.name, **spec}
        mats.append(spec)
    elements = []
    for e in scene.elements:
        d = {"nodes": [int(e.node_a), int(e.node_b)], "material": int(e.material), "mode": Mode(e.mode).value}
        if e.rest_strain is not None:
            d["rest_strain"] = e.rest_strain.tolist()
        if e.length is not None:
            d["length"] = float(e.length)
        elements.append(d)
    constraints = []
    for c in scene.constraints:
        d = {"node": int(c.node), "kind": c.kind, "ramp": str(c.ramp)}
        if c.target is not None:
            d["target"] = PoseModel.of(c.target).model_dump(exclude_none=True)
        constraints.append(d)
    loads = [
        {"node": int(ld.node), "wrench": ld.wrench.tolist(), "frame": ld.frame, "ramp": str(ld.ramp)}
        for ld in scene.loads
    ]
    return {
        "nodes": [PoseModel.of(g).model_dump(exclude_none=True) for g in scene.nodes],
        "elements": elements,
        "materials": mats,
        "constraints": constraints,
        "loads": loads,
        "solver": scene.solver.to_dict(),
    }


def _dumps(data):
    return json.dumps(data, indent=1, sort_keys=False)


def save_scene(scene, path):
    Path(path).write_text(_dumps(scene_to_dict(scene)) + "\n")


def load_scene(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SceneValidationError(f"cannot read scene file {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneValidationError(f"{path}: not valid JSON ({exc})") from None
    return scene_from_dict(data)


def scene_hash(scene):
    """SHA-256 of the canonical JSON form."""
    canon = json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
