"""Rod networks: problem model, DoF numbering and global assembly.

The unknowns are the poses of unconstrained nodes (6 each, node order) followed
by the strain slopes of LSE elements (6 each, element order).  Constrained
nodes own no unknowns; their rows and columns are never formed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import element as el
from . import liegroup as lg
from .config import Ramp, SolverConfig
from .element import Mode, SectionStiffness
from .errors import AssemblyError, BranchCutError, SceneValidationError
from .liegroup import Pose

# junction rest curvature above this is rejected (no dedicated treatment)
JUNCTION_CURVATURE_TOL = 1e-9


@dataclass
class Material:
    stiffness: SectionStiffness
    spec: dict = field(default_factory=dict)  # as written in the scene file
    name: str | None = None


@dataclass
class ElementSpec:
    node_a: int
    node_b: int
    material: int = 0
    mode: Mode = Mode.LSE
    rest_strain: np.ndarray | None = None
    length: float | None = None

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.rest_strain is not None:
            self.rest_strain = np.asarray(self.rest_strain, dtype=float).reshape(6)


@dataclass
class Constraint:
    node: int
    kind: str = "clamped"  # or "prescribed"
    target: Pose | None = None  # None: the node's initial pose
    ramp: Ramp = field(default_factory=lambda: Ramp("linear", 1))

    def __post_init__(self):
        if self.kind not in ("clamped", "prescribed"):
            raise SceneValidationError(f"unknown constraint kind {self.kind!r}")
        self.ramp = Ramp.parse(self.ramp)


@dataclass
class Load:
    node: int
    wrench: np.ndarray
    frame: str = "dead"  # or "follower"
    ramp: Ramp = field(default_factory=Ramp)

    def __post_init__(self):
        self.wrench = np.asarray(self.wrench, dtype=float).reshape(6)
        if self.frame not in ("dead", "follower"):
            raise SceneValidationError(f"unknown load frame {self.frame!r}")
        self.ramp = Ramp.parse(self.ramp)


@dataclass
class NetworkScene:
    nodes: list[Pose]
    elements: list[ElementSpec]
    materials: list[Material]
    constraints: list[Constraint] = field(default_factory=list)
    loads: list[Load] = field(default_factory=list)
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def constraint_of(self):
        return {c.node: c for c in self.constraints}

    def degrees(self):
        deg = np.zeros(self.n_nodes, dtype=int)
        for e in self.elements:
            deg[e.node_a] += 1
            deg[e.node_b] += 1
        return deg

    def validate(self):
        n = self.n_nodes
        if n == 0 or not self.elements:
            raise SceneValidationError("scene needs at least one element")
        for k, e in enumerate(self.elements):
            for v in (e.node_a, e.node_b):
                if not 0 <= v < n:
                    raise SceneValidationError(f"element {k}: node index {v} out of range")
            if e.node_a == e.node_b:
                raise SceneValidationError(f"element {k}: both ends on node {e.node_a}")
            if not 0 <= e.material < len(self.materials):
                raise SceneValidationError(f"element {k}: unknown material {e.material}")
            if e.rest_strain is not None and not np.all(np.isfinite(e.rest_strain)):
                raise SceneValidationError(f"element {k}: rest strain not finite")
            if e.length is not None and not e.length > 0:
                raise SceneValidationError(f"element {k}: length must be positive")
        seen = set()
        for c in self.constraints:
            if not 0 <= c.node < n:
                raise SceneValidationError(f"constraint on unknown node {c.node}")
            if c.node in seen:
                raise SceneValidationError(f"node {c.node} has more than one constraint")
            seen.add(c.node)
        for j, ld in enumerate(self.loads):
            if not 0 <= ld.node < n:
                raise SceneValidationError(f"load {j}: unknown node {ld.node}")
            if not np.all(np.isfinite(ld.wrench)):
                raise SceneValidationError(f"load {j}: wrench not finite")
        deg = self.degrees()
        orphans = [i for i in range(n) if deg[i] == 0 and i not in seen]
        if orphans:
            raise SceneValidationError(f"nodes {orphans[:10]} belong to no element or constraint")
        if 6 * len(self.constraints) < 6:
            raise SceneValidationError(
                "fewer than 6 constrained DoFs: the network has a free rigid-body "
                "motion; clamp or prescribe at least one node"
            )
        # every connected component needs a support
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for e in self.elements:
            parent[find(e.node_a)] = find(e.node_b)
        supported = {find(c.node) for c in self.constraints}
        free_parts = {find(i) for i in range(n) if deg[i] > 0} - supported
        if free_parts:
            root = min(free_parts)
            members = [i for i in range(n) if find(i) == root]
            raise SceneValidationError(
                f"component containing nodes {members[:10]} has no constraint: "
                "free rigid-body motion"
            )
        # rest curvature at junctions has no dedicated treatment
        model = self.model
        for k, e in enumerate(self.elements):
            if e.rest_strain is not None:
                continue
            if max(deg[e.node_a], deg[e.node_b]) >= 3 and np.linalg.norm(
                model.xi0[k, :3]
            ) > JUNCTION_CURVATURE_TOL:
                raise SceneValidationError(
                    f"element {k} has curved rest geometry at a junction node "
                    f"(nodes {e.node_a}, {e.node_b}); rest curvature at crossings is "
                    "not supported, give an explicit rest_strain or straighten it"
                )
        return self

    @cached_property
    def model(self):
        return CompiledModel.build(self)

    def copy(self):
        out = copy.deepcopy(self)
        out.__dict__.pop("model", None)
        return out


@dataclass
class CompiledModel:
    """Flat per-element arrays derived from a scene."""

    ea: np.ndarray
    eb: np.ndarray
    h: np.ndarray
    xi0: np.ndarray
    kdiag: np.ndarray
    lse: np.ndarray

    @classmethod
    def build(cls, scene):
        m = scene.n_elements
        ea = np.array([e.node_a for e in scene.elements], dtype=int)
        eb = np.array([e.node_b for e in scene.elements], dtype=int)
        h = np.empty(m)
        xi0 = np.empty((m, 6))
        for k, e in enumerate(scene.elements):
            ga, gb = scene.nodes[e.node_a], scene.nodes[e.node_b]
            try:
                omega = lg.log_parts(*lg.relative_parts(ga.rotation, ga.position, gb.rotation, gb.position))
            except BranchCutError as exc:
                raise SceneValidationError(
                    f"element {k}: rest geometry too coarse (relative rotation "
                    f"{exc.angle:.6g} rad near pi); refine the mesh"
                ) from None
            hk = e.length if e.length is not None else float(np.linalg.norm(omega[3:]))
            if not hk > 0:
                raise SceneValidationError(f"element {k}: zero length (coincident nodes)")
            h[k] = hk
            xi0[k] = e.rest_strain if e.rest_strain is not None else omega / hk
        kdiag = np.array([scene.materials[e.material].stiffness.diagonal for e in scene.elements])
        lse = np.array([e.mode is Mode.LSE for e in scene.elements], dtype=bool)
        return cls(ea, eb, h, xi0, kdiag, lse)


def count_dofs(scene, include_constrained=False):
    """6 per node (free nodes only unless ``include_constrained``) + 6 per LSE element."""
    nodes = scene.n_nodes if include_constrained else scene.n_nodes - len(scene.constraints)
    return 6 * nodes + 6 * sum(e.mode is Mode.LSE for e in scene.elements)


@dataclass
class DofMap:
    node_offset: np.ndarray  # -1 for constrained nodes
    beta_offset: np.ndarray  # -1 for CSE elements
    n: int
    constrained: frozenset

    def local_indices(self, model):
        """(m, 3, 6) global indices of (zeta_a, zeta_b, beta); -1 where absent."""
        r6 = np.arange(6)

        def expand(off):
            return np.where(off[:, None] >= 0, off[:, None] + r6, -1)

        return np.stack(
            [expand(self.node_offset[model.ea]), expand(self.node_offset[model.eb]), expand(self.beta_offset)],
            axis=1,
        )


def build_dof_map(scene):
    scene.validate()
    constrained = frozenset(c.node for c in scene.constraints)
    node_offset = -np.ones(scene.n_nodes, dtype=int)
    k = 0
    for i in range(scene.n_nodes):
        if i not in constrained:
            node_offset[i] = k
            k += 6
    beta_offset = -np.ones(scene.n_elements, dtype=int)
    for j, e in enumerate(scene.elements):
        if e.mode is Mode.LSE:
            beta_offset[j] = k
            k += 6
    return DofMap(node_offset, beta_offset, k, constrained)


@dataclass
class GlobalState:
    rotations: np.ndarray  # (N, 3, 3)
    positions: np.ndarray  # (N, 3)
    slopes: np.ndarray  # (Ne, 6), zero rows for CSE

    def pose(self, i):
        return Pose(self.rotations[i], self.positions[i])

    def copy(self):
        return GlobalState(self.rotations.copy(), self.positions.copy(), self.slopes.copy())


def initial_state(scene):
    """Rest configuration with beta = 0 and constraints at their start poses."""
    R = np.array([g.rotation for g in scene.nodes])
    p = np.array([g.position for g in scene.nodes])
    state = GlobalState(R, p, np.zeros((scene.n_elements, 6)))
    return prescribe_step(scene, state, 0.0)


def external_wrench(load, node_pose, ramp_factor):
    """Body-frame wrench of a nodal load (dead loads are rotated into the body)."""
    w = ramp_factor * load.wrench
    if load.frame == "follower":
        return w
    R = node_pose.rotation if isinstance(node_pose, Pose) else np.asarray(node_pose)
    return np.concatenate([R.T @ w[:3], R.T @ w[3:]])


def load_factors(scene, step):
    return np.array([ld.ramp.factor(step) for ld in scene.loads])


def _as_factors(scene, ramp_factor):
    f = np.asarray(ramp_factor, dtype=float)
    if f.ndim == 0:
        f = np.full(len(scene.loads), float(f))
    return f


def evaluate_elements(scene, state, order=None, tangent=True):
    m = scene.model
    order = order or scene.solver.dexp_order
    beta = np.where(m.lse[:, None], state.slopes, 0.0)
    return el.evaluate(
        state.rotations[m.ea], state.positions[m.ea], state.rotations[m.eb], state.positions[m.eb],
        m.h, beta, m.xi0, m.kdiag, order=order, tangent=tangent,
    )


def assemble(scene, state, dofmap, ramp_factor=1.0, tangent=True, order=None,
             load_stiffness=None, kind=None):
    """Global residual ``r`` and tangent (CSC) on the free DoFs.

    The tangent is the symmetric Gauss-Newton element part plus, unless
    ``load_stiffness`` is off, the exact (non-symmetric) stiffness of dead
    loads, whose body-frame wrench turns with the node.  ``kind="newton"``
    replaces the element part by the full tangent including geometric
    stiffness.  ``None`` defers to the scene's solver settings.
    """
    m = scene.model
    batch = evaluate_elements(scene, state, order, tangent)
    idx = dofmap.local_indices(m)
    r = np.zeros(dofmap.n)
    mask = idx >= 0
    np.add.at(r, idx[mask], batch.residual[mask])
    for ld, f in zip(scene.loads, _as_factors(scene, ramp_factor)):
        off = dofmap.node_offset[ld.node]
        if off >= 0 and f != 0.0:
            r[off:off + 6] -= external_wrench(ld, state.rotations[ld.node], f)
    if not np.all(np.isfinite(r)):
        bad = np.where(~np.all(np.isfinite(batch.residual.reshape(len(m.h), -1)), axis=1))[0]
        raise AssemblyError(
            "non-finite residual" + (f" from element {int(bad[0])}" if len(bad) else ""),
            element=int(bad[0]) if len(bad) else None,
        )
    K = None
    if tangent:
        if (kind or scene.solver.tangent) == "newton":
            beta = np.where(m.lse[:, None], state.slopes, 0.0)
            batch.tangent = el.fd_tangent(
                state.rotations[m.ea], state.positions[m.ea], state.rotations[m.eb], state.positions[m.eb],
                m.h, beta, m.xi0, m.kdiag, order or scene.solver.dexp_order,
            )
        rows = np.broadcast_to(idx[:, :, None, :, None], batch.tangent.shape)
        cols = np.broadcast_to(idx[:, None, :, None, :], batch.tangent.shape)
        keep = (rows >= 0) & (cols >= 0)
        data, ri, ci = [batch.tangent[keep]], [rows[keep]], [cols[keep]]
        if load_stiffness is None:
            load_stiffness = scene.solver.load_stiffness
        stiff = _load_stiffness(scene, state, dofmap, ramp_factor) if load_stiffness else ()
        for blk, off in stiff:
            ri.append(np.repeat(off + np.arange(6), 3))
            ci.append(np.tile(off + np.arange(3), 6))
            data.append(blk.ravel())
        K = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
            shape=(dofmap.n, dofmap.n),
        ).tocsc()
        K.sum_duplicates()
        if not np.all(np.isfinite(K.data)):
            raise AssemblyError("non-finite tangent entries")
    return r, K


def _load_stiffness(scene, state, dofmap, ramp_factor):
    """Derivative of ``-[R^T m; R^T f]`` with respect to the nodal rotation.

    Right perturbation ``R exp(d)`` turns ``R^T f`` into ``R^T f + skew(R^T f) d``,
    so each dead load adds a (non-symmetric) 6x3 block in the rotation columns.
    """
    for ld, f in zip(scene.loads, _as_factors(scene, ramp_factor)):
        off = dofmap.node_offset[ld.node]
        if ld.frame != "dead" or off < 0 or f == 0.0:
            continue
        R = state.rotations[ld.node]
        w = f * ld.wrench
        blk = -np.vstack([lg.skew(R.T @ w[:3]), lg.skew(R.T @ w[3:])])
        yield blk, off


def internal_energy(scene, state, order=None):
    return float(np.sum(evaluate_elements(scene, state, order, tangent=False).energy))


def potential_energy(scene, state, ramp_factor=1.0, order=None):
    """Internal energy minus the work potential of dead forces.

    Follower loads and dead moments have no potential on SE(3) and are not
    included.
    """
    U = internal_energy(scene, state, order)
    for ld, f in zip(scene.loads, _as_factors(scene, ramp_factor)):
        if ld.frame == "dead":
            U -= f * ld.wrench[3:] @ (state.positions[ld.node] - scene.nodes[ld.node].position)
    return U


def nodal_wrenches(scene, state, order=None):
    """Sum of internal element wrenches per node (body frame), all nodes.

    At a constrained node this is the wrench the support has to supply.
    """
    m = scene.model
    batch = evaluate_elements(scene, state, order, tangent=False)
    out = np.zeros((scene.n_nodes, 6))
    np.add.at(out, m.ea, batch.residual[:, 0])
    np.add.at(out, m.eb, batch.residual[:, 1])
    return out


def spatial_wrench(rotation, position, body_wrench, about=None):
    """Express a body wrench in the global frame, moment taken about ``about``."""
    R = np.asarray(rotation)
    w = np.asarray(body_wrench)
    f = np.einsum("...ij,...j->...i", R, w[..., 3:])
    mo = np.einsum("...ij,...j->...i", R, w[..., :3])
    if about is not None:
        mo = mo + np.cross(np.asarray(position) - np.asarray(about), f)
    return np.concatenate([mo, f], axis=-1)


def reactions(scene, state, ramp_factor=1.0, order=None):
    """Support wrenches at constrained nodes in the global frame (moment about the node)."""
    G = nodal_wrenches(scene, state, order)
    for ld, f in zip(scene.loads, _as_factors(scene, ramp_factor)):
        G[ld.node] -= external_wrench(ld, state.rotations[ld.node], f)
    return {
        c.node: spatial_wrench(state.rotations[c.node], state.positions[c.node], G[c.node])
        for c in scene.constraints
    }


def apply_update(state, dofmap, dq, alpha=1.0):
    """Retract free node poses along ``alpha * dq`` and add to the slopes."""
    out = state.copy()
    free = np.where(dofmap.node_offset >= 0)[0]
    if len(free):
        zeta = alpha * dq[dofmap.node_offset[free][:, None] + np.arange(6)]
        Rz, pz = lg.exp_parts(zeta)
        R = state.rotations[free]
        out.positions[free] = state.positions[free] + np.einsum("nij,nj->ni", R, pz)
        out.rotations[free] = R @ Rz
    lse = np.where(dofmap.beta_offset >= 0)[0]
    if len(lse):
        out.slopes[lse] = state.slopes[lse] + alpha * dq[dofmap.beta_offset[lse][:, None] + np.arange(6)]
    return out


def constraint_pose(scene, c, t):
    g0 = scene.nodes[c.node]
    target = c.target if c.target is not None else g0
    if c.kind == "clamped":
        return target.rotation, target.position
    if t <= 0.0:
        return g0.rotation, g0.position
    Rrel, prel = lg.relative_parts(g0.rotation, g0.position, target.rotation, target.position)
    try:
        v = lg.log_parts(Rrel, prel)
    except BranchCutError as exc:
        raise SceneValidationError(
            f"prescribed motion of node {c.node} rotates by {exc.angle:.6g} rad, at "
            "the log branch cut; split the target into smaller increments"
        ) from None
    if t >= 1.0:
        return target.rotation, target.position
    Rz, pz = lg.exp_parts(t * v)
    return lg.compose_parts(g0.rotation, g0.position, Rz, pz)


def prescribe_step(scene, state, t):
    """Move constrained nodes to their poses at path fraction ``t``.

    ``t`` is a scalar or one value per constraint.  Prescribed nodes follow
    the geodesic ``g0 exp(t log(g0^-1 g_target))``; clamped nodes sit at
    their target.
    """
    out = state.copy()
    ts = np.broadcast_to(np.asarray(t, dtype=float), (len(scene.constraints),))
    for c, tc in zip(scene.constraints, ts):
        R, p = constraint_pose(scene, c, tc)
        out.rotations[c.node] = R
        out.positions[c.node] = p
    return out


def constraint_fractions(scene, step):
    return np.array([c.ramp.factor(step) for c in scene.constraints])
