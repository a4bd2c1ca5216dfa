"""Linear-strain rod element (LSE) and its constant-strain degeneration (CSE).

Within an element of length ``h`` the body strain is
``xi(s) = mean + (s - h/2) * beta``.  The fourth-order Magnus truncation gives
the relative nodal pose in closed form, ``g_a^-1 g_b = exp(A(beta) mean)`` with
``A = h I - h^3/12 ad(beta)``, so the mean strain is recovered from the nodal
poses by one 6x6 solve.

The batched kernel :func:`evaluate` works on stacks of elements and is what
global assembly uses; the single-element functions below it are thin wrappers
with the same numerics.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import liegroup as lg
from .errors import (
    DomainError,
    ElementTooCoarseError,
    RestGeometryTooCoarseError,
    SlopeTooLargeError,
)
from .liegroup import DEFAULT_DEXP_ORDER, Pose

MAX_CONDITION = 1e8


class Mode(str, enum.Enum):
    LSE = "LSE"
    CSE = "CSE"


@dataclass(frozen=True)
class SectionStiffness:
    """Diagonal body-frame stiffness ``diag(GJx, EJy, EJz, EA, GA, GA)``."""

    GJx: float
    EJy: float
    EJz: float
    EA: float
    GA1: float
    GA2: float

    def __post_init__(self):
        vals = self.diagonal
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError(f"stiffness entries must be finite and positive, got {vals.tolist()}")

    @classmethod
    def from_section(cls, E, G, A, Jx, Jy, Jz):
        return cls(G * Jx, E * Jy, E * Jz, E * A, G * A, G * A)

    @classmethod
    def circular(cls, E, nu, radius):
        """Solid circular section; no shear correction factor."""
        G = E / (2.0 * (1.0 + nu))
        A = np.pi * radius**2
        J = np.pi * radius**4 / 4.0
        return cls.from_section(E, G, A, 2.0 * J, J, J)

    @property
    def diagonal(self):
        return np.array([self.GJx, self.EJy, self.EJz, self.EA, self.GA1, self.GA2], dtype=float)

    @property
    def matrix(self):
        return np.diag(self.diagonal)


@dataclass
class ElementState:
    node_a: int
    node_b: int
    h: float
    stiffness: SectionStiffness
    xi0: np.ndarray = field(default_factory=lambda: np.array([0, 0, 0, 1.0, 0, 0]))
    beta: np.ndarray = field(default_factory=lambda: np.zeros(6))
    mode: Mode = Mode.LSE

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if not self.h > 0:
            raise DomainError(f"element length must be positive, got {self.h}")
        self.xi0 = np.asarray(self.xi0, dtype=float).reshape(6)
        self.beta = np.asarray(self.beta, dtype=float).reshape(6)
        if self.mode is Mode.CSE and np.any(self.beta != 0):
            raise DomainError("a CSE element has no strain slope")


@dataclass
class ElementKinematics:
    omega: np.ndarray
    mean_strain: np.ndarray
    A_matrix: np.ndarray
    J1: np.ndarray
    J2: np.ndarray
    J3: np.ndarray | None


@dataclass
class ElementResidual:
    R1: np.ndarray
    R2: np.ndarray
    R3: np.ndarray | None

    def stacked(self):
        parts = [self.R1, self.R2] + ([self.R3] if self.R3 is not None else [])
        return np.concatenate(parts)


@dataclass
class ElementTangent:
    blocks: np.ndarray  # (k, k, 6, 6) with k = 3 (LSE) or 2 (CSE)

    def matrix(self):
        k = self.blocks.shape[0]
        return self.blocks.transpose(0, 2, 1, 3).reshape(6 * k, 6 * k)


# ---------------------------------------------------------------------------
# batched kernel


@dataclass
class Batch:
    """Per-element quantities for a stack of ``m`` elements."""

    omega: np.ndarray  # (m, 6)
    mean: np.ndarray  # (m, 6)
    A: np.ndarray  # (m, 6, 6)
    J: np.ndarray  # (m, 3, 6, 6): J1, J2, J3
    energy: np.ndarray  # (m,)
    residual: np.ndarray  # (m, 3, 6): R1, R2, R3
    tangent: np.ndarray | None  # (m, 3, 3, 6, 6)


def slope_operator(h, beta):
    """``A = h I - h^3/12 ad(beta)`` for stacks."""
    h = np.asarray(h, dtype=float)
    return h[..., None, None] * np.eye(6) - (h**3 / 12.0)[..., None, None] * lg.ad(beta)


def evaluate(Ra, pa, Rb, pb, h, beta, xi0, kdiag, order=DEFAULT_DEXP_ORDER,
             tangent=True, elements=None):
    """Kinematics, energy, residual wrenches and Gauss-Newton blocks.

    ``elements`` optionally maps batch rows to element ids for diagnostics.
    CSE elements are represented by rows with ``beta = 0``; their slope
    entries are simply not scattered by the caller.
    """
    h = np.asarray(h, dtype=float)
    Rrel, prel = lg.relative_parts(Ra, pa, Rb, pb)
    try:
        omega = lg.log_parts(Rrel, prel)
    except lg.BranchCutError:
        theta = lg.rotation_angle(Rrel)
        i = int(np.argmax(theta))
        raise ElementTooCoarseError(theta[i], _element_id(elements, i)) from None
    A = slope_operator(h, beta)
    if np.any(beta != 0):
        cond = np.linalg.cond(A)
        if np.any(~(cond < MAX_CONDITION)):
            i = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
            raise SlopeTooLargeError(cond[i], _element_id(elements, i))
    mean = np.linalg.solve(A, omega[..., None])[..., 0]
    Ainv = np.linalg.inv(A)

    # right perturbation of g_b: exp(omega) exp(t d) = exp(omega + t dexp(-omega)^-1 d)
    J2 = Ainv @ lg.dexp_inv(-omega, order)
    # left perturbation of g_a enters as exp(-t d) exp(omega)
    R_, p_ = lg.exp_parts(-omega)
    J1 = -J2 @ lg.Ad_parts(R_, p_)
    J3 = -(h**3 / 12.0)[..., None, None] * (Ainv @ lg.ad(mean))
    J = np.stack([J1, J2, J3], axis=-3)

    dxi = mean - xi0
    kd = np.asarray(kdiag, dtype=float)
    stress = kd * dxi
    energy = 0.5 * h * np.einsum("...i,...i->...", dxi, stress) + (h**3 / 24.0) * np.einsum(
        "...i,...i->...", beta, kd * beta
    )
    residual = h[..., None, None] * np.einsum("...kji,...j->...ki", J, stress)
    residual[..., 2, :] += (h**3 / 12.0)[..., None] * kd * beta

    blocks = None
    if tangent:
        KJ = kd[..., None, :, None] * J  # (m, 3, 6, 6)
        blocks = h[..., None, None, None, None] * np.einsum(
            "...aki,...bkj->...abij", J, KJ
        )
        blocks[..., 2, 2, :, :] += (h**3 / 12.0)[..., None, None] * (
            kd[..., :, None] * np.eye(6)
        )
    return Batch(omega, mean, A, J, energy, residual, blocks)


def fd_tangent(Ra, pa, Rb, pb, h, beta, xi0, kdiag, order=DEFAULT_DEXP_ORDER, step=6e-6):
    """Full Newton blocks ``dR_a/dq_b`` by central differences along the retraction.

    Unlike the Gauss-Newton blocks this keeps the stress-dependent
    (geometric) stiffness.  Steps are scaled by the element length so that
    rotations, translations and both slope parts see comparable relative
    perturbations.  Returns an array shaped like ``Batch.tangent``.
    """
    h = np.asarray(h, dtype=float)
    m = len(h)
    scale = np.stack([np.ones(m)] * 3 + [h] * 3, axis=-1)  # node twist
    bscale = np.stack([1.0 / h] * 3 + [np.ones(m)] * 3, axis=-1)  # slope
    out = np.empty((m, 3, 3, 6, 6))

    def residual(Ra_, pa_, Rb_, pb_, beta_):
        return evaluate(Ra_, pa_, Rb_, pb_, h, beta_, xi0, kdiag, order, tangent=False).residual

    for j in range(6):
        d = np.zeros((m, 6))
        d[:, j] = step * scale[:, j]
        for which, (R, p) in enumerate(((Ra, pa), (Rb, pb))):
            pair = []
            for sgn in (1.0, -1.0):
                Rz, pz = lg.exp_parts(sgn * d)
                moved = (R @ Rz, p + np.einsum("nij,nj->ni", R, pz))
                poses = (moved + (Rb, pb)) if which == 0 else ((Ra, pa) + moved)
                pair.append(residual(*poses, beta))
            out[:, :, which, :, j] = (pair[0] - pair[1]) / (2.0 * d[:, j, None, None])
        db = np.zeros((m, 6))
        db[:, j] = step * bscale[:, j]
        diff = residual(Ra, pa, Rb, pb, beta + db) - residual(Ra, pa, Rb, pb, beta - db)
        out[:, :, 2, :, j] = diff / (2.0 * db[:, j, None, None])
    return out


def _element_id(elements, i):
    if elements is None:
        return i
    return int(np.asarray(elements).reshape(-1)[i])


# ---------------------------------------------------------------------------
# single-element API


def strain_at(elem, mean, s):
    """Strain ``mean + (s - h/2) beta`` at arclength ``s`` in ``[0, h]``."""
    if not 0.0 <= s <= elem.h:
        raise DomainError(f"arclength {s} outside [0, {elem.h}]")
    return np.asarray(mean, dtype=float) + (s - 0.5 * elem.h) * elem.beta


def integrated_twist(elem, mean):
    """Fourth-order Magnus twist ``(h I - h^3/12 ad(beta)) mean``."""
    return slope_operator(elem.h, elem.beta) @ np.asarray(mean, dtype=float)


def partial_twist(h, mean, beta, s):
    """Magnus twist from the element start to arclength ``s``.

    On ``[0, s]`` the field is still linear with slope ``beta`` and mean
    ``mean + (s - h)/2 * beta``.
    """
    s = np.asarray(s, dtype=float)
    sub_mean = np.asarray(mean) + (0.5 * (s - h))[..., None] * np.asarray(beta)
    return s[..., None] * sub_mean - (s**3 / 12.0)[..., None] * np.einsum(
        "...ij,...j->...i", lg.ad(beta), sub_mean
    )


def _single(elem, g_a, g_b, order, tangent=True):
    beta = elem.beta if elem.mode is Mode.LSE else np.zeros(6)
    return evaluate(
        g_a.rotation[None], g_a.position[None], g_b.rotation[None], g_b.position[None],
        np.array([elem.h]), beta[None], elem.xi0[None], elem.stiffness.diagonal[None],
        order=order, tangent=tangent,
    )


def recover_mean_strain(elem, g_a, g_b, order=DEFAULT_DEXP_ORDER):
    """Mean strain and Jacobians from the nodal poses (no iteration)."""
    b = _single(elem, g_a, g_b, order, tangent=False)
    lse = elem.mode is Mode.LSE
    return ElementKinematics(
        omega=b.omega[0], mean_strain=b.mean[0], A_matrix=b.A[0],
        J1=b.J[0, 0], J2=b.J[0, 1], J3=b.J[0, 2] if lse else None,
    )


def jacobians(elem, kin):
    return kin.J1, kin.J2, kin.J3


def element_energy(elem, kin):
    dxi = kin.mean_strain - elem.xi0
    kd = elem.stiffness.diagonal
    return 0.5 * elem.h * dxi @ (kd * dxi) + elem.h**3 / 24.0 * elem.beta @ (kd * elem.beta)


def element_residual(elem, kin):
    kd = elem.stiffness.diagonal
    stress = kd * (kin.mean_strain - elem.xi0)
    R1 = elem.h * kin.J1.T @ stress
    R2 = elem.h * kin.J2.T @ stress
    R3 = None
    if elem.mode is Mode.LSE:
        R3 = elem.h * kin.J3.T @ stress + elem.h**3 / 12.0 * kd * elem.beta
    return ElementResidual(R1, R2, R3)


def element_tangent(elem, kin):
    K = elem.stiffness.matrix
    Js = [kin.J1, kin.J2] + ([kin.J3] if elem.mode is Mode.LSE else [])
    k = len(Js)
    blocks = np.empty((k, k, 6, 6))
    for i in range(k):
        for j in range(k):
            blocks[i, j] = elem.h * Js[i].T @ K @ Js[j]
    if k == 3:
        blocks[2, 2] += elem.h**3 / 12.0 * K
    return ElementTangent(blocks)


def rest_strain_from_poses(g_a0, g_b0, h=None):
    """Constant rest strain ``log(g_a0^-1 g_b0) / h``.

    ``h`` defaults to the screw-arc length between the poses, the norm of the
    translational part of the logarithm.
    """
    Rrel, prel = lg.relative_parts(g_a0.rotation, g_a0.position, g_b0.rotation, g_b0.position)
    try:
        omega = lg.log_parts(Rrel, prel)
    except lg.BranchCutError as exc:
        raise RestGeometryTooCoarseError(exc.angle) from None
    if h is None:
        h = float(np.linalg.norm(omega[3:]))
    if not h > 0:
        raise DomainError("coincident rest poses: element length is zero")
    xi0 = omega / h
    if np.linalg.norm(xi0[3:]) < 1e-12:
        warnings.warn("rest strain has zero axial stretch (coincident nodes)", stacklevel=2)
    return xi0
