"""SE(3) / se(3) kernel.

Twists are 6-vectors ordered ``[angular; linear]``; wrenches reuse the layout
as ``[moment; force]``.  Every array function accepts leading batch
dimensions, so ``exp_parts(v)`` works on a single ``(6,)`` twist as well as on
an ``(n, 6)`` stack.  :class:`Pose` is the scalar, validated value type used at
API boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math
from math import factorial

import numpy as np
from scipy.special import bernoulli

from .errors import BranchCutError, ConfigurationError, MalformedAlgebraError

# below this angle the trigonometric coefficients use their Taylor series
SMALL_ANGLE = 1e-2
BRANCH_MARGIN = 1e-6
DEFAULT_DEXP_ORDER = 8


def skew(w):
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def unskew(S):
    S = np.asarray(S, dtype=float)
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def hat(v):
    """Map a twist to its 4x4 se(3) matrix."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (4, 4))
    out[..., :3, :3] = skew(v[..., :3])
    out[..., :3, 3] = v[..., 3:]
    return out


def vee(M, atol=1e-12):
    """Inverse of :func:`hat`; rejects matrices outside se(3)."""
    M = np.asarray(M, dtype=float)
    if M.shape[-2:] != (4, 4):
        raise MalformedAlgebraError(f"expected a 4x4 matrix, got shape {M.shape}")
    W = M[..., :3, :3]
    if np.any(np.abs(W + np.swapaxes(W, -1, -2)) > atol) or np.any(
        np.abs(M[..., 3, :]) > atol
    ):
        raise MalformedAlgebraError(
            "matrix is not in se(3): upper-left block must be skew and the "
            "bottom row zero"
        )
    return np.concatenate([unskew(W), M[..., :3, 3]], axis=-1)


# (t - sin t)/t^3 and the log coefficient lose ~eps/t^2 to cancellation in
# closed form; below this angle they are summed as Taylor series instead
SERIES_ANGLE = 0.5
_C_SERIES = np.array([(-1) ** k / math.factorial(2 * k + 3) for k in range(8)])
_D_SERIES = np.array(
    [abs(float(bernoulli(2 * n)[-1])) / math.factorial(2 * n) for n in range(1, 10)]
)


def _even_series(coeffs, t2):
    out = np.zeros_like(t2)
    for c in coeffs[::-1]:
        out = out * t2 + c
    return out


def _coefficients(theta):
    """Return sin(t)/t, (1-cos t)/t^2 and (t-sin t)/t^3 with series near 0."""
    t2 = theta * theta
    small = theta < SMALL_ANGLE
    ts = np.where(small, 1.0, theta)
    a = np.where(small, 1 - t2 / 6 * (1 - t2 / 20 * (1 - t2 / 42)), np.sin(ts) / ts)
    half = np.sin(0.5 * ts) / ts
    b = np.where(small, 0.5 - t2 / 24 * (1 - t2 / 30 * (1 - t2 / 56)), 2.0 * half * half)
    mid = theta < SERIES_ANGLE
    tm = np.where(mid, 1.0, theta)
    c = np.where(mid, _even_series(_C_SERIES, t2), (tm - np.sin(tm)) / tm**3)
    return a, b, c


def _log_coefficient(theta):
    """``(1 - (t/2) cot(t/2)) / t^2 = sum |B_2n| t^(2n-2) / (2n)!``."""
    t2 = theta * theta
    mid = theta < SERIES_ANGLE
    tm = np.where(mid, 1.0, theta)
    closed = (1.0 - 0.5 * tm / np.tan(0.5 * tm)) / tm**2
    return np.where(mid, _even_series(_D_SERIES, t2), closed)


def exp_parts(v):
    """Closed-form exponential; returns ``(R, p)`` arrays."""
    v = np.asarray(v, dtype=float)
    kappa, eps = v[..., :3], v[..., 3:]
    theta = np.linalg.norm(kappa, axis=-1)
    a, b, c = _coefficients(theta)
    K = skew(kappa)
    K2 = K @ K
    eye = np.eye(3)
    R = eye + a[..., None, None] * K + b[..., None, None] * K2
    V = eye + b[..., None, None] * K + c[..., None, None] * K2
    p = np.einsum("...ij,...j->...i", V, eps)
    return R, p


def rotation_angle(R):
    R = np.asarray(R, dtype=float)
    w = 0.5 * unskew(R - np.swapaxes(R, -1, -2))
    cos_t = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(np.linalg.norm(w, axis=-1), cos_t)


def log_rotation(R, margin=BRANCH_MARGIN):
    """Principal rotation vector and angle of ``R``."""
    R = np.asarray(R, dtype=float)
    batch = R.shape[:-2]
    R = R.reshape(-1, 3, 3)
    w = 0.5 * unskew(R - np.swapaxes(R, -1, -2))
    sin_t = np.linalg.norm(w, axis=-1)
    cos_t = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(sin_t, cos_t)
    if np.any(theta >= np.pi - margin):
        raise BranchCutError(np.max(theta))
    small = theta < SMALL_ANGLE
    ts = np.where(small, 1.0, theta)
    t2 = theta * theta
    ratio = np.where(small, 1 + t2 / 6 * (1 + 7 * t2 / 60), ts / np.where(small, 1.0, sin_t))
    kappa = ratio[..., None] * w
    # near pi the antisymmetric part loses precision; read the axis off the
    # symmetric part instead and take the sign from w
    wide = theta > 2.0
    if np.any(wide):
        Rw = R[wide]
        tw, cw, ww = theta[wide], cos_t[wide], w[wide]
        B = 0.5 * (Rw + np.swapaxes(Rw, -1, -2)) - cw[:, None, None] * np.eye(3)
        diag = np.diagonal(B, axis1=-2, axis2=-1)
        i = np.argmax(diag, axis=-1)
        rows = np.arange(len(i))
        col = B[rows, :, i]
        axis = col / np.sqrt(diag[rows, i] * (1 - cw))[:, None]
        sign = np.where(np.einsum("ij,ij->i", axis, ww) < 0, -1.0, 1.0)
        kappa = np.array(kappa, copy=True)
        kappa[wide] = (sign * tw)[:, None] * axis
    return kappa.reshape(batch + (3,)), theta.reshape(batch)


def log_parts(R, p, margin=BRANCH_MARGIN):
    """Principal logarithm of ``(R, p)``; raises :class:`BranchCutError`."""
    p = np.asarray(p, dtype=float)
    kappa, theta = log_rotation(R, margin)
    d = _log_coefficient(theta)
    K = skew(kappa)
    Vinv = np.eye(3) - 0.5 * K + d[..., None, None] * (K @ K)
    eps = np.einsum("...ij,...j->...i", Vinv, p)
    return np.concatenate([kappa, eps], axis=-1)


def ad(v):
    """Algebra adjoint ``[[k~, 0], [e~, k~]]``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (6, 6))
    K = skew(v[..., :3])
    out[..., :3, :3] = K
    out[..., 3:, 3:] = K
    out[..., 3:, :3] = skew(v[..., 3:])
    return out


def Ad_parts(R, p):
    """Group adjoint ``[[R, 0], [p~ R, R]]``."""
    R = np.asarray(R, dtype=float)
    out = np.zeros(R.shape[:-2] + (6, 6))
    out[..., :3, :3] = R
    out[..., 3:, 3:] = R
    out[..., 3:, :3] = skew(p) @ R
    return out


@lru_cache(maxsize=None)
def _bernoulli_coefficients(order):
    b = bernoulli(order)
    return tuple(float(b[j]) / factorial(j) for j in range(order + 1))


def _series(v, coefficients):
    adv = ad(v)
    out = np.zeros_like(adv)
    out[...] = np.eye(6)
    out *= coefficients[0]
    term = np.broadcast_to(np.eye(6), adv.shape).copy()
    for c in coefficients[1:]:
        term = term @ adv
        if c != 0.0:
            out = out + c * term
    return out


def dexp(v, order=12):
    """Truncated series ``sum_j ad(v)^j / (j+1)!`` for ``j <= order``."""
    if order < 0:
        raise ConfigurationError("dexp order must be non-negative")
    return _series(v, tuple(1.0 / factorial(j + 1) for j in range(order + 1)))


def dexp_inv(v, order=DEFAULT_DEXP_ORDER):
    """Truncated Bernoulli series ``sum_j B_j/j! ad(v)^j`` for ``j <= order``.

    This inverts :func:`dexp`, i.e. the tangent map in the convention
    ``d/dt exp(v + t d) = hat(dexp(v) d) exp(v)``.
    """
    if int(order) != order or order < 1:
        raise ConfigurationError(f"dexp_inv order must be an integer >= 1, got {order}")
    return _series(v, _bernoulli_coefficients(int(order)))


def compose_parts(Ra, pa, Rb, pb):
    return Ra @ Rb, pa + np.einsum("...ij,...j->...i", Ra, pb)


def relative_parts(Ra, pa, Rb, pb):
    """``(Ra, pa)^-1 (Rb, pb)``."""
    RaT = np.swapaxes(Ra, -1, -2)
    return RaT @ Rb, np.einsum("...ij,...j->...i", RaT, pb - pa)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transformation (rotation matrix and position)."""

    rotation: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        p = np.array(self.position, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(p))):
            raise ValueError("pose entries must be finite")
        if np.linalg.norm(R.T @ R - np.eye(3)) > 1e-10 or abs(np.linalg.det(R) - 1) > 1e-10:
            raise ValueError("rotation must be orthonormal with det +1")
        R.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "position", p)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3])

    @classmethod
    def from_quaternion(cls, wxyz, position):
        w, x, y, z = np.asarray(wxyz, dtype=float) / np.linalg.norm(wxyz)
        R = np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )
        return cls(R, position)

    def quaternion(self):
        """Unit quaternion ``[w, x, y, z]`` with ``w >= 0``."""
        R = self.rotation
        tr = np.trace(R)
        if tr > 0:
            s = 2.0 * np.sqrt(tr + 1.0)
            q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        else:
            i = int(np.argmax(np.diag(R)))
            j, k = (i + 1) % 3, (i + 2) % 3
            s = 2.0 * np.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
            q = [0.0, 0.0, 0.0, 0.0]
            q[0] = (R[k, j] - R[j, k]) / s
            q[1 + i] = 0.25 * s
            q[1 + j] = (R[j, i] + R[i, j]) / s
            q[1 + k] = (R[k, i] + R[i, k]) / s
        q = np.array(q)
        return q if q[0] >= 0 else -q

    def matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.position
        return M

    def inverse(self):
        RT = self.rotation.T
        return Pose(RT, -RT @ self.position)

    def __matmul__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        R, p = compose_parts(self.rotation, self.position, other.rotation, other.position)
        return Pose(_orthonormalize(R), p)

    def allclose(self, other, atol=1e-12):
        return np.linalg.norm(self.rotation - other.rotation) <= atol and np.linalg.norm(
            self.position - other.position
        ) <= atol

    def __repr__(self):
        return f"Pose(position={self.position.tolist()}, quaternion={self.quaternion().round(12).tolist()})"


def _orthonormalize(R):
    # one polar-decomposition step keeps long products on SO(3)
    u, _, vt = np.linalg.svd(R)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] *= -1
        out = u @ vt
    return out


def exp_se3(v):
    v = np.asarray(v, dtype=float).reshape(6)
    R, p = exp_parts(v)
    return Pose(R, p)


def log_se3(g):
    return log_parts(g.rotation, g.position)


def Ad(g):
    return Ad_parts(g.rotation, g.position)


def retract(g, zeta):
    """Left-trivialized retraction ``g exp(zeta^)``."""
    return g @ exp_se3(zeta)
