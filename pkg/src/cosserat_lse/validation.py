"""Reference solutions and error metrics.

The shooting oracle integrates the static rod equations in the body frame,

    g' = g hat(xi),   Lambda' = ad(xi)^T Lambda,   xi = xi0 + K^-1 Lambda,

from the clamped end and adjusts the unknown base wrench until the tip
wrench balances the applied load.  It shares only the Lie-group primitives
and the stiffness type with the element code.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import element as el
from . import liegroup as lg
from . import network as nw
from .errors import DomainError, InsufficientDataError, OracleFailureError
from .liegroup import Pose

log = logging.getLogger(__name__)

ERROR_FLOOR = 1e-14


@dataclass
class CenterlineSample:
    s: float
    pose: Pose
    strain: np.ndarray
    internal_wrench: np.ndarray  # body frame, moment first
    rest_position: np.ndarray | None = None

    @property
    def position(self):
        return self.pose.position


@dataclass
class RefinementStudy:
    counts: list
    errors: list
    order: float = float("nan")
    fit_residual: float = float("nan")
    used: list = field(default_factory=list)

    def to_dict(self):
        return {
            "counts": list(map(int, self.counts)),
            "errors": list(map(float, self.errors)),
            "order": float(self.order),
            "fit_residual": float(self.fit_residual),
            "used": list(map(bool, self.used)),
        }


# ---------------------------------------------------------------------------
# rod description shared by the oracle and the discrete fields


@dataclass
class RodData:
    """A single unbranched rod read off a scene, in arclength order."""

    elements: list  # element indices from the clamped end
    nodes: list  # node indices, len(elements) + 1
    breaks: np.ndarray  # cumulative arclength at the nodes
    kdiag: np.ndarray  # (m, 6)
    xi0: np.ndarray  # (m, 6)
    base: Pose
    tip_loads: list

    @property
    def length(self):
        return float(self.breaks[-1])


def rod_chain(scene, start=None):
    """Order the elements of a single rod starting at ``start`` (default: the
    constrained end).  Elements must point away from the start."""
    scene.validate()
    deg = scene.degrees()
    if np.any(deg > 2):
        raise DomainError("scene is not a single unbranched rod")
    if start is None:
        ends = [c.node for c in scene.constraints if deg[c.node] == 1]
        if not ends:
            raise DomainError("no constrained rod end to start from")
        start = ends[0]
    by_a = {e.node_a: k for k, e in enumerate(scene.elements)}
    nodes, elems = [start], []
    while nodes[-1] in by_a and len(elems) < scene.n_elements:
        k = by_a[nodes[-1]]
        elems.append(k)
        nodes.append(scene.elements[k].node_b)
    if len(elems) != scene.n_elements:
        raise DomainError("elements do not form one chain oriented away from the clamped end")
    return elems, nodes


def rod_data(scene):
    elems, nodes = rod_chain(scene)
    m = scene.model
    breaks = np.concatenate([[0.0], np.cumsum(m.h[elems])])
    tip = nodes[-1]
    loads = [ld for ld in scene.loads if ld.node == tip]
    if len(loads) != len(scene.loads):
        raise DomainError("the shooting oracle supports loads at the free end only")
    return RodData(elems, nodes, breaks, m.kdiag[elems], m.xi0[elems], scene.nodes[nodes[0]], loads)


def _tip_wrench(rod, R, factor=1.0):
    w = np.zeros(6)
    for ld in rod.tip_loads:
        w += nw.external_wrench(ld, R, factor)
    return w


# ---------------------------------------------------------------------------
# shooting oracle


def _rhs(kd, xi0):
    def f(s, y):
        R = y[:9].reshape(3, 3)
        lam = y[12:]
        xi = xi0 + lam / kd
        dR = R @ lg.skew(xi[:3])
        dp = R @ xi[3:]
        dlam = lg.ad(xi).T @ lam
        return np.concatenate([dR.ravel(), dp, dlam])

    return f


def _integrate(rod, lam0, dense=False, rtol=1e-12, atol=1e-13):
    y = np.concatenate([rod.base.rotation.ravel(), rod.base.position, lam0])
    sols = []
    for k in range(len(rod.elements)):
        sol = solve_ivp(
            _rhs(rod.kdiag[k], rod.xi0[k]), (rod.breaks[k], rod.breaks[k + 1]), y,
            method="DOP853", rtol=rtol, atol=atol, dense_output=dense,
        )
        if not sol.success:
            raise OracleFailureError(f"integration failed: {sol.message}")
        y = sol.y[:, -1]
        sols.append(sol)
    return y, sols


def _mismatch(rod, lam0, factor):
    y, _ = _integrate(rod, lam0)
    R = y[:9].reshape(3, 3)
    return y[12:] - _tip_wrench(rod, R, factor)


def _newton(rod, lam0, factor, tol, max_iter):
    F = _mismatch(rod, lam0, factor)
    for it in range(max_iter):
        if np.max(np.abs(F)) < tol:
            return lam0, it
        J = np.empty((6, 6))
        for i in range(6):
            d = 1e-7 * max(1.0, abs(lam0[i]))
            e = np.zeros(6)
            e[i] = d
            J[:, i] = (_mismatch(rod, lam0 + e, factor) - F) / d
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        alpha, norm = 1.0, np.linalg.norm(F)
        while alpha > 1e-6:
            trial = lam0 + alpha * step
            try:
                Ft = _mismatch(rod, trial, factor)
            except OracleFailureError:
                Ft = None
            if Ft is not None and np.all(np.isfinite(Ft)) and np.linalg.norm(Ft) < norm:
                lam0, F = trial, Ft
                break
            alpha *= 0.5
        else:
            break
    if np.max(np.abs(F)) < tol:
        return lam0, max_iter
    raise OracleFailureError(
        f"shooting did not converge (tip mismatch {np.max(np.abs(F)):.3e} after {max_iter} iterations)"
    )


def _rest_guess(rod, factor):
    """Base wrench of the rest configuration carrying the tip load."""
    g = rod.base
    for k in range(len(rod.elements)):
        g = g @ lg.exp_se3((rod.breaks[k + 1] - rod.breaks[k]) * rod.xi0[k])
    rel = rod.base.inverse() @ g
    W = _tip_wrench(rod, g.rotation, factor)
    return lg.Ad(rel.inverse()).T @ W


def shooting_reference(scene, n_samples=401, tol=1e-10, max_iter=200, increments=8):
    """Dense reference centerline of a clamped single rod with an end load.

    Damped Newton on the base wrench (forward-difference Jacobian).  The load
    is applied in ``increments`` warm-started steps so that the oracle follows
    the loading path from the rest shape (a single jump can land on another
    equilibrium branch); on failure the count is doubled up to 32.
    """
    rod = rod_data(scene)
    lam0 = None
    for n_inc in sorted({increments, 16, 32}):
        try:
            prev, lam = None, _rest_guess(rod, 1.0 / n_inc)
            for k in range(1, n_inc + 1):
                guess = lam if prev is None else 2.0 * lam - prev  # secant extrapolation
                prev, lam = lam, _newton(rod, guess, k / n_inc, tol, max_iter)[0]
            lam0 = lam
            break
        except OracleFailureError as exc:
            log.info("shooting with %d increments failed: %s", n_inc, exc)
    if lam0 is None:
        raise OracleFailureError("shooting failed even with 32 load increments")
    return _samples_from_shooting(rod, lam0, n_samples)


def _samples_from_shooting(rod, lam0, n_samples):
    _, sols = _integrate(rod, lam0, dense=True)
    L = rod.length
    grid = np.union1d(np.linspace(0.0, L, max(n_samples, 201)), rod.breaks)
    out = []
    g_rest = rod.base
    for k, sol in enumerate(sols):
        a, b = rod.breaks[k], rod.breaks[k + 1]
        last = k == len(sols) - 1
        pts = grid[(grid >= a) & ((grid < b) | (last & (grid <= b)))]
        for s in pts:
            y = sol.sol(s)
            R = _orthonormal(y[:9].reshape(3, 3))
            lam = y[12:]
            rest = (g_rest @ lg.exp_se3((s - a) * rod.xi0[k])).position
            out.append(
                CenterlineSample(float(s), Pose(R, y[9:12]), rod.xi0[k] + lam / rod.kdiag[k], lam.copy(), rest)
            )
        g_rest = g_rest @ lg.exp_se3((b - a) * rod.xi0[k])
    return out


def _orthonormal(R):
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1
        Q = U @ Vt
    return Q


# ---------------------------------------------------------------------------
# fields


class RodField:
    """Strain and centerline of a discrete single-rod solution."""

    def __init__(self, scene, state, order=None):
        rod = rod_data(scene)
        self.rod = rod
        m = scene.model
        batch = nw.evaluate_elements(scene, state, order, tangent=False)
        idx = rod.elements
        self.mean = batch.mean[idx]
        self.beta = np.where(m.lse[idx, None], state.slopes[idx], 0.0)
        self.h = m.h[idx]
        self.breaks = rod.breaks
        self.kdiag = rod.kdiag
        self.xi0 = rod.xi0
        self.start = [state.pose(scene.elements[k].node_a) for k in idx]
        self.rest_start = [scene.nodes[scene.elements[k].node_a] for k in idx]

    @property
    def length(self):
        return float(self.breaks[-1])

    def locate(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(self.breaks, s, side="right") - 1, 0, len(self.h) - 1)
        return k, s - self.breaks[k]

    def strain_at(self, s):
        k, u = self.locate(s)
        return self.mean[k] + (u - 0.5 * self.h[k])[..., None] * self.beta[k]

    def position_at(self, s):
        """Exact centerline positions at arclengths ``s`` (no interpolation)."""
        k, u = self.locate(np.atleast_1d(s))
        out = np.empty((len(k), 3))
        for kk in np.unique(k):
            sel = np.flatnonzero(k == kk)
            tw = el.partial_twist(self.h[kk], self.mean[kk], self.beta[kk], u[sel])
            g = self.start[kk]
            out[sel] = g.position + lg.exp_parts(tw)[1] @ g.rotation.T
        return out

    def samples(self, per_element=16):
        out = []
        for k in range(len(self.h)):
            last = k == len(self.h) - 1
            us = np.linspace(0.0, self.h[k], per_element + 1)[: None if last else -1]
            tw = el.partial_twist(self.h[k], self.mean[k], self.beta[k], us)
            for u, t in zip(us, tw):
                g = self.start[k] @ lg.exp_se3(t)
                xi = self.mean[k] + (u - 0.5 * self.h[k]) * self.beta[k]
                rest = (self.rest_start[k] @ lg.exp_se3(u * self.xi0[k])).position
                out.append(
                    CenterlineSample(float(self.breaks[k] + u), g, xi, self.kdiag[k] * (xi - self.xi0[k]), rest)
                )
        return out


class SampledField:
    """Piecewise-linear interpolation of a sample list."""

    def __init__(self, samples):
        s = np.array([c.s for c in samples])
        if np.any(np.diff(s) < 0):
            raise DomainError("samples must be sorted by arclength")
        self.s = s
        self.positions = np.array([c.position for c in samples])
        self.strains = np.array([c.strain for c in samples])
        self.rest = None
        if all(c.rest_position is not None for c in samples):
            self.rest = np.array([c.rest_position for c in samples])

    @property
    def length(self):
        return float(self.s[-1] - self.s[0])

    def _interp(self, values, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.stack([np.interp(s, self.s, values[:, j]) for j in range(values.shape[1])], axis=-1)

    def strain_at(self, s):
        return self._interp(self.strains, s)

    def position_at(self, s):
        return self._interp(self.positions, s)


def _as_samples(obj, per_element=16):
    if isinstance(obj, RodField):
        return obj.samples(per_element)
    return list(obj)


# ---------------------------------------------------------------------------
# metrics


def displacement_error(candidate, reference):
    """RMS position error over arclength normalized by the reference's largest
    displacement from its rest shape.

    Sample lists are interpolated linearly on the union of their abscissae.
    A ``RodField`` is evaluated exactly at the other side's abscissae, which
    keeps chord errors of a curved rod out of the metric.
    """
    exact = isinstance(candidate, RodField)
    cand = candidate if exact else SampledField(_as_samples(candidate))
    ref = SampledField(_as_samples(reference))
    if ref.rest is None:
        raise DomainError("reference samples carry no rest positions")
    L = ref.length
    if abs(cand.length - L) > 1e-9 * max(1.0, L):
        raise DomainError(f"rod lengths differ: {cand.length} vs {L}")
    u_max = float(np.max(np.linalg.norm(ref.positions - ref.rest, axis=1)))
    if not u_max > 0:
        raise DomainError("reference has zero displacement; e_p is undefined")
    s = ref.s if exact else np.union1d(cand.s, ref.s)
    d2 = np.sum((cand.position_at(s) - ref.position_at(s)) ** 2, axis=1)
    return float(np.sqrt(np.trapezoid(d2, s) / L) / u_max)


def energy_error(candidate, reference, points=4):
    """Stiffness-weighted strain error with Gauss quadrature on the candidate's elements."""
    if not isinstance(candidate, RodField):
        raise DomainError("the candidate must be a discrete rod field")
    ref = reference if isinstance(reference, RodField) else SampledField(list(reference))
    L = candidate.length
    if abs(ref.length - L) > 1e-9 * max(1.0, L):
        raise DomainError(f"rod lengths differ: {L} vs {ref.length}")
    x, w = np.polynomial.legendre.leggauss(points)
    total = 0.0
    for k in range(len(candidate.h)):
        a, b = candidate.breaks[k], candidate.breaks[k + 1]
        s = 0.5 * (a + b) + 0.5 * (b - a) * x
        d = candidate.strain_at(s) - ref.strain_at(s)
        total += 0.5 * (b - a) * np.sum(w * np.einsum("qi,i,qi->q", d, candidate.kdiag[k], d))
    return float(total)


def fit_convergence_order(counts, errors, floor=ERROR_FLOOR):
    """Least-squares slope ``p`` of ``log(error) = c - p log(N)`` over the points above ``floor``."""
    counts = np.asarray(counts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(np.diff(counts) <= 0):
        raise DomainError("element counts must be strictly increasing")
    used = errors > floor
    if used.sum() < 4:
        raise InsufficientDataError(f"need at least 4 points above {floor:g}, have {int(used.sum())}")
    X = np.column_stack([np.ones(used.sum()), np.log(counts[used])])
    coef, res, *_ = np.linalg.lstsq(X, np.log(errors[used]), rcond=None)
    resid = float(np.sqrt(res[0] / used.sum())) if len(res) else 0.0
    return RefinementStudy(list(counts.astype(int)), list(errors), float(-coef[1]), resid, list(used))


def internal_moment_check(scene, state, moment=None, per_element=16):
    """Global-frame internal moment minus the applied end moment along the rod.

    Returns ``(s, diff)`` with ``diff`` of shape (n, 3).
    """
    if moment is None:
        moment = sum(ld.wrench[:3] for ld in scene.loads if ld.frame == "dead")
    moment = np.asarray(moment, dtype=float)
    samples = RodField(scene, state).samples(per_element)
    s = np.array([c.s for c in samples])
    M = np.array([c.pose.rotation @ c.internal_wrench[:3] for c in samples])
    return s, M - moment


# ---------------------------------------------------------------------------
# networks


def network_chains(scene):
    """Split a network into maximal chains through unconstrained degree-2 nodes.

    Returns a list of chains, each a list of ``(element, reversed)`` in walking
    order.  Closed loops become one chain starting at their lowest element.
    """
    deg = scene.degrees()
    constrained = {c.node for c in scene.constraints}
    incident = [[] for _ in range(scene.n_nodes)]
    for k, e in enumerate(scene.elements):
        incident[e.node_a].append(k)
        incident[e.node_b].append(k)
    through = lambda v: deg[v] == 2 and v not in constrained  # noqa: E731
    used = np.zeros(scene.n_elements, dtype=bool)
    chains = []

    def walk(k, v):
        chain = []
        while True:
            used[k] = True
            e = scene.elements[k]
            rev = e.node_a != v
            chain.append((k, rev))
            v = e.node_a if rev else e.node_b
            if not through(v):
                return chain
            nxt = [j for j in incident[v] if not used[j]]
            if not nxt:
                return chain
            k = nxt[0]

    for k, e in enumerate(scene.elements):
        if used[k]:
            continue
        for v in (e.node_a, e.node_b):
            if not through(v):
                chains.append(walk(k, v))
                break
    for k in range(scene.n_elements):
        if not used[k]:
            chains.append(walk(k, scene.elements[k].node_a))
    return chains


def centerline_rows(scene, state, per_element=8, order=None):
    """Plot-ready rows ``(chain, element, s, x, y, z, qw, qx, qy, qz, strain*6, wrench*6)``.

    ``s`` runs along the chain; strains and wrenches are body-frame values of
    the element in its own orientation.
    """
    m = scene.model
    batch = nw.evaluate_elements(scene, state, order, tangent=False)
    beta = np.where(m.lse[:, None], state.slopes, 0.0)
    rows = []
    for c, chain in enumerate(network_chains(scene)):
        offset = 0.0
        for k, rev in chain:
            h = m.h[k]
            us = np.linspace(0.0, h, per_element + 1)
            tw = el.partial_twist(h, batch.mean[k], beta[k], us)
            ga = state.pose(scene.elements[k].node_a)
            for u, t in zip(us, tw):
                g = ga @ lg.exp_se3(t)
                xi = batch.mean[k] + (u - 0.5 * h) * beta[k]
                wr = m.kdiag[k] * (xi - m.xi0[k])
                s = offset + (h - u if rev else u)
                rows.append([c, k, s, *g.position, *g.quaternion(), *xi, *wr])
            offset += h
    rows.sort(key=lambda r: (r[0], r[2], r[1]))
    return rows


CENTERLINE_HEADER = [
    "chain", "element", "s", "x", "y", "z", "qw", "qx", "qy", "qz",
    "kx", "ky", "kz", "ex", "ey", "ez", "mx", "my", "mz", "fx", "fy", "fz",
]
