"""Independent oracles and property checks shared by unit and acceptance tests."""

import math

import numpy as np
from scipy.integrate import solve_ivp

from cosserat_lse import element as el
from cosserat_lse import liegroup as lg
from cosserat_lse import network as nw
from cosserat_lse.element import ElementState, Mode, SectionStiffness
from cosserat_lse.liegroup import Pose


def series_exp(M, terms=20):
    """Truncated power series of the matrix exponential."""
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def random_twist(rng, kappa_max=1.0, eps_max=1.0):
    k = rng.normal(size=3)
    k *= rng.uniform(0.01, kappa_max) / np.linalg.norm(k)
    return np.concatenate([k, rng.uniform(-eps_max, eps_max, 3)])


def random_pose(rng, angle=2.0):
    return lg.exp_se3(random_twist(rng, angle, 2.0))


def random_element(rng, mode="LSE", h=0.3):
    K = SectionStiffness(*rng.uniform(0.5, 2.0, 6))
    beta = rng.normal(size=6) * 0.5 if mode == "LSE" else np.zeros(6)
    xi0 = np.array([0, 0, 0, 1.0, 0, 0]) + 0.1 * rng.normal(size=6)
    return ElementState(0, 1, h, K, xi0, beta, Mode(mode))


def random_element_pair(rng, elem):
    g_a = random_pose(rng)
    g_b = g_a @ lg.exp_se3(elem.h * (np.array([0, 0, 0, 1.0, 0, 0]) + 0.4 * rng.normal(size=6)))
    return g_a, g_b


def energy_of(elem, g_a, g_b, beta=None):
    e = ElementState(elem.node_a, elem.node_b, elem.h, elem.stiffness, elem.xi0,
                     elem.beta if beta is None else beta, elem.mode)
    return el.element_energy(e, el.recover_mean_strain(e, g_a, g_b))


def magnus_oracle(h, mean, beta, n_quad=64):
    """Fourth-order Magnus twist from the two moment integrals of xi(s) = mean + (s - h/2) beta.

    B0 = int xi ds, B1 = (1/h) int (s - h/2) xi ds by Gauss-Legendre quadrature and
    Omega = B0 - [B1, B0] with the bracket as a 4x4 matrix commutator.
    """
    x, w = np.polynomial.legendre.leggauss(n_quad)
    s = 0.5 * h * (x + 1.0)
    w = 0.5 * h * w
    xi = mean[None, :] + (s - 0.5 * h)[:, None] * beta[None, :]
    B0 = w @ xi
    B1 = (w * (s - 0.5 * h)) @ xi / h
    H0, H1 = lg.hat(B0), lg.hat(B1)
    return lg.vee(lg.hat(B0) - (H1 @ H0 - H0 @ H1))


def exact_flow(h, mean, beta):
    """g(h) of g' = g hat(xi(s)), g(0) = I, integrated with DOP853."""
    def f(s, y):
        G = y.reshape(4, 4)
        return (G @ lg.hat(mean + (s - 0.5 * h) * beta)).ravel()

    sol = solve_ivp(f, (0.0, h), np.eye(4).ravel(), method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[:, -1].reshape(4, 4)


# ---------------------------------------------------------------------------
# property checks returning the worst observed defect


def liegroup_round_trip(rng, count=1000):
    worst = 0.0
    for _ in range(count):
        v = random_twist(rng, 3.0, 3.0)
        worst = max(worst, np.linalg.norm(lg.log_se3(lg.exp_se3(v)) - v))
    return worst


def liegroup_homomorphism(rng, count=200):
    worst = 0.0
    for _ in range(count):
        g, h = random_pose(rng), random_pose(rng)
        worst = max(worst, np.abs(lg.Ad(g @ h) - lg.Ad(g) @ lg.Ad(h)).max())
    return worst


def element_objectivity(rng, count=20):
    worst = 0.0
    for _ in range(count):
        elem = random_element(rng)
        g_a, g_b = random_element_pair(rng, elem)
        g0 = random_pose(rng, 3.0)
        k1 = el.recover_mean_strain(elem, g_a, g_b)
        k2 = el.recover_mean_strain(elem, g0 @ g_a, g0 @ g_b)
        pairs = [
            (k1.mean_strain, k2.mean_strain), (k1.omega, k2.omega),
            (el.element_energy(elem, k1), el.element_energy(elem, k2)),
            (el.element_residual(elem, k1).stacked(), el.element_residual(elem, k2).stacked()),
            (el.element_tangent(elem, k1).matrix(), el.element_tangent(elem, k2).matrix()),
        ]
        worst = max(worst, max(np.abs(np.asarray(a) - np.asarray(b)).max() for a, b in pairs))
    return worst


def element_gradient_defect(rng, mode="LSE", step=1e-6):
    """Worst relative mismatch between residual and central FD of the energy in all 18 directions."""
    elem = random_element(rng, mode)
    g_a, g_b = random_element_pair(rng, elem)
    res = el.element_residual(elem, el.recover_mean_strain(elem, g_a, g_b)).stacked()
    fd = np.zeros_like(res)
    for j in range(6):
        d = np.zeros(6)
        d[j] = step
        fd[j] = (energy_of(elem, lg.retract(g_a, d), g_b) - energy_of(elem, lg.retract(g_a, -d), g_b)) / (2 * step)
        fd[6 + j] = (energy_of(elem, g_a, lg.retract(g_b, d)) - energy_of(elem, g_a, lg.retract(g_b, -d))) / (2 * step)
        if mode == "LSE":
            fd[12 + j] = (energy_of(elem, g_a, g_b, elem.beta + d) - energy_of(elem, g_a, g_b, elem.beta - d)) / (2 * step)
    return float(np.abs(res - fd).max() / np.abs(res).max())


def magnus_slope(rng, hs=(0.4, 0.2, 0.1, 0.05)):
    """Fitted log-log slope of |log(g_a^-1 g_b) - Omega_oracle| for the synthetic construction."""
    mean = np.array([0.3, -0.5, 0.8, 1.0, 0.2, -0.1]) + 0.1 * rng.normal(size=6)
    beta = np.array([1.2, 0.7, -0.9, 0.3, -0.4, 0.5]) + 0.1 * rng.normal(size=6)
    defects = []
    for h in hs:
        elem = ElementState(0, 1, h, SectionStiffness(1, 1, 1, 1, 1, 1), beta=beta)
        omega = el.integrated_twist(elem, mean)
        g_b = lg.exp_se3(omega)
        exact = lg.log_se3(Pose.from_matrix(exact_flow(h, mean, beta)))
        defects.append(np.linalg.norm(lg.log_se3(g_b) - exact))
    return float(np.polyfit(np.log(hs), np.log(defects), 1)[0]), defects


def scatter_adjointness(rng, scene):
    """|<scatter(x_e), y> - <x_e, gather(y)>| for the Boolean assembly maps."""
    dm = nw.build_dof_map(scene)
    idx = dm.local_indices(scene.model)
    x_e = rng.normal(size=idx.shape)
    y = rng.normal(size=dm.n)
    mask = idx >= 0
    scattered = np.zeros(dm.n)
    np.add.at(scattered, idx[mask], x_e[mask])
    gathered = np.where(mask, y[np.where(mask, idx, 0)], 0.0)
    return abs(scattered @ y - np.sum(x_e * gathered))


def global_gradient_defect(rng, scene, state, directions=50, step=1e-6):
    """Worst relative error of dq.r against a central FD of the total potential."""
    dm = nw.build_dof_map(scene)
    r, _ = nw.assemble(scene, state, dm, tangent=False)
    worst = 0.0
    for _ in range(directions):
        d = rng.normal(size=dm.n)
        d /= np.linalg.norm(d)
        up = nw.potential_energy(scene, nw.apply_update(state, dm, d, step))
        dn = nw.potential_energy(scene, nw.apply_update(state, dm, d, -step))
        fd = (up - dn) / (2 * step)
        worst = max(worst, abs(fd - d @ r) / max(abs(d @ r), 1e-300))
    return worst


def perturbed_state(rng, scene, scale=0.05):
    dm = nw.build_dof_map(scene)
    return nw.apply_update(nw.initial_state(scene), dm, scale * rng.normal(size=dm.n))


def rotation_pi_minus(delta):
    return Pose(lg.exp_parts(np.array([0, 0, math.pi - delta, 0, 0, 0]))[0], np.zeros(3))
