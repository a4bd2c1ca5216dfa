import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cosserat_lse import liegroup as lg
from cosserat_lse import network as nw
from cosserat_lse import scenes as sc
from cosserat_lse import validation as va
from cosserat_lse.errors import DomainError, InsufficientDataError, OracleFailureError
from cosserat_lse.liegroup import Pose
from cosserat_lse.network import Load
from cosserat_lse.solver import attainable_tolerance, load_stepped_solve

from helpers import random_pose


def solved(scene, tol=None):
    scene.solver.residual_tol = attainable_tolerance(scene, tol)
    state, rep = load_stepped_solve(scene)
    assert rep.converged, rep.message
    return state


def samples(s, positions, rest):
    return [va.CenterlineSample(float(a), Pose(np.eye(3), p), np.zeros(6), np.zeros(6), r)
            for a, p, r in zip(s, positions, rest)]


def test_shooting_zero_load():
    ref = va.shooting_reference(sc.cantilever(4, 0.0))
    assert len(ref) >= 200
    for c in ref:
        assert np.allclose(c.position, [c.s, 0, 0], atol=1e-12)
        assert np.allclose(c.internal_wrench, 0.0, atol=1e-12)
        assert np.allclose(c.pose.rotation, np.eye(3), atol=1e-12)


def test_shooting_axial():
    scene = sc.straight_rod(4)
    scene.loads.append(Load(4, [0, 0, 0, 10.0, 0, 0], "dead"))
    tip = va.shooting_reference(scene)[-1]
    assert tip.position == pytest.approx([1.01, 0, 0], abs=1e-10)
    assert tip.internal_wrench[3] == pytest.approx(10.0, abs=1e-9)


def test_shooting_matches_dense_lse():
    ref = va.shooting_reference(sc.cantilever(4, 1.0))[-1].position
    state = solved(sc.cantilever(1000, 1.0))
    assert np.linalg.norm(state.positions[-1] - ref) < 1e-6


def test_shooting_balances_tip_load():
    scene = sc.cantilever(4, 1.5, frame="follower")
    tip = va.shooting_reference(scene)[-1]
    assert np.allclose(tip.internal_wrench, [0, 0, 0, 0, 0, 1.5], atol=1e-9)


def test_shooting_failure_is_reported():
    with pytest.raises(OracleFailureError):
        va.shooting_reference(sc.cantilever(4, 3.0, frame="follower"), max_iter=1)


def test_shooting_rejects_networks():
    with pytest.raises(DomainError):
        va.shooting_reference(sc.lattice2d(cells_x=1, cells_y=1))


def test_displacement_error_trivial():
    s = np.linspace(0, 2.0, 201)
    rest = np.column_stack([s, 0 * s, 0 * s])
    pos = rest + np.column_stack([0 * s, 0 * s, 0.3 * s**2])  # u_max = 1.2
    ref = samples(s, pos, rest)
    assert va.displacement_error(ref, ref) == 0.0
    shifted = samples(s, pos + [0.0, 0.05, 0.0], rest)
    assert va.displacement_error(shifted, ref) == pytest.approx(0.05 / 1.2, rel=1e-12)
    with pytest.raises(DomainError):
        va.displacement_error(ref, samples(s, rest, rest))
    with pytest.raises(DomainError):
        va.displacement_error(samples(s[:100], pos[:100], rest[:100]), ref)


def test_displacement_error_rigid_invariance(rng):
    scene = sc.cantilever(4, 1.0)
    ref = va.shooting_reference(scene)
    cand = va.RodField(scene, solved(sc.cantilever(4, 1.0))).samples(8)
    e0 = va.displacement_error(cand, ref)
    Q = random_pose(rng, 2.0)

    def moved(lst):
        return [va.CenterlineSample(c.s, Q @ c.pose, c.strain, c.internal_wrench,
                                    Q.rotation @ c.rest_position + Q.position) for c in lst]

    assert va.displacement_error(moved(cand), moved(ref)) == pytest.approx(e0, rel=1e-12, abs=1e-12)


def test_rodfield_exact_evaluation():
    scene = sc.cantilever(3, 1.0)
    state = solved(scene)
    f = va.RodField(scene, state)
    assert np.allclose(f.position_at(f.breaks), state.positions, atol=1e-12)
    smp = f.samples(4)
    assert np.allclose(f.position_at([c.s for c in smp]), [c.position for c in smp], atol=1e-13)
    assert smp[0].s == 0.0 and smp[-1].s == pytest.approx(1.0)


def test_energy_error_symmetry_and_offset():
    a = va.RodField(sc.cantilever(4, 0.5), solved(sc.cantilever(4, 0.5)))
    b = va.RodField(sc.cantilever(4, 1.0), solved(sc.cantilever(4, 1.0)))
    assert va.energy_error(a, a) == 0.0
    assert va.energy_error(a, b) == pytest.approx(va.energy_error(b, a), rel=1e-12)
    # constant offset on an unloaded rod
    rest_scene = sc.cantilever(4, 0.0)
    rest = va.RodField(rest_scene, nw.initial_state(rest_scene))
    delta = np.array([0.01, -0.02, 0.03, 0.004, 0.0, -0.001])
    ref = [va.CenterlineSample(c.s, c.pose, c.strain + delta, c.internal_wrench, c.rest_position)
           for c in rest.samples(4)]
    K = rest_scene.materials[0].stiffness.diagonal
    assert va.energy_error(rest, ref) == pytest.approx(1.0 * delta @ (K * delta), rel=1e-12)
    with pytest.raises(DomainError):
        va.energy_error(rest, ref[:5])


@given(st.floats(1.0, 6.0), st.floats(-5.0, 5.0))
def test_fit_recovers_power_law(p, logc):
    counts = [2, 4, 8, 16, 32, 64]
    errors = [np.exp(logc) * n**-p for n in counts]
    study = va.fit_convergence_order(counts, errors, floor=0.0)
    assert study.order == pytest.approx(p, abs=1e-8)


def test_fit_examples_and_floor():
    counts = [1, 2, 4, 8, 16]
    assert va.fit_convergence_order(counts, [n**-2.0 for n in counts]).order == pytest.approx(2.0, abs=1e-10)
    assert va.fit_convergence_order(counts, [n**-4.0 for n in counts]).order == pytest.approx(4.0, abs=1e-10)
    errs = [1e-2, 1e-4, 1e-6, 1e-8, 1e-16]
    study = va.fit_convergence_order(counts, errs)
    assert study.used == [True, True, True, True, False]
    with pytest.raises(InsufficientDataError):
        va.fit_convergence_order(counts, [1e-2, 1e-4, 1e-6, 1e-15, 1e-16])
    with pytest.raises(DomainError):
        va.fit_convergence_order([1, 4, 2, 8], [1, 2, 3, 4])


def test_internal_moment_zero_and_patch():
    scene = sc.patch_bending(4, moment=(0.0, 0.0, 0.0))
    s, diff = va.internal_moment_check(scene, solved(scene))
    assert np.abs(diff).max() < 1e-15
    for n in (2, 4):
        scene = sc.patch_bending(n)
        M = np.array([5e-3, 20e-3, 0.0])
        s, diff = va.internal_moment_check(scene, solved(scene, 1e-12))
        assert np.abs(diff).max() <= 1e-9 * np.linalg.norm(M)


def test_patch_helix_tip():
    scene = sc.patch_bending(2)
    state = solved(scene, 1e-12)
    EI = scene.materials[0].stiffness.EJy
    tip = sc.helix_tip([5e-3, 20e-3, 0.0], EI)
    # an inextensible helix vs an extensible rod: the axial/shear compliance is far below 1e-8
    assert np.linalg.norm(state.positions[-1] - tip.position) < 1e-8 * np.linalg.norm(tip.position)


def test_network_chains_cover_elements():
    for scene in (sc.lattice2d(cells_x=3, cells_y=2), sc.truss3d(layers=3), sc.cantilever(5)):
        chains = va.network_chains(scene)
        used = sorted(k for ch in chains for k, _ in ch)
        assert used == list(range(scene.n_elements))


def test_centerline_rows():
    scene = sc.lattice2d(cells_x=2, cells_y=1)
    rows = va.centerline_rows(scene, nw.initial_state(scene), per_element=4)
    assert len(va.CENTERLINE_HEADER) == 22
    assert all(len(r) == 22 for r in rows)
    assert len(rows) == 5 * scene.n_elements
    # rest state: zero internal wrench everywhere
    assert np.abs(np.array([r[16:] for r in rows], dtype=float)).max() < 1e-12
