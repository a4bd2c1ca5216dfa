"""Programmatic scene builders for the validation benchmarks and applications.

Every builder returns a validated :class:`~cosserat_lse.network.NetworkScene`
with nodes numbered along each rod.  Parameters not fixed by the benchmark
literature are keyword arguments with documented defaults.
"""

from __future__ import annotations

import math

import numpy as np

from .config import Ramp, SolverConfig
from .element import Mode, SectionStiffness
from .errors import ConfigurationError
from .liegroup import Pose, exp_se3
from .network import Constraint, ElementSpec, Load, Material, NetworkScene

# Table-1 soft rod: bending (and torsion) 0.2 N m^2, shear and axial 1000 N.
SOFT_ROD = SectionStiffness(0.2, 0.2, 0.2, 1000.0, 1000.0, 1000.0)
SOFT_ROD_SPEC = {"GJx": 0.2, "EJy": 0.2, "EJz": 0.2, "EA": 1000.0, "GA1": 1000.0, "GA2": 1000.0}


def _rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def circular_material(E, nu, radius, name=None):
    return Material(
        SectionStiffness.circular(E, nu, radius),
        {"E_Pa": float(E), "nu": float(nu), "radius_m": float(radius)},
        name,
    )


def soft_material(name="soft-rod"):
    return Material(SOFT_ROD, dict(SOFT_ROD_SPEC), name)


def _chain(n, mode):
    return [ElementSpec(i, i + 1, 0, Mode(mode)) for i in range(n)]


def straight_rod(n, length=1.0, mode="LSE", material=None):
    """Straight rod along x with identity node frames, node 0 clamped."""
    if n < 1:
        raise ConfigurationError("a rod needs at least one element")
    nodes = [Pose(np.eye(3), [length * i / n, 0.0, 0.0]) for i in range(n + 1)]
    return NetworkScene(
        nodes, _chain(n, mode), [material or soft_material()], [Constraint(0, "clamped")]
    )


def cantilever(n=4, force=1.0, mode="LSE", frame="dead", ramp="single", direction=(0, 0, 1)):
    """Table-1 cantilever (L = 1 m) with a tip force along ``direction``.

    For a straight rod with identity frames the body z axis at the tip starts
    out as the global z axis, so dead and follower loads agree at the start.
    """
    scene = straight_rod(n, 1.0, mode)
    w = np.zeros(6)
    w[3:] = force * np.asarray(direction, dtype=float)
    scene.loads.append(Load(n, w, frame, Ramp.parse(ramp)))
    return scene.validate()


# 45 degree bend: arc in the x-z plane so that the y load is out of plane
BEND_RADIUS = 100.0
BEND_ANGLE = math.pi / 4
BEND_E = 1.0e12  # 1e6 MPa
BEND_SECTION_RADIUS = 1.0


def bend45(n=8, mode="LSE", force=600.0, ramp="single", solver=None):
    """Cantilevered 45 degree arc (R = 100 m, L = 25 pi m) under a dead tip force along y."""
    nodes = []
    for i in range(n + 1):
        phi = BEND_ANGLE * i / n
        p = [BEND_RADIUS * math.sin(phi), 0.0, BEND_RADIUS * (1.0 - math.cos(phi))]
        nodes.append(Pose(_rot_y(-phi), p))
    mat = circular_material(BEND_E, 0.0, BEND_SECTION_RADIUS, "bend45")
    loads = [Load(n, [0, 0, 0, 0, force, 0], "dead", Ramp.parse(ramp))]
    # axial stiffness ~3e12 N puts the round-off floor of |r| near 1e-4
    solver = solver or SolverConfig(residual_tol=1e-6, decrement_tol=1e-13)
    scene = NetworkScene(nodes, _chain(n, mode), [mat], [Constraint(0, "clamped")], loads, solver)
    return scene.validate()


def bend45_length():
    return BEND_RADIUS * BEND_ANGLE


# pure-bending patch test
PATCH_LENGTH = 1.0
PATCH_E = 1.0e7


def patch_bending(n=4, slenderness=200.0, moment=(5e-3, 20e-3, 0.0), mode="LSE", E=PATCH_E):
    """Clamped rod under a dead end moment; nu = 0 makes GJ = EI so the exact
    deformed shape is a circular helix about the moment axis."""
    radius = PATCH_LENGTH / slenderness
    scene = straight_rod(n, PATCH_LENGTH, mode, circular_material(E, 0.0, radius, "patch"))
    scene.loads.append(Load(n, np.concatenate([moment, np.zeros(3)]), "dead"))
    scene.solver = SolverConfig(residual_tol=1e-12)
    return scene.validate()


def helix_tip(moment, EI, length=PATCH_LENGTH, start=None):
    """Exact end pose of an isotropic inextensible rod under a constant spatial
    moment: the rod rotates about the fixed axis ``moment`` at rate |M|/EI."""
    start = start or Pose.identity()
    omega = np.asarray(moment, dtype=float) / EI
    v = np.concatenate([start.rotation.T @ omega, [1.0, 0.0, 0.0]])
    return start @ exp_se3(length * v)


# clamped-clamped beam under a mid-span load
CC_LENGTH = 0.5
CC_E = 1.0e6
CC_NU = 0.45
# mid-span loads (N) giving the 200-element reference deflections 2.09e-2,
# 2.14e-2 and 2.10e-2 m for L/r = 50, 100, 200 (see the decisions ledger)
CC_LOADS = {50.0: 0.497426118, 100.0: 0.0797369599, 200.0: 0.0148540654}


def clamped_clamped(n=16, slenderness=200.0, load=None, mode="LSE", ramp="linear:16"):
    """Both ends clamped, dead transverse load ``-z`` at the mid node."""
    if n % 2:
        raise ConfigurationError("the element count must be even to have a mid-span node")
    s = float(slenderness)
    if load is None:
        if s not in CC_LOADS:
            raise ConfigurationError(
                f"no default load for L/r = {s}; pass load=... (defaults exist for {sorted(CC_LOADS)})"
            )
        load = CC_LOADS[s]
    radius = CC_LENGTH / s
    scene = straight_rod(n, CC_LENGTH, mode, circular_material(CC_E, CC_NU, radius, "clamped-clamped"))
    scene.constraints.append(Constraint(n, "clamped"))
    scene.loads.append(Load(n // 2, [0, 0, 0, 0, 0, -load], "dead", Ramp.parse(ramp)))
    # membrane tension dominates once the deflection exceeds the radius; the
    # Gauss-Newton iteration is unstable there.  The full Newton direction
    # always descends on |r|, so backtracking on the residual is safe
    scene.solver = SolverConfig(residual_tol=1e-10, tangent="newton", line_search="backtracking")
    return scene.validate()


# ---------------------------------------------------------------------------
# applications


def _twist_target(pose, angle, axis_point, axis=0):
    """Pose after a rigid rotation by ``angle`` about a coordinate axis through ``axis_point``."""
    Q = (_rot_x, _rot_y, _rot_z)[axis](angle)
    c = np.asarray(axis_point, dtype=float)
    return Pose(Q @ pose.rotation, c + Q @ (pose.position - c))


def lattice2d(cells_x=29, cells_y=3, spacing=0.1, twist=math.pi / 2, steps=10, mode="LSE"):
    """Planar grid of Table-1 rods in the x-y plane.

    ``cells_x`` x ``cells_y`` square cells give ``nx*ny`` nodes with
    ``nx = cells_x + 1``, ``ny = cells_y + 1`` and ``2*nx*ny - nx - ny``
    elements (120 / 206 for the defaults).  The left column is clamped and the
    right column is rigidly rotated by ``twist`` about the lattice's
    longitudinal (x) axis along a ``steps``-step linear ramp.
    """
    if cells_x < 1 or cells_y < 1:
        raise ConfigurationError("lattice needs at least one cell in each direction")
    nx, ny = int(cells_x) + 1, int(cells_y) + 1
    idx = lambda i, j: j * nx + i  # noqa: E731
    nodes = [Pose(np.eye(3), [i * spacing, j * spacing, 0.0]) for j in range(ny) for i in range(nx)]
    els = []
    for j in range(ny):
        for i in range(nx - 1):
            els.append(ElementSpec(idx(i, j), idx(i + 1, j), 0, Mode(mode)))
    for j in range(ny - 1):
        for i in range(nx):
            els.append(ElementSpec(idx(i, j), idx(i, j + 1), 0, Mode(mode)))
    center = [0.0, 0.5 * (ny - 1) * spacing, 0.0]
    cons = [Constraint(idx(0, j), "clamped") for j in range(ny)]
    ramp = Ramp("linear", steps)
    for j in range(ny):
        k = idx(nx - 1, j)
        cons.append(Constraint(k, "prescribed", _twist_target(nodes[k], twist, center), ramp))
    scene = NetworkScene(nodes, els, [soft_material()], cons, [], SolverConfig(residual_tol=1e-9))
    return scene.validate()


def lattice2d_counts(cells_x, cells_y):
    nx, ny = cells_x + 1, cells_y + 1
    return nx * ny, 2 * nx * ny - nx - ny


def truss3d(layers=11, spacing=0.1, twist=math.pi / 3, steps=10, mode="LSE", tol=1e-8):
    """Spatial truss of ``layers`` 3x3 cross-sections along x.

    Each cross-section carries its outer ring (8 members) plus a vertical web
    through the centre (2 members); each bay has the 9 longitudinal members
    and one diagonal in each side face, alternating direction from bay to
    bay.  That is ``9*layers`` nodes and ``21*layers - 11`` elements (99 / 220
    for the defaults).  The first layer is clamped, the last is twisted about
    the x axis.  The default tolerance sits above the round-off floor of
    the residual (a few 1e-9 for this scene).
    """
    if layers < 2:
        raise ConfigurationError("truss needs at least two layers")
    idx = lambda k, a, b: 9 * k + 3 * b + a  # noqa: E731  (a: y index, b: z index)
    nodes = [
        Pose(np.eye(3), [k * spacing, (a - 1) * spacing, (b - 1) * spacing])
        for k in range(layers) for b in range(3) for a in range(3)
    ]
    ring = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
    els = []
    for k in range(layers):
        for (a0, b0), (a1, b1) in zip(ring, ring[1:] + ring[:1]):
            els.append(ElementSpec(idx(k, a0, b0), idx(k, a1, b1), 0, Mode(mode)))
        els.append(ElementSpec(idx(k, 1, 0), idx(k, 1, 1), 0, Mode(mode)))
        els.append(ElementSpec(idx(k, 1, 1), idx(k, 1, 2), 0, Mode(mode)))
    for k in range(layers - 1):
        for b in range(3):
            for a in range(3):
                els.append(ElementSpec(idx(k, a, b), idx(k + 1, a, b), 0, Mode(mode)))
        lo, hi = (0, 2) if k % 2 == 0 else (2, 0)
        for a in (0, 2):  # side faces y = -s and y = +s
            els.append(ElementSpec(idx(k, a, lo), idx(k + 1, a, hi), 0, Mode(mode)))
    ramp = Ramp("linear", steps)
    cons = [Constraint(idx(0, a, b), "clamped") for b in range(3) for a in range(3)]
    last = layers - 1
    for b in range(3):
        for a in range(3):
            i = idx(last, a, b)
            cons.append(Constraint(i, "prescribed", _twist_target(nodes[i], twist, nodes[idx(last, 1, 1)].position), ramp))
    scene = NetworkScene(nodes, els, [soft_material()], cons, [], SolverConfig(residual_tol=tol))
    return scene.validate()


def truss3d_counts(layers):
    return 9 * layers, 21 * layers - 11


def _ring_sizes(rings, equator, nodes):
    """Ring node counts proportional to the ring circumference, rounded by
    largest remainder so that ``1 + sum = nodes`` and the last ring has
    exactly ``equator`` nodes."""
    phis = 0.5 * math.pi * np.arange(1, rings) / rings
    budget = nodes - 1 - equator
    if budget < 3 * (rings - 1) or rings < 1:
        raise ConfigurationError("too few nodes for the requested ring count")
    if rings == 1:
        if budget != 0:
            raise ConfigurationError(f"with one ring the node count must be {1 + equator}")
        return [equator]
    raw = np.sin(phis)
    raw = budget * raw / raw.sum()
    sizes = np.floor(raw).astype(int)
    order = np.argsort(-(raw - sizes), kind="stable")
    sizes[order[: budget - sizes.sum()]] += 1
    if np.any(sizes < 3) or np.any(np.diff(sizes) < 0) or sizes[-1] > equator:
        raise ConfigurationError("ring sizes would not grow towards the equator; adjust rings/nodes")
    return [int(v) for v in sizes] + [equator]


def gridshell_counts(nodes, equator):
    """Elements of the ring triangulation: ``3 (nodes - 1) - equator``."""
    return 3 * (nodes - 1) - equator


def gridshell(nodes=579, equator=116, rings=7, radius=1.0, pole_load=5.0, steps=5, mode="LSE"):
    """Triangulated hemisphere: a pole node plus latitude rings whose node counts
    follow the ring circumference; consecutive rings are zipped into a triangle
    strip by angular order.  The equator ring is clamped and a dead downward
    force acts on the pole.  Defaults: 579 nodes, 1618 elements.

    Node frames are the identity and the rods are straight chords, so no rest
    curvature appears at the junctions; the soft-rod section is isotropic in
    its bending and in its shear/axial blocks, which makes the stiffness
    independent of the element's orientation relative to the node frame.
    """
    sizes = _ring_sizes(rings, equator, nodes)
    poses = [Pose(np.eye(3), [0.0, 0.0, radius])]
    ring_ids, ring_ang = [], []
    for k, m in enumerate(sizes, start=1):
        phi = 0.5 * math.pi * k / rings
        offset = 0.5 * (k % 2) * 2 * math.pi / m
        th = offset + 2 * math.pi * np.arange(m) / m
        ids = list(range(len(poses), len(poses) + m))
        for t in th:
            poses.append(Pose(np.eye(3), [radius * math.sin(phi) * math.cos(t), radius * math.sin(phi) * math.sin(t), radius * math.cos(phi)]))
        ring_ids.append(ids)
        ring_ang.append(np.mod(th, 2 * math.pi))
    edges = set()

    def add(a, b):
        edges.add((min(a, b), max(a, b)))

    for i in ring_ids[0]:
        add(0, i)
    for ids, ang in zip(ring_ids, ring_ang):
        for a, b in zip(ids, ids[1:] + ids[:1]):
            add(a, b)
    for (ia, aa), (ib, ab) in zip(zip(ring_ids, ring_ang), zip(ring_ids[1:], ring_ang[1:])):
        for a, b in _zip_rings(ia, aa, ib, ab):
            add(a, b)
    els = [ElementSpec(a, b, 0, Mode(mode)) for a, b in sorted(edges)]
    cons = [Constraint(i, "clamped") for i in ring_ids[-1]]
    loads = [Load(0, [0, 0, 0, 0, 0, -pole_load], "dead", Ramp("linear", steps))]
    scene = NetworkScene(poses, els, [soft_material()], cons, loads, SolverConfig(residual_tol=1e-9))
    expected = gridshell_counts(nodes, equator)
    if len(els) != expected:  # pragma: no cover - guards the construction rule
        raise ConfigurationError(f"triangulation produced {len(els)} elements, expected {expected}")
    return scene.validate()


def _zip_rings(ia, aa, ib, ab):
    """Edges of the triangle strip between two closed rings (advancing front).

    Both rings are unwrapped to angles measured from the first node of the
    outer ring; at each step the front advances on the ring whose next node
    comes first.  Yields ``len(ia) + len(ib)`` distinct edges.
    """
    two_pi = 2 * math.pi
    t0 = min(ab)
    ua, ub = np.mod(np.asarray(aa) - t0, two_pi), np.mod(np.asarray(ab) - t0, two_pi)
    oa, ob = np.argsort(ua, kind="stable"), np.argsort(ub, kind="stable")
    A, B = [ia[k] for k in oa], [ib[k] for k in ob]
    ua = np.append(ua[oa], ua[oa][0] + two_pi)
    ub = np.append(ub[ob], ub[ob][0] + two_pi)
    na, nb = len(A), len(B)
    i = j = 0
    out = [(A[0], B[0])]
    while i < na or j < nb:
        if i < na and (j == nb or ua[i + 1] < ub[j + 1]):
            i += 1
        else:
            j += 1
        out.append((A[i % na], B[j % nb]))
    return out


# chiral parallel mechanism
CHIRAL_E = 1.0e5
CHIRAL_NU = 0.45
CHIRAL_ROD_RADIUS = 0.04
CHIRAL_LENGTH = 0.8
CHIRAL_PLATE_RADIUS = 0.3


def chiral(n=8, plate_radius=CHIRAL_PLATE_RADIUS, rods=4, mode="LSE"):
    """Four vertical rods between a clamped bottom plate and a top plate.

    The top plate is rigid: its rod ends are clamped constraints whose targets
    the chiral benchmark moves together (one driving pose per plate).  Node
    frames have their x axis along the rod (global z).
    """
    frame = _rot_y(-0.5 * math.pi)  # body x -> global z
    nodes, els, cons = [], [], []
    for r in range(rods):
        th = 2 * math.pi * r / rods
        base = np.array([plate_radius * math.cos(th), plate_radius * math.sin(th), 0.0])
        first = len(nodes)
        for i in range(n + 1):
            nodes.append(Pose(frame, base + [0.0, 0.0, CHIRAL_LENGTH * i / n]))
        els += [ElementSpec(first + i, first + i + 1, 0, Mode(mode)) for i in range(n)]
        cons.append(Constraint(first, "clamped"))
        cons.append(Constraint(first + n, "clamped"))
    mat = circular_material(CHIRAL_E, CHIRAL_NU, CHIRAL_ROD_RADIUS, "chiral")
    scene = NetworkScene(nodes, els, [mat], cons, [], SolverConfig(residual_tol=1e-9))
    return scene.validate()


def plate_pose(twist, drop):
    """Driving pose of the top plate: rotation ``twist`` about z, lowered by ``drop``."""
    return Pose(_rot_z(twist), [0.0, 0.0, -drop])


def move_plate(scene, top_nodes, plate):
    """Set the clamped targets of the top-plate nodes to ``plate`` applied to their rest poses."""
    cons = scene.constraint_of()
    for i in top_nodes:
        cons[i].target = plate @ scene.nodes[i]
