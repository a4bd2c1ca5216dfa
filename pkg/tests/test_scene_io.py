import json

import numpy as np
import pytest

from cosserat_lse import scenes as sc
from cosserat_lse.errors import SceneValidationError
from cosserat_lse.scene_io import load_scene, save_scene, scene_from_dict, scene_hash, scene_to_dict

GENERATED = [
    sc.cantilever(4, 1.0, frame="follower", ramp="sine:5"),
    sc.bend45(4, "CSE"),
    sc.patch_bending(2),
    sc.clamped_clamped(8, 50.0),
    sc.lattice2d(cells_x=3, cells_y=2),
    sc.truss3d(layers=3),
    sc.gridshell(nodes=29, equator=12, rings=3),
    sc.chiral(n=2),
]


@pytest.mark.parametrize("scene", GENERATED, ids=lambda s: f"{s.n_nodes}n{s.n_elements}e")
def test_round_trip_identical(tmp_path, scene):
    path = tmp_path / "scene.json"
    save_scene(scene, path)
    back = load_scene(path)
    assert scene_to_dict(back) == scene_to_dict(scene)
    assert scene_hash(back) == scene_hash(scene)
    a, b = scene.model, back.model
    for name in ("ea", "eb", "h", "xi0", "kdiag", "lse"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    for g, h in zip(scene.nodes, back.nodes):
        assert np.array_equal(g.rotation, h.rotation) and np.array_equal(g.position, h.position)
    assert back.solver == scene.solver


def minimal():
    return {
        "nodes": [{"position": [0, 0, 0], "quaternion": [1, 0, 0, 0]},
                  {"position": [1, 0, 0], "rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1]}],
        "elements": [{"nodes": [0, 1]}],
        "materials": [{"E_Pa": 1e6, "nu": 0.45, "radius_m": 0.01}],
        "constraints": [{"node": 0}],
        "loads": [{"node": 1, "wrench": [0, 0, 0, 0, 0, 1e-3], "ramp": "linear:3"}],
    }


def test_minimal_document():
    s = scene_from_dict(minimal())
    assert s.n_nodes == 2 and s.elements[0].mode.value == "LSE"
    assert s.loads[0].frame == "dead" and s.loads[0].ramp.steps == 3
    direct = minimal()
    direct["materials"] = [{"GJx": 1, "EJy": 2, "EJz": 3, "EA": 4, "GA1": 5, "GA2": 6}]
    assert scene_from_dict(direct).materials[0].stiffness.EJz == 3


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["nodes"][0].update(color="red"),
    lambda d: d["materials"][0].update(E_Pa=-1),
    lambda d: d["elements"][0].update(mode="QSE"),
    lambda d: d["loads"][0].update(frame="spatial"),
    lambda d: d["loads"][0].update(wrench=[0, 1]),
    lambda d: d["nodes"][0].update(rotation=[1, 0, 0, 0, 1, 0, 0, 0, 1]),
    lambda d: d["nodes"][1].update(rotation=[2, 0, 0, 0, 1, 0, 0, 0, 1]),
    lambda d: d.update(solver={"residual_tol": 0}),
    lambda d: d.update(solver={"tangent": "exact"}),
    lambda d: d.update(constraints=[]),
    lambda d: d["elements"][0].update(nodes=[0, 4]),
])
def test_rejects_bad_documents(mutate):
    d = minimal()
    mutate(d)
    with pytest.raises(SceneValidationError):
        scene_from_dict(d)


def test_file_errors(tmp_path):
    with pytest.raises(SceneValidationError, match="cannot read"):
        load_scene(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nodes: ")
    with pytest.raises(SceneValidationError, match="not valid JSON"):
        load_scene(bad)


def test_hash_changes_with_content():
    a = sc.cantilever(4, 1.0)
    b = sc.cantilever(4, 1.0 + 1e-15)
    assert scene_hash(a) == scene_hash(sc.cantilever(4, 1.0))
    assert scene_hash(a) != scene_hash(b)
    json.loads(json.dumps(scene_to_dict(a)))
