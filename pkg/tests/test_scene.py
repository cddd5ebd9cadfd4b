from __future__ import annotations

import math

import numpy as np
import pytest

from synthscan.assets import LabelRegistry, load_asset, load_ground_plane
from synthscan.errors import (
    GroundTooSmall,
    MalformedSceneXml,
    MissingAsset,
    RotationUnsupported,
)
from synthscan.scene import (
    Scene,
    ScenePart,
    build_scene,
    file_asset_loader,
    generate_scan_positions,
    parse_scene_xml,
    write_scene_xml,
)
from synthscan.geometry import vec3

GROUND = "v -40 -40 0\nv 40 -40 0\nv 40 40 0\nv -40 40 0\nf 1 2 3 4\n"
# unit box sitting on z in [2, 3]: placement must drop it onto the ground
BOX = """
v 0 0 2
v 1 0 2
v 1 1 2
v 0 1 2
v 0 0 3
v 1 0 3
v 1 1 3
v 0 1 3
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "ground.obj").write_text(GROUND)
    (tmp_path / "elbow_1.obj").write_text(BOX)
    (tmp_path / "valve_1.obj").write_text(BOX)
    (tmp_path / "pipe_1.obj").write_text(BOX)
    (tmp_path / "tee_1.obj").write_text(BOX)
    (tmp_path / "flange_1.obj").write_text(BOX)
    return tmp_path


def _load(workdir, names):
    reg = LabelRegistry()
    ground = load_ground_plane(workdir / "ground.obj")
    assets = [load_asset(workdir / n, reg) for n in names]
    return assets, ground, reg


def test_four_objects_form_symmetric_grid(workdir):
    assets, ground, reg = _load(workdir, ["elbow_1.obj"])
    scene = build_scene(assets, ground, num_objects=4, spacing=10.0,
                        name="grid", registry=reg)
    assert len(scene.parts) == 5
    centers = np.array([p.aabb().center[:2] for p in scene.parts[1:]])
    expect = {(-5.0, -5.0), (5.0, -5.0), (-5.0, 5.0), (5.0, 5.0)}
    got = {(round(c[0], 9), round(c[1], 9)) for c in centers}
    assert got == expect


def test_five_objects_three_by_two_grid(workdir):
    names = ["elbow_1.obj", "valve_1.obj", "pipe_1.obj", "tee_1.obj", "flange_1.obj"]
    assets, ground, reg = _load(workdir, names)
    scene = build_scene(assets, ground, num_objects=5, spacing=10.0,
                        name="joints", registry=reg)
    xs = sorted({round(float(p.aabb().center[0]), 9) for p in scene.parts[1:]})
    ys = sorted({round(float(p.aabb().center[1]), 9) for p in scene.parts[1:]})
    assert xs == [-10.0, 0.0, 10.0]  # 3 columns
    assert ys == [-5.0, 5.0]         # 2 rows, last cell empty
    assert len(scene.parts) == 6
    # each distinct asset used once
    assert sorted(p.class_id for p in scene.parts[1:]) == [1, 2, 3, 4, 5]


def test_single_object_at_ground_centroid(workdir):
    assets, ground, reg = _load(workdir, ["elbow_1.obj"])
    scene = build_scene(assets, ground, num_objects=1, spacing=10.0,
                        name="one", registry=reg)
    np.testing.assert_allclose(scene.parts[1].aabb().center[:2], [0.0, 0.0], atol=1e-12)


def test_objects_rest_exactly_on_ground(workdir):
    assets, ground, reg = _load(workdir, ["elbow_1.obj", "valve_1.obj"])
    scene = build_scene(assets, ground, num_objects=4, spacing=12.0,
                        name="flat", registry=reg)
    for part in scene.parts:
        v = part.asset.vertices + part.translation
        assert abs(float(v[:, 2].min()) - 0.0) < 1e-9


def test_round_robin_reuse(workdir):
    assets, ground, reg = _load(workdir, ["elbow_1.obj", "valve_1.obj"])
    scene = build_scene(assets, ground, num_objects=5, spacing=10.0,
                        name="again", registry=reg)
    assert [p.class_id for p in scene.parts[1:]] == [1, 2, 1, 2, 1]


def test_ground_too_small(workdir):
    assets, ground, reg = _load(workdir, ["elbow_1.obj"])
    with pytest.raises(GroundTooSmall):
        build_scene(assets, ground, num_objects=9, spacing=50.0,
                    name="cramped", registry=reg)


def test_scene_center_excludes_ground(workdir):
    assets, ground, reg = _load(workdir, ["elbow_1.obj"])
    scene = build_scene(assets, ground, num_objects=2, spacing=10.0,
                        name="c", registry=reg)
    np.testing.assert_allclose(scene.center[:2], [0.0, 0.0], atol=1e-12)
    assert scene.center[2] == pytest.approx(0.5)  # box mid-height


def test_scatter_placement_seeded_and_on_ground(workdir):
    assets, ground, reg = _load(workdir, ["elbow_1.obj", "valve_1.obj"])
    a = build_scene(assets, ground, 6, 10.0, "sc", reg, scatter_seed=9)
    b = build_scene(assets, ground, 6, 10.0, "sc", reg, scatter_seed=9)
    c = build_scene(assets, ground, 6, 10.0, "sc", reg, scatter_seed=10)
    for pa, pb in zip(a.parts, b.parts):
        np.testing.assert_array_equal(pa.translation, pb.translation)
    assert any(not np.array_equal(pa.translation, pc.translation)
               for pa, pc in zip(a.parts[1:], c.parts[1:]))
    gbox = ground.aabb()
    for part in a.parts[1:]:
        box = part.aabb()
        assert box.min[0] >= gbox.min[0] and box.max[0] <= gbox.max[0]
        assert box.min[1] >= gbox.min[1] and box.max[1] <= gbox.max[1]
        v = part.asset.vertices + part.translation
        assert abs(float(v[:, 2].min())) < 1e-9


def test_scatter_object_larger_than_ground(workdir):
    reg = LabelRegistry()
    small = load_ground_plane(workdir / "ground.obj")
    big = load_asset(workdir / "elbow_1.obj", reg)
    big.vertices = big.vertices * 200.0  # wider than the 80 m ground
    with pytest.raises(GroundTooSmall):
        build_scene([big], small, 1, 10.0, "big", reg, scatter_seed=1)


# -- scan positions -----------------------------------------------------------


def test_quarter_circle_positions():
    pos = generate_scan_positions(vec3(0, 0, 0), radius=50.0, segments=4, height=1.7)
    got = np.array([p.position for p in pos])
    expect = np.array([[50, 0, 1.7], [0, 50, 1.7], [-50, 0, 1.7], [0, -50, 1.7]])
    np.testing.assert_allclose(got, expect, atol=1e-9)
    assert [p.index for p in pos] == [0, 1, 2, 3]


def test_three_segments_central_angle():
    pos = generate_scan_positions(vec3(0, 0, 0), radius=50.0, segments=3)
    assert len(pos) == 3
    for a, b in zip(pos, pos[1:]):
        va = a.position[:2] / 50.0
        vb = b.position[:2] / 50.0
        angle = math.degrees(math.acos(float(np.clip(np.dot(va, vb), -1, 1))))
        assert angle == pytest.approx(120.0, abs=1e-9)


def test_fourteen_segments_radius_100():
    center = vec3(3.0, -2.0, 0.5)
    pos = generate_scan_positions(center, radius=100.0, segments=14)
    assert len(pos) == 14
    for p in pos:
        d = math.hypot(p.position[0] - center[0], p.position[1] - center[1])
        assert abs(d - 100.0) < 1e-9
        assert p.position[2] == pytest.approx(0.5 + 1.7)


def test_positions_distinct_and_evenly_spaced():
    for segments in (2, 5, 9):
        pos = generate_scan_positions(vec3(0, 0, 0), 10.0, segments)
        pts = np.array([p.position[:2] for p in pos])
        assert len({tuple(np.round(p, 12)) for p in pts}) == segments
        angles = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
        gaps = np.diff(angles)
        np.testing.assert_allclose(gaps, 2 * math.pi / segments, atol=1e-12)


def test_invalid_scan_position_arguments():
    with pytest.raises(ValueError):
        generate_scan_positions(vec3(0, 0, 0), 50.0, 0)
    with pytest.raises(ValueError):
        generate_scan_positions(vec3(0, 0, 0), 0.0, 3)


# -- scene XML ----------------------------------------------------------------


def _scene_equal(a: Scene, b: Scene) -> None:
    assert a.name == b.name
    assert len(a.parts) == len(b.parts)
    for pa, pb in zip(a.parts, b.parts):
        assert pa.part_index == pb.part_index
        assert pa.class_id == pb.class_id
        np.testing.assert_array_equal(pa.translation, pb.translation)
        np.testing.assert_array_equal(pa.asset.triangles, pb.asset.triangles)
        np.testing.assert_array_equal(pa.asset.vertices, pb.asset.vertices)


def test_xml_declaration_first_line(workdir):
    assets, ground, reg = _load(workdir, ["elbow_1.obj"])
    scene = build_scene(assets, ground, 1, 10.0, "decl", reg)
    data = write_scene_xml(scene)
    assert data.splitlines()[0] == b'<?xml version="1.0"?>'


def test_single_part_xml_structure(workdir):
    assets, ground, reg = _load(workdir, ["elbow_1.obj"])
    scene = build_scene(assets, ground, 1, 10.0, "tiny", reg)
    text = write_scene_xml(scene).decode()
    assert text.count("<part") == 2  # ground + object
    assert 'filter type="objloader"' in text
    assert 'filter type="translate"' in text
    assert 'classId="1"' in text


def test_scene_xml_round_trip(workdir):
    names = ["elbow_1.obj", "valve_1.obj", "pipe_1.obj"]
    assets, ground, reg = _load(workdir, names)
    scene = build_scene(assets, ground, 6, 11.25, "rt", reg)
    data = write_scene_xml(scene)
    back = parse_scene_xml(data, file_asset_loader(workdir))
    _scene_equal(scene, back)
    assert write_scene_xml(back) == data


def test_scene_xml_round_trip_random_translations(workdir):
    rng = np.random.default_rng(21)
    loader = file_asset_loader(workdir)
    reg = LabelRegistry()
    ground = load_ground_plane(workdir / "ground.obj")
    objects = [load_asset(workdir / n, reg)
               for n in ["elbow_1.obj", "valve_1.obj", "pipe_1.obj"]]
    for case in range(100):
        parts = [ScenePart(ground, vec3(0, 0, 0), 0, 0)]
        for i in range(int(rng.integers(1, 5))):
            asset = objects[int(rng.integers(0, 3))]
            t = rng.uniform(-20, 20, size=3)
            parts.append(ScenePart(asset, t, asset.label_id, i + 1))
        scene = Scene(name=f"case{case}", parts=parts, labels=reg)
        back = parse_scene_xml(write_scene_xml(scene), loader)
        _scene_equal(scene, back)


def test_rotation_rejected(workdir):
    xml = f"""<?xml version="1.0"?>
<document>
  <scene id="s" name="s">
    <part id="0" classId="0">
      <filter type="objloader"><param key="filepath" value="ground.obj"/></filter>
      <filter type="rotate"><param key="axis" value="0;0;1"/></filter>
    </part>
  </scene>
</document>
"""
    with pytest.raises(RotationUnsupported):
        parse_scene_xml(xml.encode(), file_asset_loader(workdir))


def test_missing_asset(workdir):
    xml = """<?xml version="1.0"?>
<document>
  <scene id="s">
    <part id="0" classId="0">
      <filter type="objloader"><param key="filepath" value="absent.obj"/></filter>
    </part>
  </scene>
</document>
"""
    with pytest.raises(MissingAsset):
        parse_scene_xml(xml.encode(), file_asset_loader(workdir))


@pytest.mark.parametrize("xml,why", [
    ("<notdoc/>", "wrong root"),
    ('<document/>', "no scene"),
    ('<document><scene id="s"/></document>', "no parts"),
    ('<document><scene id="s"><part id="0" classId="0"/></scene></document>',
     "no objloader"),
    ('<document><scene id="s"><part id="0" classId="x">'
     '<filter type="objloader"><param key="filepath" value="ground.obj"/></filter>'
     '</part></scene></document>', "bad classId"),
    ('<document><scene id="s"><part id="0" classId="0">'
     '<filter type="objloader"><param key="filepath" value="ground.obj"/></filter>'
     '<filter type="translate"><param key="offset" value="1;2"/></filter>'
     '</part></scene></document>', "short offset"),
])
def test_malformed_scene_xml(workdir, xml, why):
    with pytest.raises(MalformedSceneXml):
        parse_scene_xml(xml.encode(), file_asset_loader(workdir))


def test_degenerate_triangles_dropped(workdir, caplog):
    reg = LabelRegistry()
    ground = load_ground_plane(workdir / "ground.obj")
    bad = load_asset(workdir / "elbow_1.obj", reg)
    # append a zero-area sliver
    bad.vertices = np.vstack([bad.vertices, [[0, 0, 0], [1, 0, 0], [2, 0, 0]]])
    n = bad.vertices.shape[0]
    bad.triangles = np.vstack([bad.triangles, [[n - 3, n - 2, n - 1]]]).astype(np.int32)
    scene = Scene("deg", [ScenePart(ground, vec3(0, 0, 0), 0, 0),
                          ScenePart(bad, vec3(0, 0, 0), 1, 1)], reg)
    with caplog.at_level("WARNING"):
        v0, v1, v2, part = scene.triangle_arrays()
    assert v0.shape[0] == 2 + 12  # quad ground + box, sliver gone
    assert "degenerate" in caplog.text
