from __future__ import annotations

import numpy as np
import pytest

from synthscan.assets import (
    GROUND_LABEL,
    LabelRegistry,
    color_for_label,
    label_for_asset,
    load_assets_dir,
    load_ground_plane,
    normalize_label_name,
    parse_obj,
    write_obj,
)
from synthscan.errors import MalformedObj, MissingFile

SIMPLE = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
GROUND = "v -5 -5 0\nv 5 -5 0\nv 5 5 0\nv -5 5 0\nf 1 2 3 4\n"


def test_parse_minimal_triangle():
    asset = parse_obj(SIMPLE)
    assert asset.n_triangles == 1
    assert asset.vertices.shape == (3, 3)
    np.testing.assert_array_equal(asset.triangles[0], [0, 1, 2])


def test_quad_fan_triangulation():
    asset = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    assert asset.n_triangles == 2
    np.testing.assert_array_equal(asset.triangles, [[0, 1, 2], [0, 2, 3]])


def test_pentagon_fan_triangulation():
    lines = ["v 0 0 0", "v 1 0 0", "v 2 1 0", "v 1 2 0", "v 0 1 0", "f 1 2 3 4 5"]
    asset = parse_obj("\n".join(lines))
    np.testing.assert_array_equal(asset.triangles, [[0, 1, 2], [0, 2, 3], [0, 3, 4]])


def test_out_of_range_index_raises():
    with pytest.raises(MalformedObj) as err:
        parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n")
    assert err.value.line == 4


def test_non_numeric_coordinate_raises():
    with pytest.raises(MalformedObj):
        parse_obj("v 0 zero 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")


def test_zero_index_raises():
    with pytest.raises(MalformedObj):
        parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")


def test_negative_indices():
    asset = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
    np.testing.assert_array_equal(asset.triangles[0], [0, 1, 2])


def test_index_forms_and_normals():
    text = (
        "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
        "vn 0 0 1\n"
        "vt 0 0\nvt 1 0\nvt 0 1\n"
        "f 1/1/1 2/2/1 3/3/1\n"
        "f 1//1 2//1 3//1\n"
        "f 1/1 2/2 3/3\n"
    )
    asset = parse_obj(text)
    assert asset.n_triangles == 3
    assert asset.normals.shape == (1, 3)
    np.testing.assert_array_equal(asset.triangle_normals[0], [0, 0, 0])
    np.testing.assert_array_equal(asset.triangle_normals[2], [-1, -1, -1])


def test_groups_concatenate_and_unknown_directives_skipped():
    text = (
        "# comment\nmtllib foo.mtl\no part\n"
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
        "g other\nusemtl bar\ns off\n"
        "v 0 0 1\nv 1 0 1\nv 0 1 1\nf 4 5 6\n"
    )
    asset = parse_obj(text)
    assert asset.n_triangles == 2
    assert asset.name == "part"


def test_no_faces_raises():
    with pytest.raises(MalformedObj):
        parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\n")


def test_obj_round_trip_preserves_triangles():
    rng = np.random.default_rng(3)
    verts = rng.uniform(-1, 1, size=(30, 3))
    lines = [f"v {v[0]} {v[1]} {v[2]}" for v in verts]
    for _ in range(40):
        i, j, k = rng.choice(30, size=3, replace=False) + 1
        lines.append(f"f {i} {j} {k}")
    first = parse_obj("\n".join(lines))
    second = parse_obj(write_obj(first))
    np.testing.assert_array_equal(first.triangles, second.triangles)
    np.testing.assert_array_equal(first.vertices, second.vertices)


# -- labels -------------------------------------------------------------------


def test_label_stem_normalization():
    assert normalize_label_name("elbow_03.obj") == "elbow"
    assert normalize_label_name("Valve-2.obj") == "valve"
    assert normalize_label_name("valve.obj") == "valve"
    assert normalize_label_name("T piece 12.obj") == "t piece"
    assert normalize_label_name("pipe_1_2.obj") == "pipe"
    assert normalize_label_name("123.obj") == "123"  # all-digit stems kept


def test_first_assignment_gets_id_one():
    reg = LabelRegistry()
    label = label_for_asset("elbow_03.obj", reg)
    assert (label.id, label.name) == (1, "elbow")


def test_lookup_is_idempotent():
    reg = LabelRegistry()
    a = label_for_asset("elbow_03.obj", reg)
    b = label_for_asset("elbow_07.obj", reg)
    assert a == b
    assert len(reg) == 2  # ground + elbow


def test_suffix_variants_collapse_to_one_label():
    reg = LabelRegistry()
    label_for_asset("elbow_03.obj", reg)
    variants = ["valve.obj", "Valve-2.obj", "valve_10.obj", "VALVE 7.obj",
                "valve-1-2.obj", "valve.3.obj"]
    ids = {label_for_asset(v, reg).id for v in variants}
    assert ids == {2}
    assert reg.name_of(2) == "valve"


def test_bind_conflicts_rejected():
    reg = LabelRegistry()
    reg.bind(3, "tee")
    reg.bind(3, "tee")
    with pytest.raises(ValueError):
        reg.bind(3, "pipe")
    with pytest.raises(ValueError):
        reg.bind(4, "tee")


def test_registry_stability_across_directory_scans(tmp_path):
    (tmp_path / "b_pipe_1.obj").write_text(SIMPLE)
    (tmp_path / "a_elbow_1.obj").write_text(SIMPLE)
    (tmp_path / "c_valve_2.obj").write_text(SIMPLE)

    def scan():
        reg = LabelRegistry()
        assets = load_assets_dir(tmp_path, reg)
        return [(a.name, a.label_id) for a in assets], [(l.id, l.name) for l in reg.labels()]

    first, reg1 = scan()
    second, reg2 = scan()
    assert first == second
    assert reg1 == reg2
    # sorted filename order drives id assignment
    assert reg1 == [(0, "ground"), (1, "a_elbow"), (2, "b_pipe"), (3, "c_valve")]


def test_ground_plane_loading(tmp_path):
    p = tmp_path / "groundplane.obj"
    p.write_text(GROUND)
    asset = load_ground_plane(p)
    assert asset.label_id == GROUND_LABEL.id == 0
    assert asset.n_triangles == 2
    assert asset.color == color_for_label(0)


def test_nonplanar_ground_accepted(tmp_path):
    p = tmp_path / "bumpy.obj"
    p.write_text("v -5 -5 0\nv 5 -5 0.5\nv 5 5 0\nv -5 5 -0.5\nf 1 2 3 4\n")
    assert load_ground_plane(p).n_triangles == 2


def test_missing_ground_file(tmp_path):
    with pytest.raises(MissingFile):
        load_ground_plane(tmp_path / "nope.obj")


def test_missing_assets_dir(tmp_path):
    with pytest.raises(MissingFile):
        load_assets_dir(tmp_path / "empty", LabelRegistry())
    (tmp_path / "empty").mkdir()
    with pytest.raises(MissingFile):
        load_assets_dir(tmp_path / "empty", LabelRegistry())


def test_palette_is_deterministic():
    assert color_for_label(1) == color_for_label(1)
    assert color_for_label(0) != color_for_label(1)
