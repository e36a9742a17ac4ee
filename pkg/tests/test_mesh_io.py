import numpy as np
import pytest

from conftest import make_icosphere, make_tetrahedron
from polynet import EmptyMeshError, MeshParseError
from polynet.mesh import load_mesh, save_mesh


def test_off_round_trip_is_bit_exact(tmp_path):
    mesh = make_icosphere(1)
    path = str(tmp_path / "m.off")
    save_mesh(mesh, path)
    back = load_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.faces, mesh.faces)


def test_obj_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    mesh = make_icosphere(1).with_vertices(
        make_icosphere(1).vertices * rng.uniform(0.5, 2.0, (1, 3))
    )
    path = str(tmp_path / "m.obj")
    save_mesh(mesh, path)
    back = load_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.faces, mesh.faces)


def test_off_header_with_counts_on_same_line(tmp_path):
    path = tmp_path / "m.off"
    path.write_text("OFF 3 1 3\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    mesh = load_mesh(str(path))
    assert mesh.n_vertices == 3 and mesh.n_faces == 1


def test_off_comments_and_blank_lines(tmp_path):
    path = tmp_path / "m.off"
    path.write_text(
        "# a comment\nOFF\n\n3 1 0  # trailing comment\n0 0 0\n1 0 0\n\n0 1 0\n3 0 1 2\n"
    )
    mesh = load_mesh(str(path))
    assert mesh.n_vertices == 3 and mesh.n_faces == 1


def test_off_quad_is_fan_triangulated(tmp_path):
    path = tmp_path / "m.off"
    path.write_text(
        "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
    )
    mesh = load_mesh(str(path))
    assert mesh.n_faces == 2
    assert mesh.faces.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_obj_slash_tokens_and_negative_indices(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text(
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
        "vn 0 0 1\nvt 0 0\n"
        "f 1/1/1 2/2/1 3/3/1\n"
        "f -4 -2 -1\n"
    )
    mesh = load_mesh(str(path))
    assert mesh.faces.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_obj_polygon_fan(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text(
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv -1 1 0\nf 1 2 3 4 5\n"
    )
    mesh = load_mesh(str(path))
    assert mesh.faces.tolist() == [[0, 1, 2], [0, 2, 3], [0, 3, 4]]


def test_off_missing_header_reports_line():
    import tempfile, os

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "m.off")
        with open(path, "w") as fh:
            fh.write("NOT_A_HEADER\n")
        with pytest.raises(MeshParseError, match="line 1"):
            load_mesh(path)


def test_off_bad_vertex_reports_line(tmp_path):
    path = tmp_path / "m.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 zero 0\n0 1 0\n3 0 1 2\n")
    with pytest.raises(MeshParseError, match="line 4"):
        load_mesh(str(path))


def test_off_face_index_out_of_range_reports_line(tmp_path):
    path = tmp_path / "m.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n")
    with pytest.raises(MeshParseError, match="out of range"):
        load_mesh(str(path))


def test_off_truncated_file(tmp_path):
    path = tmp_path / "m.off"
    path.write_text("OFF\n5 2 0\n0 0 0\n1 0 0\n")
    with pytest.raises(MeshParseError, match="ended after"):
        load_mesh(str(path))


def test_obj_bad_index_reports_line(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
    with pytest.raises(MeshParseError, match="line 4"):
        load_mesh(str(path))


def test_empty_mesh_raises(tmp_path):
    path = tmp_path / "m.off"
    path.write_text("OFF\n0 0 0\n")
    with pytest.raises(EmptyMeshError):
        load_mesh(str(path))


def test_unsupported_format(tmp_path):
    path = tmp_path / "m.stl"
    path.write_text("solid\n")
    with pytest.raises(MeshParseError, match="unsupported"):
        load_mesh(str(path))


def test_format_override(tmp_path):
    path = tmp_path / "mesh.dat"
    save_mesh(make_tetrahedron(), str(path), fmt="off")
    mesh = load_mesh(str(path), fmt="off")
    assert mesh.n_vertices == 4


def test_degenerate_face_dropped_on_load(tmp_path):
    # a face that repeats an index encodes zero area; the loader skips it
    path = tmp_path / "m.off"
    path.write_text("OFF\n3 2 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n3 0 1 1\n")
    mesh = load_mesh(str(path))
    assert mesh.n_faces == 1
