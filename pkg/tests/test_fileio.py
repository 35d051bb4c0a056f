import numpy as np
import pytest

from meshshape.errors import NotPure, ParseError
from meshshape.fileio import read_mesh, write_mesh, write_svg
from meshshape.mesh import make_disc_mesh


def test_round_trip(tmp_path, square5):
    cx, q = square5
    path = tmp_path / "m.mesh"
    write_mesh(path, cx, q)
    rcx, rq = read_mesh(path)
    assert np.array_equal(rcx.triangles, cx.triangles)
    assert np.max(np.abs(rq - q)) <= 1e-15


def test_round_trip_full_precision(tmp_path):
    cx, q = make_disc_mesh(3)
    path = tmp_path / "m.mesh"
    write_mesh(path, cx, q)
    _, rq = read_mesh(path)
    assert np.array_equal(rq, q)  # repr round-trips doubles exactly


def test_comments_and_blank_lines(tmp_path):
    path = tmp_path / "m.mesh"
    path.write_text("# comment\n3 1\n0 0\n\n1 0\n0 1\n# another\n0 1 2\n")
    cx, q = read_mesh(path)
    assert cx.num_triangles == 1


def test_index_out_of_range(tmp_path):
    path = tmp_path / "m.mesh"
    path.write_text("3 1\n0 0\n1 0\n0 1\n0 1 3\n")
    with pytest.raises(ParseError):
        read_mesh(path)


def test_wrong_counts(tmp_path):
    path = tmp_path / "m.mesh"
    path.write_text("3 2\n0 0\n1 0\n0 1\n0 1 2\n")
    with pytest.raises(ParseError):
        read_mesh(path)


def test_bad_number(tmp_path):
    path = tmp_path / "m.mesh"
    path.write_text("3 1\n0 zero\n1 0\n0 1\n0 1 2\n")
    with pytest.raises(ParseError):
        read_mesh(path)


def test_empty_triangle_section(tmp_path):
    path = tmp_path / "m.mesh"
    path.write_text("3 0\n0 0\n1 0\n0 1\n")
    with pytest.raises(NotPure):
        read_mesh(path)


def test_svg_output(tmp_path, square5):
    cx, q = square5
    path = tmp_path / "m.svg"
    write_svg(path, cx, q)
    text = path.read_text()
    assert text.count("<line") == cx.num_edges
    assert "viewBox" in text
