import json
import math
import xml.dom.minidom

import pytest

import etsp


def unit_square():
    return etsp.euclidean_instance([[0, 0], [1, 0], [1, 1], [0, 1]], "square")


def test_unit_square_length():
    r = json.loads(etsp.solve(unit_square()))
    assert r["schema"] == "result v1"
    assert r["length"] == pytest.approx(4.0)
    assert sorted(r["tour"]) == [0, 1, 2, 3]


def test_solver_matches_held_karp():
    for seed in range(3):
        inst = etsp.gen("uniform", 11, 2, seed)
        r = json.loads(etsp.solve(inst, oracle=True))
        hk, _ = etsp.held_karp(inst)
        assert r["oracle_match"]
        assert math.isclose(r["length"], hk, rel_tol=1e-9)
        assert math.isclose(etsp.tour_length(inst, r["tour"]), r["length"], rel_tol=1e-12)


def test_generators_are_pure():
    a = etsp.gen("clustered", 20, 3, 7)
    b = etsp.gen("clustered", 20, 3, 7)
    assert a.points == b.points
    grid = etsp.gen("grid", 9, 2, 1)
    assert sorted(map(tuple, grid.points)) == [(x, y) for x in (1, 2, 3) for y in (1, 2, 3)]


def test_perturbed_matrix_is_order_preserving():
    inst = etsp.gen("uniform", 9, 2, 4)
    d = etsp.perturb_matrix(inst, 4, 0.5)
    assert etsp.validate_order_preserving(inst, d)
    m = etsp.matrix_instance(inst.points, d)
    r = json.loads(etsp.solve(m))
    assert math.isclose(r["length"], etsp.held_karp(m)[0], rel_tol=1e-9)


def test_separator_is_balanced():
    inst = etsp.gen("uniform", 200, 2, 11)
    s = etsp.separator(inst)
    assert max(s["inside"], s["outside"]) * 17 <= 16 * 200
    assert 1.0 <= s["t_bar"] <= 3.0


def test_file_round_trip(tmp_path):
    inst = etsp.gen("uniform", 7, 3, 2)
    path = str(tmp_path / "i.tsp")
    etsp.write_instance(inst, path)
    assert etsp.read_instance(path).points == inst.points


def test_render_is_xml():
    inst = unit_square()
    svg = etsp.render_svg(inst, etsp.solve(inst))
    doc = xml.dom.minidom.parseString(svg)
    assert len(doc.getElementsByTagName("polygon")) == 1


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        etsp.held_karp(etsp.gen("uniform", 30, 2, 1))
    with pytest.raises(ValueError):
        etsp.read_instance("/nonexistent/file.tsp")
