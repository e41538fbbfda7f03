import csv
import json
import math
import os
import re
from pathlib import Path

import numpy as np
import pytest

from hyperot import io as hio
from hyperot import synthetic
from hyperot.cli import main, planar_target
from hyperot.errors import InputError
from hyperot.lorentz import disk_to_hyperboloid
from hyperot.svg import geodesic_arc, geodesic_path, render_svg

DATA = Path(__file__).parent / "data"


def test_json_round_trip_is_exact(tmp_path, rng):
    vals = rng.normal(size=50) * 10.0 ** rng.integers(-12, 12, 50)
    obj = {"a": vals.tolist(), "b": {"c": [1, 2.0, None, True]}, "nan": float("nan")}
    path = tmp_path / "x.json"
    hio.write_json(path, obj)
    back = hio.read_json(path)
    assert back["a"] == vals.tolist()
    assert back["b"] == {"c": [1, 2.0, None, True]}
    assert back["nan"] is None
    assert hio.dumps(obj) == hio.dumps(obj)


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"sites": [\n  {"x": 0.1, "y": }\n]}')
    with pytest.raises(InputError, match=r"bad.json:2:\d+"):
        hio.read_json(p)


def test_sites_forms():
    pts, h, dom = hio.parse_sites({"sites": [{"x": 0.1, "y": 0.2, "radius": 0.5}, [0.0, -0.3], [0.2, 0.2, 1.0]]})
    np.testing.assert_allclose(pts, [[0.1, 0.2], [0.0, -0.3], [0.2, 0.2]])
    np.testing.assert_allclose(h, [math.log(math.cosh(0.5)), 0.0, math.log(math.cosh(1.0))])
    assert dom is None
    with pytest.raises(InputError):
        hio.parse_sites({"sites": [{"x": 0.1}]})
    with pytest.raises(InputError):
        hio.parse_sites([1, 2])


def test_obj_and_sidecar_round_trip(tmp_path, irregular_mesh):
    obj = tmp_path / "m.obj"
    pos = np.random.default_rng(1).normal(size=(irregular_mesh.n_vertices, 3))
    hio.write_metric_mesh(obj, irregular_mesh, pos)
    back = hio.read_metric_mesh(obj)
    np.testing.assert_array_equal(back.faces, irregular_mesh.faces)
    np.testing.assert_array_equal(back.lengths, irregular_mesh.lengths)
    np.testing.assert_array_equal(back.positions, pos)
    assert back.boundary == irregular_mesh.boundary
    assert back.genus == 2
    os.remove(hio.sidecar_path(obj))
    with pytest.raises(InputError, match="sidecar"):
        hio.read_metric_mesh(obj)


def test_obj_quads_are_split(tmp_path):
    p = tmp_path / "q.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n")
    v, f = hio.read_obj(p)
    assert f.tolist() == [[0, 1, 2], [0, 2, 3]]
    p.write_text("v 0 0 0\nf 1 2 x\n")
    with pytest.raises(InputError, match=":2:"):
        hio.read_obj(p)


def test_geodesic_arc_diameter_and_orthogonality(rng):
    assert geodesic_arc([0.3, 0.3], [-0.5, -0.5]) is None
    assert geodesic_path([[0.3, 0.3], [-0.5, -0.5]]).split()[-3] == "L"
    for _ in range(100):
        a, b = rng.uniform(0, 2 * np.pi, 2)
        if abs(math.sin(a - b)) < 1e-3:
            continue
        z1 = 0.9 * np.array([math.cos(a), math.sin(a)])
        z2 = 0.9 * np.array([math.cos(b), math.sin(b)])
        c, r = geodesic_arc(z1, z2)
        assert np.linalg.norm(c) > 1.0
        # orthogonal circles: |c|^2 = r^2 + 1
        assert abs(c @ c - (r * r + 1.0)) < 1e-9 * (c @ c)
        assert abs(np.linalg.norm(z1 - c) - r) < 1e-9 * r
        assert abs(np.linalg.norm(z2 - c) - r) < 1e-9 * r


def test_svg_is_deterministic():
    dump = {"cells": [{"vertices": [[0.1, 0.1], [0.5, 0.0], [0.2, 0.6]]}], "sites": [[0.2, 0.2]],
            "centroids": [[0.25, 0.2], None]}
    a = render_svg(dump)
    assert a == render_svg(json.loads(json.dumps(dump)))
    assert a.count('class="cell"') == 1
    assert a.count('class="centroid"') == 1
    assert 'class="boundary"' in a


def run(args):
    return main([str(a) for a in args])


def test_hpd_two_sites_draws_one_bisector(tmp_path):
    sites = tmp_path / "two.json"
    hio.write_json(sites, hio.sites_to_dict(np.array([[-0.3, 0.1], [0.3, 0.1]])))
    assert run(["hpd", sites, "--out-dir", tmp_path]) == 0
    dump = hio.read_json(tmp_path / "diagram.json")
    assert [sorted(p) for p in dump["adjacency"]] == [[0, 1]]
    # the shared edge lies on x = 0, a diameter of the disk
    v0 = np.array(dump["cells"][0]["vertices"])
    shared = v0[np.array(dump["cells"][0]["neighbors"]) == 1]
    assert np.abs(shared[:, 0]).max() < 1e-12
    assert (tmp_path / "diagram.svg").exists()


def test_hpd_golden_adjacency(tmp_path):
    assert run(["hpd", DATA / "hex61.json", "--out-dir", tmp_path, "--no-svg"]) == 0
    dump = hio.read_json(tmp_path / "diagram.json")
    gold = hio.read_json(DATA / "hex61_adjacency.json")
    assert len(dump["cells"]) == gold["n_sites"] == 61
    assert sorted(map(sorted, dump["adjacency"])) == gold["adjacency"]
    assert not (tmp_path / "diagram.svg").exists()


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert run(["hpd", bad, "--out-dir", tmp_path]) == 2
    assert run(["hpd", tmp_path / "missing.json", "--out-dir", tmp_path]) == 2
    outside = tmp_path / "out.json"
    hio.write_json(outside, {"sites": [[0.2, 0.0], [1.2, 0.0], [0.0, 0.3]]})
    assert run(["hpd", outside, "--out-dir", tmp_path]) == 2
    dup = tmp_path / "dup.json"
    hio.write_json(dup, {"sites": [[0.2, 0.0], [0.2, 0.0], [0.0, 0.3], [-0.2, -0.1]]})
    assert run(["hpd", dup, "--out-dir", tmp_path]) == 3
    assert run(["solve", DATA / "hex61.json", "--lambda0", "1.5"]) == 2
    assert run(["bogus"]) == 2


def test_solve_writes_outputs(tmp_path):
    assert run(["solve", DATA / "hex61.json", "--out-dir", tmp_path]) == 0
    with open(tmp_path / "convergence.csv") as fh:
        rows = list(csv.reader(fh))
    assert ",".join(rows[0]) == "iter,lambda,residual_inf,residual_l2,energy,millis"
    assert float(rows[-1][2]) < 1e-6
    dump = hio.read_json(tmp_path / "map.json")
    assert dump["target_mode"] == "euclidean-face-area"
    assert len(dump["centroids"]) == 61
    after = (tmp_path / "after.svg").read_text()
    assert after.count('class="cell"') == 61
    assert after.count('class="centroid"') == 61
    assert "#1f4fd8" in after and "#1a9a2a" in after
    assert (tmp_path / "before.svg").exists()
    # the render subcommand reproduces the SVG from the dump
    assert run(["render", tmp_path / "map.json", "-o", tmp_path / "again.svg"]) == 0
    assert (tmp_path / "again.svg").read_text() == after


def test_solve_nonconvergence_keeps_csv(tmp_path):
    assert run(["solve", DATA / "hex61.json", "--out-dir", tmp_path, "--max-iters", "2"]) == 4
    with open(tmp_path / "convergence.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 4


def test_solve_target_file(tmp_path):
    target = tmp_path / "t.json"
    hio.write_json(target, {"masses": [1.0] * 61})
    assert run(["solve", DATA / "hex61.json", target, "--out-dir", tmp_path]) == 0
    dump = hio.read_json(tmp_path / "map.json")
    assert dump["target_mode"] == "file"
    np.testing.assert_allclose(dump["target"], dump["target"][0], rtol=1e-14)
    hio.write_json(target, {"masses": [1.0] * 60})
    assert run(["solve", DATA / "hex61.json", target, "--out-dir", tmp_path]) == 2


def test_planar_target_modes():
    x = disk_to_hyperboloid(hio.read_sites(DATA / "hex61.json")[0])
    e = planar_target(x, "euclidean-face-area")
    h = planar_target(x, "hyperbolic-face-area")
    assert np.all(e > 0) and np.all(h > 0)
    # the centre sits where the disk is least stretched, so its share drops
    assert h[0] / h.sum() < e[0] / e.sum()
    np.testing.assert_array_equal(planar_target(x, "uniform"), np.ones(61))


def test_outputs_are_reproducible(tmp_path):
    for k in (1, 2):
        assert run(["solve", DATA / "hex61.json", "--out-dir", tmp_path / str(k), "--seed", "7"]) == 0
    for name in ("map.json", "after.svg", "before.svg"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


@pytest.fixture(scope="module")
def octagon_files(tmp_path_factory, octagon_mesh):
    d = tmp_path_factory.mktemp("oct")
    obj = d / "oct.obj"
    hio.write_metric_mesh(obj, octagon_mesh)
    return d, obj


def test_parametrize_command(octagon_files, tmp_path):
    _, obj = octagon_files
    assert run(["parametrize", obj, "--out-dir", tmp_path, "--target-mode", "uniform"]) == 0
    svg = (tmp_path / "domain.svg").read_text()
    assert len(re.findall(r'class="side"', svg)) == 8
    res = hio.read_json(tmp_path / "parametrization.json")
    assert len(res["vertices"]) == 62
    rel = [abs(v["omega"] - v["nu"]) / v["nu"] for v in res["vertices"]]
    assert max(rel) < 1e-6
    with open(tmp_path / "convergence.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    res_inf = [float(r[2]) for r in rows]
    assert all(b < a for a, b in zip(res_inf, res_inf[1:]))
    v, f = hio.read_obj(tmp_path / "oct_uv.obj")
    assert len(f) == len(synthetic.regular_surface(2, 4).faces)
    assert (tmp_path / "oct_uv.obj").read_text().count("\nvt ") == 62
    tiled = (tmp_path / "tiled.svg").read_text()
    assert tiled.count('class="tile"') > 0


def test_parametrize_missing_inputs(octagon_files, tmp_path):
    d, obj = octagon_files
    assert run(["parametrize", d / "nothing.obj", "--out-dir", tmp_path]) == 2
    lone = tmp_path / "lone.obj"
    lone.write_text(obj.read_text())
    assert run(["parametrize", lone, "--out-dir", tmp_path]) == 2
    # euclidean areas need real 3-d positions; the synthetic file has none
    assert run(["parametrize", obj, "--out-dir", tmp_path, "--target-mode", "euclidean-face-area"]) != 0
