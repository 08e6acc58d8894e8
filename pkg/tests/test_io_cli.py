import json
import math
import xml.dom.minidom

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clams import cli
from clams.ambiguity import clams_score
from clams.datagen import blob_scene, generate_scene
from clams.errors import ParseError
from clams.gmm import GmmFitConfig
from clams.io import (
    dumps,
    format_float,
    read_highdim_csv,
    read_labels_csv,
    read_points_csv,
    read_points_json,
    write_labels_csv,
    write_points_csv,
)
from clams.separability import save_model
from clams.svg import render_report


@pytest.fixture(scope="module")
def model_path(tmp_path_factory, model):
    path = tmp_path_factory.mktemp("model") / "m.json"
    save_model(model, path)
    return path


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_points_csv_round_trip(tmp_path):
    pts = np.array([[0.1, 2.0], [3.0, -4.5], [1e-9, 7.0]])
    write_points_csv(pts, tmp_path / "p.csv")
    plot = read_points_csv(tmp_path / "p.csv")
    assert np.array_equal(plot.points, pts) and plot.id == "p"


def test_points_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n3,oops\n")
    with pytest.raises(ParseError) as info:
        read_points_csv(bad)
    assert info.value.line == 3 and "bad.csv:3" in str(info.value)
    bad.write_text("a,b\n1,2\n3,4\n")
    with pytest.raises(ParseError):
        read_points_csv(bad)
    bad.write_text("x,y\n1,2\n3,nan\n")
    with pytest.raises(ParseError):
        read_points_csv(bad)


def test_points_json(tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"id": "demo", "points": [[0, 0], [1, 2.5]]}))
    plot = read_points_json(p)
    assert plot.id == "demo" and plot.n == 2
    p.write_text('{"id": "x", "points": [[0, "a"]]}')
    with pytest.raises(ParseError):
        read_points_json(p)
    p.write_text('{"id": ')
    with pytest.raises(ParseError):
        read_points_json(p)


def test_labels_round_trip(tmp_path):
    _, labels = generate_scene(blob_scene([(0, 0), (5, 5)], 1.0, 20))
    write_labels_csv(labels, tmp_path / "l.csv")
    assert np.array_equal(read_labels_csv(tmp_path / "l.csv").labels, labels.labels)
    (tmp_path / "b.csv").write_text("label\n0\n-3\n")
    with pytest.raises(ParseError):
        read_labels_csv(tmp_path / "b.csv")


def test_highdim_csv(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b,c\n1,2,3\n4,5,6\n7,8,9\n")
    assert read_highdim_csv(p).shape == (3, 3)
    p.write_text("1,2,3\n4,5,6\n7,8,9\n")
    assert read_highdim_csv(p).shape == (3, 3)
    p.write_text("1,2,3\n4,5\n7,8,9\n")
    with pytest.raises(ParseError):
        read_highdim_csv(p)


@given(st.floats(allow_nan=False))
def test_format_float_twelve_digits(v):
    text = format_float(v)
    if math.isinf(v):
        assert text in ("inf", "-inf")
    else:
        assert float(text) == float(f"{v:.12g}")


def test_dumps_stable():
    obj = {"b": [1.0 / 3.0, math.inf], "a": np.float64(2.0), "c": (np.int64(3),)}
    text = dumps(obj)
    assert text == '{"a":2.0,"b":[0.333333333333,"inf"],"c":[3]}\n'


def test_svg_valid_with_two_ellipses_per_component(model):
    plot, _ = generate_scene(blob_scene([(0, 0), (8, 0), (0, 8)], 1.0, 100, seed=1))
    report = clams_score(plot, model, GmmFitConfig(k_max=5, restarts=2))
    doc = xml.dom.minidom.parseString(render_report(plot, report))
    svg = doc.documentElement
    assert svg.tagName == "svg" and svg.getAttribute("version") == "1.1"
    assert doc.doctype is not None and "SVG 1.1" in doc.doctype.publicId
    ellipses = doc.getElementsByTagName("ellipse")
    k = report.decomposition.k_opt
    assert len(ellipses) == 2 * k
    for j in range(k):
        mine = [e for e in ellipses if e.getAttribute("data-component") == str(j)]
        assert sorted(e.getAttribute("class") for e in mine) == ["sigma1", "sigma2"]
    assert len(doc.getElementsByTagName("text")) == len(report.pairs) + 1


def _scene_dir(tmp_path, n):
    d = tmp_path / "plots"
    d.mkdir()
    for i in range(n):
        plot, _ = generate_scene(blob_scene([(0, 0), (6, 0)], 1.0, 40, seed=i))
        write_points_csv(plot.points, d / f"p{i:02d}.csv")
    return d


def test_cli_score_single_and_batch(tmp_path, model_path, capsys):
    d = _scene_dir(tmp_path, 10)
    code, out, _ = run(["score", d / "p00.csv", "--model", model_path, "--k-max", "5"], capsys)
    assert code == 0
    single = json.loads(out)
    assert 0.0 <= single["score"] <= 1.0 and single["file"] == "p00.csv"
    code, out, _ = run(["score", d, "--model", model_path, "--k-max", "5", "--svg", tmp_path / "svg"], capsys)
    reports = json.loads(out)["reports"]
    assert [r["file"] for r in reports] == [f"p{i:02d}.csv" for i in range(10)]
    assert reports[0] == single  # per-file seeding: same result alone or in a batch
    assert len(list((tmp_path / "svg").glob("*.svg"))) == 10


def test_cli_exit_codes(tmp_path, model_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0,0\n1,zz\n")
    code, _, err = run(["score", bad, "--model", model_path], capsys)
    assert code == 2 and "bad.csv:3" in err
    with pytest.raises(SystemExit) as info:
        cli.main(["score", str(bad)])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["train", "--model-out", str(tmp_path / "m.json")])
    assert info.value.code == 1
    code, _, _ = run(["score", bad, "--model", tmp_path / "missing.json"], capsys)
    assert code == 2
    same = tmp_path / "same.csv"
    same.write_text("x,y\n1,1\n1,1\n1,1\n")
    code, _, err = run(["bench", _manifest(tmp_path, [same, same]), "--budget", "2"], capsys)
    assert code == 3


def _manifest(tmp_path, paths, group="g"):
    m = tmp_path / "manifest.csv"
    m.write_text("path,group\n" + "".join(f"{p},{group}\n" for p in paths))
    return m


def test_cli_version(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--version"])
    assert info.value.code == 0
    assert "model format 1" in capsys.readouterr().out


def test_cli_train_synthetic_refit(tmp_path, capsys):
    argv = ["train", "--synthetic", "30", "--mc-samples", "200", "--n-trees", "5", "--cv-folds", "2"]
    _, plain, _ = run([*argv, "--model-out", tmp_path / "a.json"], capsys)
    code, refit, _ = run([*argv, "--refit", "--model-out", tmp_path / "b.json"], capsys)
    assert code == 0 and json.loads(refit)["training_meta"]["rows"] == 30
    # fitted features differ from generating ones, so the models differ
    assert (tmp_path / "a.json").read_bytes() != (tmp_path / "b.json").read_bytes()


def test_cli_generate_train_ground_truth(tmp_path, capsys):
    code, out, _ = run(["generate", "pairs", "--n", "30", "--mc-samples", "200", "--out", tmp_path / "g"], capsys)
    assert code == 0 and json.loads(out)["files"][0] == "pairs_params.csv"
    g = tmp_path / "g"
    code, out, _ = run(["train", "--clustme", g / "pairs_params.csv", g / "pairs_scores.csv", "--n-trees", "10",
                        "--model-out", tmp_path / "m.json"], capsys)
    assert code == 0 and json.loads(out)["training_meta"]["provenance"] == "clustme"
    code, out, _ = run(["ablate", "--data", g / "training.csv", "--n-trees", "5", "--cv-folds", "2",
                        "--csv", tmp_path / "abl.csv"], capsys)
    assert code == 0 and len(json.loads(out)["ablation"]) == 22
    assert (tmp_path / "abl.csv").read_text().startswith("removed,r2,change_percent\nnone,")

    gt = tmp_path / "gt"
    for name, second in (("agree", [0, 0, 1, 1]), ("split", [0, 1, 0, 1])):
        (gt / name).mkdir(parents=True)
        (gt / name / "o1.csv").write_text("label\n0\n0\n1\n1\n")
        (gt / name / "o2.csv").write_text("label\n" + "".join(f"{v}\n" for v in second))
    code, out, _ = run(["ground-truth", gt, "--evm", "arand", "--ranking", tmp_path / "rank.csv"], capsys)
    res = json.loads(out)
    assert res["agree"]["arand"] == 0.0 and res["split"]["arand"] == 1.0
    assert (tmp_path / "rank.csv").read_text().splitlines()[1].startswith("1,split,")
