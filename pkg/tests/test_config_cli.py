import copy
import json

import pytest

from fermijet.catalog import CATALOG, catalog, default_cases, get_case
from fermijet.cli import main
from fermijet.config import CaseConfig, ConfigError, RunConfig, load_config
from fermijet.pipeline import records_csv, records_json, run

GOOD = {
    "name": "custom-circle",
    "type": [[1, 0], [1, 0]],
    "coords": ["x", "y"],
    "metric": [["1", "0"], ["0", "1"]],
    "params": ["t"],
    "submanifold": ["cos(t)", "sin(t)"],
    "base": [0.0],
}


def mutate(**changes):
    d = copy.deepcopy(GOOD)
    for key, val in changes.items():
        if val is None:
            d.pop(key)
        else:
            d[key] = val
    return d


NEGATIVE = [
    mutate(type=[[1, 0], [2, 0]]),                      # n = 3 but two coordinates
    mutate(type=[[2, 0], [0, 0]]),                      # k = n
    mutate(type=[[0, 0], [2, 0]]),                      # k = 0
    mutate(type=[[1, 0]]),                              # malformed type
    mutate(type=[[1, -1], [1, 0]]),                     # negative count
    mutate(coords=["x", "x"]),                          # duplicate coordinate
    mutate(params=["t", "s"]),                          # k mismatch
    mutate(base=[0.0, 1.0]),                            # base length
    mutate(metric=[["1", "0"]]),                        # wrong rows
    mutate(metric=[["1", "0", "0"], ["0", "1", "0"]]),  # wrong columns
    mutate(metric=[["1", "x"], ["0", "1"]]),            # asymmetric
    mutate(metric=[["1", "0"], ["0", "1 +"]]),          # syntax error
    mutate(metric=[["1", "0"], ["0", "z^2"]]),          # unknown identifier
    mutate(submanifold=["cos(t)"]),                     # too few embedding maps
    mutate(submanifold=["cos(t)", "sin(x)"]),           # coordinate used as parameter
    mutate(constants={"t": 1.0}),                       # constant shadows a parameter
    mutate(base=None),                                  # missing field
    mutate(colour="red"),                               # unknown field
]


@pytest.mark.parametrize("bad", NEGATIVE)
def test_validation_rejects(bad):
    with pytest.raises(ConfigError):
        load_config(bad)


def test_run_config_ranges():
    for kw in ({"order": 1}, {"order": 6}, {"format": "xml"}, {"tol": -1.0}, {"bogus": 1}):
        with pytest.raises(ConfigError):
            load_config({**GOOD, **kw})
    with pytest.raises(ConfigError):
        load_config({**GOOD, "solver": {"steps_per_unit": 2}})
    with pytest.raises(ConfigError):
        load_config({"cases": []})
    with pytest.raises(ConfigError):
        load_config({"cases": ["no-such-case"]})
    with pytest.raises(ConfigError):
        load_config({"cases": [{"catalog": "graph-quadratic", "args": {"lambda": 1}}]})


def test_catalog_contents():
    names = [label.split("(")[0] for label, _ in catalog()]
    for required in ("flat-affine", "circle-in-plane", "sphere2-in-r3", "graph-quadratic",
                     "eps-perturbed-flat", "minkowski-spacelike-line", "minkowski-timelike-line",
                     "greatcircle-in-s3"):
        assert required in names
    assert all(desc for _, desc in catalog())


@pytest.mark.parametrize("case", default_cases(), ids=lambda c: c.name)
def test_catalog_round_trips_through_run_config(case):
    cfg = RunConfig([case], order=3, seed=5)
    again = load_config(json.loads(cfg.dumps()))
    assert again.to_dict() == cfg.to_dict()
    assert again.cases[0] == case


def test_catalog_seed_reaches_random_cases():
    a = load_config({"cases": ["eps-perturbed-flat"], "seed": 1}).cases[0]
    b = get_case("eps-perturbed-flat", seed=1)
    assert a == b and a != get_case("eps-perturbed-flat", seed=2)


# -- pipeline and CLI ---------------------------------------------------------------

def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_run_examples():
    cfg = load_config({"cases": [{"catalog": "flat-affine", "args": {"type": [[2, 0], [1, 0]]}},
                                 "circle-in-plane", "minkowski-spacelike-line"]})
    recs = {r.case: r for r in run(cfg)}
    flat = recs["flat-affine(20|10)"]
    assert flat.passed and max(flat.conditions["residuals"].values()) <= 1e-10
    assert flat.loop_deviation <= 1e-10 and flat.gauss <= 1e-10
    circ = recs["circle-in-plane"]
    assert circ.checks["first_order"] and circ.loop_deviation <= 1e-6
    assert recs["minkowski-spacelike-line"].passed
    assert list(recs) == sorted(recs)


def test_failing_case_is_recorded_and_run_continues():
    broken = mutate(name="wrong-signature", metric=[["-1", "0"], ["0", "-1"]])
    cfg = load_config({"cases": [broken, "circle-in-plane"]})
    recs = run(cfg, ("conditions",))
    assert [r.case for r in recs] == ["circle-in-plane", "wrong-signature"]
    assert recs[0].passed and not recs[1].passed and "GeometryError" in recs[1].error
    assert "error" in records_csv(recs)


def test_exit_codes(tmp_path, capsys):
    good = write(tmp_path, {"cases": ["circle-in-plane"], "order": 3})
    assert main(["verify", good]) == 0
    sphere = write(tmp_path, {"cases": ["sphere2-in-r3"], "order": 3}, "s.json")
    assert main(["verify", sphere, "--tol", "1e-300"]) == 1
    assert main(["verify", write(tmp_path, mutate(type=[[2, 0], [1, 0]]), "bad.json")]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["run", str(tmp_path / "junk.json")]) == 2
    assert main(["run", good, "--order", "9"]) == 2
    capsys.readouterr()


def test_reports_are_byte_identical(tmp_path):
    cfg = write(tmp_path, {"cases": ["graph-family", {"catalog": "eps-perturbed-flat"}, "circle-in-plane"],
                           "order": 3, "seed": 3})
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["run", cfg, "--out", str(out), "--format", "both"]) == 0
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert set(outs[0]) == {"report.csv", "report.json"}
    assert outs[0] == outs[1]
    doc = json.loads(outs[0]["report.json"])
    assert doc["schema_version"] == 1 and doc["passed"]
    assert [r["case"] for r in doc["records"]] == sorted(r["case"] for r in doc["records"])
    header = outs[0]["report.csv"].decode().splitlines()[0]
    assert header == "case,check,i,j,K,row,measured,predicted,deviation,tolerance,pass"


def test_other_subcommands(tmp_path, capsys):
    cfg = write(tmp_path, {"cases": ["circle-in-plane"], "order": 2})
    assert main(["catalog"]) == 0
    assert "sphere2-in-r3" in capsys.readouterr().out
    assert main(["catalog", "--format", "json"]) == 0
    assert any(e["name"] == "flat-affine(type)" for e in json.loads(capsys.readouterr().out))
    assert main(["taylor", cfg]) == 0
    lines = capsys.readouterr().out.splitlines()
    row = [l for l in lines if l.startswith("circle-in-plane,0,0,0-1,")][0]
    assert float(row.split(",")[-1]) == pytest.approx(2.0, abs=1e-9)
    assert main(["predict", cfg]) == 0
    row = [l for l in capsys.readouterr().out.splitlines() if l.startswith("circle-in-plane,0,0,0-1,")][0]
    assert row.split(",")[4] == "4" and float(row.split(",")[5]) == pytest.approx(2.0)
    assert main(["loop", cfg, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["records"][0]["loop_deviation"] <= 1e-6
    out = tmp_path / "t"
    assert main(["taylor", cfg, "--out", str(out)]) == 0 and (out / "taylor.csv").exists()


def test_records_json_excludes_timing_by_default():
    cfg = load_config({"cases": ["circle-in-plane"], "order": 2})
    recs = run(cfg, ("conditions",))
    assert "timing" not in records_json(recs)
    assert "timing" in records_json(recs, with_timing=True)
