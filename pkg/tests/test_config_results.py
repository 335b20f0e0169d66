import json
import math
import os

import pytest
from hypothesis import given, settings, strategies as st

from toruswalk.config import (ConfigError, ExperimentConfig, load_config, parse_config_text,
                              parse_walk)
from toruswalk.results import (ExperimentResult, Metric, existing_result, metrics_from_csv,
                               metrics_from_json, metrics_to_csv, write_result)


def test_parse_walk():
    assert parse_walk("srw").name == "srw"
    assert parse_walk("lazy:0.25").c == pytest.approx(0.375)
    assert parse_walk("poisson:0.3:3").name == "poisson:0.3:3"
    for bad in ("levy", "lazy:x", "poisson:0.3:4", "srw:1"):
        with pytest.raises(ConfigError):
            parse_walk(bad)


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# cover run\nexperiment = cover\nK_list = 16, 32\ntrials = 7  # few\n"
                 "tol.band_hi = 1.5\nwalk = lazy:0.5\n")
    c = load_config(p, {"trials": "9", "seed": 4})
    assert c.K_list == (16, 32)
    assert c.trials == 9 and c.seed == 4
    assert c.tolerances == {"band_hi": 1.5}
    assert c.dist().c == pytest.approx(0.25)


@pytest.mark.parametrize("text,lineno", [("trials = 3\nbogus = 1\n", 2), ("K 64\n", 1),
                                         ("= 4\n", 1), ("tolerances = 1\n", 1)])
def test_config_errors_carry_line_numbers(text, lineno):
    with pytest.raises(ConfigError, match=f":{lineno}:"):
        parse_config_text(text, "x.cfg")


def test_config_bad_values():
    with pytest.raises(ConfigError):
        load_config(None, {"trials": "many"})
    with pytest.raises(ConfigError):
        load_config(None, {"trials": 0})
    with pytest.raises(ConfigError):
        load_config(None, {"unknown": 1})


def test_hash_ignores_parallelism_and_output():
    a = load_config(None, {"workers": 1, "out": "a"})
    b = load_config(None, {"workers": 8, "out": "b"})
    assert a.hash() == b.hash()
    assert a.hash() != load_config(None, {"seed": 1}).hash()
    assert "workers" not in a.payload_dict() and "out" not in a.payload_dict()


def test_out_default_from_environment(monkeypatch):
    monkeypatch.setenv("TORUSWALK_OUT", "/tmp/elsewhere")
    assert ExperimentConfig().out == "/tmp/elsewhere"


def test_metric_verdict_from_band():
    assert Metric("x", 1.0, lo=0.5, hi=1.5).passed is True
    assert Metric("x", 2.0, hi=1.5).passed is False
    assert Metric("x", math.nan, lo=0.0).passed is False
    assert Metric("x", 2.0).passed is None
    with pytest.raises(ValueError):
        Metric("x", 1.0, stderr=-1.0)


finite = st.floats(allow_nan=False, allow_infinity=True, width=64)
metrics_st = st.lists(st.builds(
    Metric, st.text("abcdefgh_0123456789", min_size=1, max_size=12), finite,
    st.floats(0, 1e300), st.integers(1, 10**9), st.integers(0, 10**6),
    st.one_of(st.none(), finite), st.one_of(st.none(), finite)), max_size=8)


@settings(max_examples=150, deadline=None)
@given(metrics_st)
def test_csv_json_round_trip(metrics):
    via_csv = metrics_from_csv(metrics_to_csv(metrics))
    payload = json.loads(json.dumps({"metrics": [m.to_json() for m in metrics]}))
    via_json = metrics_from_json(payload)
    assert via_csv == metrics
    assert via_json == metrics
    assert metrics_to_csv(via_json) == metrics_to_csv(metrics)


def test_write_result_layout(tmp_path):
    c = load_config(None, {"experiment": "cover"})
    res = ExperimentResult("cover", c.payload_dict(), [Metric("m", 0.1 + 0.2, 0.0, 3, 0, hi=1.0)],
                           {"curve": [(1, 2.0, 0.5)]}, {}, c.hash())
    d = write_result(res, str(tmp_path), ["simulate", "cover"], 0, 1)
    assert d == os.path.join(str(tmp_path), "cover", c.hash())
    for name in ("metrics.json", "summary.csv", "manifest.json", os.path.join("plotdata", "curve.dat")):
        assert os.path.exists(os.path.join(d, name))
    payload = json.loads(open(os.path.join(d, "metrics.json")).read())
    assert set(payload) >= {"experiment", "config", "metrics", "pass"}
    assert payload["metrics"][0]["estimate"] == 0.1 + 0.2  # full precision
    assert "timestamp" not in open(os.path.join(d, "metrics.json")).read()
    manifest = json.loads(open(os.path.join(d, "manifest.json")).read())
    assert manifest["seed"] == 0 and "timestamp" in manifest and manifest["config"] == json.loads(json.dumps(c.payload_dict()))
    assert open(os.path.join(d, "plotdata", "curve.dat")).read() == "# x y stderr\n1.0 2.0 0.5\n"
    assert existing_result(str(tmp_path), "cover", c.hash())
    assert existing_result(str(tmp_path), "cover", "0" * 16) is None
