"""Experiment results: metrics, JSON/CSV persistence and round-tripping."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field

from . import __version__

CSV_FIELDS = ["metric", "estimate", "stderr", "trials", "censored", "lo", "hi", "passed"]


def _num(x):
    """JSON-safe float: non-finite values become strings."""
    if x is None:
        return None
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def _unnum(x):
    if x is None or x == "":
        return None
    return float(x)


@dataclass
class Metric:
    name: str
    estimate: float
    stderr: float = 0.0
    trials: int = 1
    censored: int = 0
    lo: float | None = None  # declared tolerance band, None = unbounded side
    hi: float | None = None
    passed: bool | None = None  # None = informational

    def __post_init__(self):
        # counts and rates share one numeric type so CSV and JSON agree textually
        self.estimate = float(self.estimate)
        if self.stderr is not None and self.stderr < 0:
            raise ValueError("stderr must be non-negative")
        if self.passed is None and (self.lo is not None or self.hi is not None):
            est = self.estimate
            self.passed = bool(est == est
                               and (self.lo is None or est >= self.lo)
                               and (self.hi is None or est <= self.hi))

    def to_json(self):
        d = asdict(self)
        for k in ("estimate", "stderr", "lo", "hi"):
            d[k] = _num(d[k])
        return d


@dataclass
class ExperimentResult:
    experiment: str
    config: dict
    metrics: list
    series: dict = field(default_factory=dict)  # name -> [(x, y, stderr)]
    details: dict = field(default_factory=dict)
    config_hash: str = ""
    code_version: str = __version__

    def metric(self, name):
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    @property
    def failures(self):
        return [m.name for m in self.metrics if m.passed is False]

    @property
    def passed(self):
        return not self.failures

    def payload(self):
        """Deterministic content: no timestamps, no parallelism settings."""
        return {
            "experiment": self.experiment,
            "config": self.config,
            "metrics": [m.to_json() for m in self.metrics],
            "pass": [{"metric": m.name, "passed": m.passed} for m in self.metrics
                     if m.passed is not None],
            "series": {k: [[_num(v) for v in row] for row in rows]
                       for k, rows in sorted(self.series.items())},
            "details": self.details,
            "provenance": {"config_hash": self.config_hash, "code_version": self.code_version},
        }

    def to_json(self):
        return json.dumps(self.payload(), indent=2, sort_keys=True, default=_default) + "\n"

    def to_csv(self):
        return metrics_to_csv(self.metrics)


def _default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(_num(x))
    return str(x)


def metrics_to_csv(metrics):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for m in metrics:
        w.writerow([_fmt(getattr(m, "name" if f == "metric" else f)) for f in CSV_FIELDS])
    return buf.getvalue()


def metrics_from_csv(text):
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        passed = {"true": True, "false": False, "": None}[row["passed"]]
        out.append(Metric(row["metric"], _unnum(row["estimate"]), _unnum(row["stderr"]),
                          int(row["trials"]), int(row["censored"]), _unnum(row["lo"]),
                          _unnum(row["hi"]), passed))
    return out


def metrics_from_json(payload):
    return [Metric(d["name"], _unnum(d["estimate"]), _unnum(d["stderr"]), d["trials"],
                   d["censored"], _unnum(d["lo"]), _unnum(d["hi"]), d["passed"])
            for d in payload["metrics"]]


def result_dir(out_root, experiment, config_hash):
    return os.path.join(out_root, experiment, config_hash)


def write_result(result: ExperimentResult, out_root, argv=None, seed=None, workers=None):
    d = result_dir(out_root, result.experiment, result.config_hash)
    os.makedirs(os.path.join(d, "plotdata"), exist_ok=True)
    with open(os.path.join(d, "metrics.json"), "w") as fh:
        fh.write(result.to_json())
    with open(os.path.join(d, "summary.csv"), "w") as fh:
        fh.write(result.to_csv())
    for name, rows in sorted(result.series.items()):
        with open(os.path.join(d, "plotdata", f"{name}.dat"), "w") as fh:
            fh.write("# x y stderr\n")
            for x, y, se in rows:
                fh.write(f"{_fmt(float(x))} {_fmt(float(y))} {_fmt(float(se))}\n")
    manifest = {
        "experiment": result.experiment,
        "config": result.config,
        "seed": seed,
        "workers": workers,
        "argv": list(argv) if argv is not None else None,
        "code_version": result.code_version,
        "config_hash": result.config_hash,
        "python": platform.python_version(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(os.path.join(d, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")
    return d


def existing_result(out_root, experiment, config_hash):
    p = os.path.join(result_dir(out_root, experiment, config_hash), "metrics.json")
    return p if os.path.exists(p) else None
