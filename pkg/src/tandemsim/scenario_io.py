"""Scenario files (JSON) and report serialization (JSON and CSV)."""

from __future__ import annotations

import csv
import io
import json
import math

from .metrics import CRITERIA, CriteriaRecord
from .model import Issue, RunReport, Scenario, ValidationError, validate
from .variates import Constant, Erlang, ExplicitList, Exponential, Uniform

SCENARIO_KEYS = {"stations", "customers", "mode", "capacities", "seed", "sources", "workers", "trace"}
REQUIRED_KEYS = {"stations", "customers", "mode", "sources"}
DISTRIBUTIONS = {
    "constant": (Constant, ("value",)),
    "exponential": (Exponential, ("rate",)),
    "uniform": (Uniform, ("low", "high")),
    "erlang": (Erlang, ("shape", "rate")),
}
CSV_COLUMNS = ["station", *CRITERIA, "D_K"]


def parse_source(desc, index):
    where = f"sources[{index}]"
    if not isinstance(desc, dict):
        raise ValidationError([Issue("BadSource", f"{where}: expected an object, got {desc!r}")])
    if "list" in desc:
        if set(desc) != {"list"} or not isinstance(desc["list"], list):
            raise ValidationError([Issue("BadSource", f"{where}: a list source is {{\"list\": [values]}}")])
        return ExplicitList(desc["list"])
    name = desc.get("dist")
    if name not in DISTRIBUTIONS:
        raise ValidationError([Issue("BadSource", f"{where}: unknown distribution {name!r}")])
    cls, params = DISTRIBUTIONS[name]
    extra = set(desc) - {"dist", *params}
    missing = set(params) - set(desc)
    if extra or missing:
        raise ValidationError([Issue("BadSource", f"{where}: {name} takes {list(params)}; "
                                                  f"unknown {sorted(extra)}, missing {sorted(missing)}")])
    return cls(*(desc[p] for p in params))


def source_to_dict(source) -> dict:
    if isinstance(source, ExplicitList):
        return {"list": [int(v) if float(v).is_integer() else v for v in source.values]}
    for name, (cls, params) in DISTRIBUTIONS.items():
        if isinstance(source, cls):
            return {"dist": name, **{p: getattr(source, p) for p in params}}
    raise TypeError(f"unknown source {source!r}")


def scenario_from_dict(doc: dict, default_workers: int = 1) -> Scenario:
    if not isinstance(doc, dict):
        raise ValidationError([Issue("BadDocument", "scenario file must hold a single object")])
    issues = []
    unknown = set(doc) - SCENARIO_KEYS
    if unknown:
        issues.append(Issue("UnknownKey", f"unknown key(s): {', '.join(sorted(unknown))}"))
    missing = REQUIRED_KEYS - set(doc)
    if missing:
        issues.append(Issue("MissingKey", f"missing key(s): {', '.join(sorted(missing))}"))
    if issues:
        raise ValidationError(issues)
    if not isinstance(doc["sources"], list):
        raise ValidationError([Issue("BadSource", "sources must be an array")])
    try:
        mode = doc["mode"]
        scenario = Scenario(
            stations=doc["stations"],
            customers=doc["customers"],
            mode=mode,
            sources=[parse_source(d, i) for i, d in enumerate(doc["sources"])],
            capacities=doc.get("capacities"),
            seed=doc.get("seed", 0),
            trace=bool(doc.get("trace", False)),
            workers=doc.get("workers", default_workers),
        )
    except ValidationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ValidationError([Issue("BadValue", str(exc))]) from exc
    validate(scenario)
    return scenario


def load_scenario(path, default_workers: int = 1) -> Scenario:
    """Read and validate a scenario file. OSError propagates for I/O failures."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([Issue("BadDocument", f"{path}: {exc}")]) from exc
    return scenario_from_dict(doc, default_workers)


def scenario_to_dict(sc: Scenario) -> dict:
    doc = {
        "stations": sc.stations,
        "customers": sc.customers,
        "mode": sc.mode.value,
        "seed": sc.seed,
        "workers": sc.workers,
        "trace": sc.trace,
        "sources": [source_to_dict(s) for s in sc.sources],
    }
    if sc.capacities is not None:
        doc["capacities"] = list(sc.capacities)
    return doc


def _num(v):
    if v is None:
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def report_to_dict(report: RunReport, include_timing: bool = True) -> dict:
    doc = {
        "algorithm": report.algorithm,
        "scenario": scenario_to_dict(report.scenario),
        "departures": [_num(d) for d in report.departures],
        "criteria": None,
        "counters": report.counters.as_dict(),
        "warnings": list(report.warnings),
    }
    if report.criteria is not None:
        doc["criteria"] = [{**{"station": c.station, "role": c.role},
                            **{name: _num(getattr(c, name)) for name in CRITERIA}}
                           for c in report.criteria]
    if include_timing:
        doc["wall_clock_seconds"] = report.wall_clock
    return doc


def report_to_json(report: RunReport, include_timing: bool = True) -> str:
    return json.dumps(report_to_dict(report, include_timing), indent=2) + "\n"


def criteria_rows(report: RunReport) -> list:
    rows = []
    for n, d in enumerate(report.departures):
        rec = report.criteria[n] if report.criteria is not None else CriteriaRecord(station=n)
        rows.append([n, *(getattr(rec, name) for name in CRITERIA), d])
    return rows


def report_to_csv(report: RunReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in criteria_rows(report):
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def criteria_from_csv(text: str) -> list:
    """Parse the CSV emitted by ``report_to_csv`` back into records and D_K values."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise ValueError(f"unexpected columns {reader.fieldnames}")
    records, last = [], []
    for row in reader:
        vals = {name: (float(row[name]) if row[name] != "" else None) for name in CRITERIA}
        records.append(CriteriaRecord(station=int(row["station"]), **vals))
        last.append(float(row["D_K"]))
    return records, last


def criteria_from_json(text: str) -> list:
    doc = json.loads(text)
    return [CriteriaRecord(station=c["station"], **{name: c[name] for name in CRITERIA})
            for c in doc["criteria"]]


def trace_to_csv(report: RunReport) -> str:
    """One row per (station, customer) with every recorded epoch."""
    tr = report.trace
    A = tr.arrivals()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["station", "customer", "A", "H", "B", "C", "D"])
    stations, customers = tr.D.shape
    for n in range(stations):
        for k in range(customers):
            H = repr(float(tr.H[n, k])) if tr.H is not None else ""
            C = repr(float(tr.C[n, k])) if tr.C is not None else ""
            writer.writerow([n, k + 1, repr(float(A[n, k])), H, repr(float(tr.B[n, k])), C,
                             repr(float(tr.D[n, k]))])
    return buf.getvalue()
