"""CSV and JSON emission of benchmark campaigns.

JSON layout (``schema`` = ``icsaead.bench/1``)::

    {
      "schema": "icsaead.bench/1",
      "partial": false,
      "abort_reason": null,
      "environment": {...environment_probe()...},
      "timed_decrypt_includes_file_io": false,
      "campaigns": [
        {
          "config": {"payload_bytes", "runs", "warmup_runs", "label"},
          "n_total", "n_valid", "n_dropped", "nonce_collisions",
          "peak_memory_bytes", "elapsed_s", "partial",
          "phases": {"functional": {"mean_ns", "p5_ns", "p95_ns", "min_ns", "max_ns"}, ...},
          "budgets": {"GOOSE": {"limit_ns", "mean": {"value_ns", "fraction_pct", "pass"},
                                "p95": {...}}, ...}
        }
      ]
    }

The CSV carries one row per phase per campaign under the fixed header
``phase,mean_ns,p5_ns,p95_ns,n_valid,n_dropped,payload_bytes,label``.
Environment, verdicts and the partial marker precede the header as ``#``
comment lines.
"""

import csv
import io
import json

from .bench import PHASES

SCHEMA = "icsaead.bench/1"
CSV_HEADER = ["phase", "mean_ns", "p5_ns", "p95_ns", "n_valid", "n_dropped",
              "payload_bytes", "label"]


def campaign_to_dict(c) -> dict:
    out = {
        "config": {
            "payload_bytes": c.payload_size,
            "runs": c.runs,
            "warmup_runs": c.warmup_runs,
            "label": c.label,
        },
        "n_total": c.n_total,
        "n_valid": c.n_total - c.n_dropped,
        "n_dropped": c.n_dropped,
        "nonce_collisions": c.nonce_collisions,
        "peak_memory_bytes": c.peak_memory_bytes,
        "elapsed_s": round(c.elapsed_s, 6),
        "partial": c.partial,
        "phases": {},
        "budgets": {},
    }
    if c.summary is not None:
        for name in PHASES:
            p = c.summary.phases[name]
            out["phases"][name] = {
                "mean_ns": p.mean, "p5_ns": p.p5, "p95_ns": p.p95,
                "min_ns": p.min, "max_ns": p.max,
            }
    for v in c.verdicts:
        entry = out["budgets"].setdefault(v.budget, {"limit_ns": v.limit_ns, "phase": v.phase})
        entry[v.statistic] = {
            "value_ns": v.value_ns,
            "fraction_pct": v.fraction_pct,
            "pass": v.passed,
        }
    return out


def build_report(campaigns, environment, partial=False, abort_reason=None) -> dict:
    return {
        "schema": SCHEMA,
        "partial": partial,
        "abort_reason": abort_reason,
        "environment": environment,
        "timed_decrypt_includes_file_io": False,
        "campaigns": [campaign_to_dict(c) for c in campaigns],
    }


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {report['schema']}\n")
    buf.write(f"# partial: {str(report['partial']).lower()}\n")
    if report.get("abort_reason"):
        buf.write(f"# abort_reason: {report['abort_reason']}\n")
    for key, value in report["environment"].items():
        buf.write(f"# environment.{key}: {value}\n")
    for c in report["campaigns"]:
        size = c["config"]["payload_bytes"]
        buf.write(f"# campaign {size}B: n_total={c['n_total']} n_dropped={c['n_dropped']} "
                  f"nonce_collisions={c['nonce_collisions']} "
                  f"peak_memory_bytes={c['peak_memory_bytes']}\n")
        for name, b in c["budgets"].items():
            for stat in ("mean", "p95"):
                if stat in b:
                    v = b[stat]
                    verdict = "pass" if v["pass"] else "fail"
                    buf.write(f"# verdict {size}B {name} {b['phase']} {stat}: {verdict} "
                              f"{v['fraction_pct']:.3f}%\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in report["campaigns"]:
        for name, p in c["phases"].items():
            w.writerow([
                name, round(p["mean_ns"]), p["p5_ns"], p["p95_ns"],
                c["n_valid"], c["n_dropped"], c["config"]["payload_bytes"],
                c["config"]["label"],
            ])
    return buf.getvalue()


def read_csv_rows(text: str) -> list:
    """Data rows of a CSV report as dicts, skipping ``#`` comment lines."""
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    raise ValueError(f"unknown report format {fmt!r}")
