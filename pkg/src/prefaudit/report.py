"""Report artifacts: JSON envelopes and coefficient-interval plots.

Every JSON report carries a schema version, the invoking configuration and
SHA-256 digests of its input files so a published number can be traced back
to the exact inputs.  Plots are written as SVG (with a fixed hash salt and
no timestamp, so reruns are byte-identical) next to a plot-data CSV holding
the same numbers.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

from . import __version__
from .errors import ValidationError

SCHEMA_VERSION = "1"

matplotlib.rcParams["svg.hashsalt"] = "prefaudit"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return f"sha256:{h.hexdigest()}"


def wrap_report(kind: str, result: dict, *, config: Mapping | None = None, inputs: Mapping[str, str] | None = None) -> dict:
    """Envelope a result dict with schema version, config and input digests."""
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "generator": f"prefaudit {__version__}",
        "config": dict(config or {}),
        "inputs": {str(name): file_digest(path) for name, path in (inputs or {}).items()},
        "result": result,
    }


def write_report_json(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")


def load_report_json(path) -> dict:
    data = json.loads(Path(path).read_text())
    if "schema_version" not in data:
        raise ValidationError(f"{path} is not a toolkit report (no schema_version)")
    return data


def _plot_entries(reports: Iterable) -> list[dict]:
    """Normalize test reports / report JSONs / plain dicts into plot rows."""
    entries = []
    for item in reports:
        if hasattr(item, "to_dict"):
            item = item.to_dict()
        if "result" in item:  # JSON envelope
            kind = item.get("kind", "")
            result = item["result"]
            if "variants" in result:
                for name, variant in result["variants"].items():
                    entries.append(
                        {
                            "label": f"{kind}:{name}",
                            "percent": variant["percent"],
                            "ci_low": variant["ci_low"],
                            "ci_high": variant["ci_high"],
                        }
                    )
                continue
            item = result
        label = item.get("label") or f"{item.get('kind', '?')} {item.get('sample', '')}".strip()
        entries.append(
            {
                "label": label,
                "percent": item["percent"],
                "ci_low": item["ci_low"],
                "ci_high": item["ci_high"],
            }
        )
    if not entries:
        raise ValidationError("nothing to plot")
    return entries


def coefficient_plot(reports: Iterable, svg_path, csv_path, title: str = "Self-preferencing estimates") -> None:
    """Point-and-whisker plot of percent estimates with their CIs."""
    entries = _plot_entries(reports)
    frame = pd.DataFrame(entries)
    frame.to_csv(csv_path, index=False)

    positions = range(len(entries), 0, -1)
    fig, ax = plt.subplots(figsize=(7.0, 1.0 + 0.5 * len(entries)))
    for pos, row in zip(positions, entries):
        ax.errorbar(
            row["percent"],
            pos,
            xerr=[[row["percent"] - row["ci_low"]], [row["ci_high"] - row["percent"]]],
            fmt="o",
            color="#1f6f8b",
            ecolor="#1f6f8b",
            capsize=3,
        )
    ax.axvline(0.0, color="#999999", linestyle="--", linewidth=1)
    ax.set_yticks(list(positions))
    ax.set_yticklabels([e["label"] for e in entries])
    ax.set_xlabel("visibility effect of the platform flag (%)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
