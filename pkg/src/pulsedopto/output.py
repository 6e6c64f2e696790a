"""Writers for sweep tables: CSV (canonical), JSON and an optional SVG plot."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .sweep import SweepTable

SVG_HASHSALT = "pulsedopto"

_LABELS = {
    "S_db": "S [dB]",
    "E_N": "E_N",
    "nu_minus": "nu_-",
    "lambda_min": "lambda_min",
}


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return repr(float(v))


def csv_text(table: SweepTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = table.columns
    w.writerow(cols)
    for rec in table.records():
        w.writerow([_fmt(rec[c]) for c in cols])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    """Parse a CSV written by :func:`write_csv` back into typed records."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        rec = {}
        for k, v in r.items():
            rec[k] = v if k in ("swept_var", "error") else float(v)
        out.append(rec)
    return out


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def json_text(table: SweepTable) -> str:
    doc = {
        "name": table.name,
        "swept_var": table.swept_var,
        "scale": table.scale,
        "columns": table.columns,
        "rows": [{k: _json_safe(v) for k, v in rec.items()} for rec in table.records()],
    }
    return json.dumps(doc, indent=2) + "\n"


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
    return path


def write_csv(table: SweepTable, path) -> Path:
    return _write(Path(path), csv_text(table))


def write_json(table: SweepTable, path) -> Path:
    return _write(Path(path), json_text(table))


def write_svg(table: SweepTable, path) -> Path:
    """Line plot of the target measures against the swept variable."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    x = table.column("value")
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASHSALT}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for target in table.targets:
            y = table.column(target)
            if target == "S_db" and table.ensemble:
                ax.errorbar(
                    x,
                    table.column("mean_S_db"),
                    yerr=table.column("std_S_db"),
                    fmt="o",
                    ms=3,
                    capsize=2,
                    label="S [dB] ensemble",
                )
            ax.plot(x, y, "-", label=_LABELS.get(target, target))
        ax.axhline(0.0, color="0.6", lw=0.8)
        if table.scale == "log10":
            ax.set_xscale("log")
        ax.set_xlabel(table.swept_var)
        ax.set_title(table.name)
        ax.legend()
        fig.tight_layout()
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
        finally:
            plt.close(fig)
    return path


def write_output(table: SweepTable, out_dir, formats=("csv",), plot: bool = False) -> list[Path]:
    """Write ``<name>.csv`` / ``.json`` / ``.svg`` into ``out_dir``."""
    out_dir = Path(out_dir)
    written = []
    for fmt in formats:
        if fmt == "csv":
            written.append(write_csv(table, out_dir / f"{table.name}.csv"))
        elif fmt == "json":
            written.append(write_json(table, out_dir / f"{table.name}.json"))
        else:
            raise ValueError(f"unknown output format {fmt!r}")
    if plot:
        written.append(write_svg(table, out_dir / f"{table.name}.svg"))
    return written
