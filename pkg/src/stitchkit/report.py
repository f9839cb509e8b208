"""Plain-text, JSON and CSV renderings of evaluation results.

Text tables follow the layouts used for published stitching results: EPE
tables have one block per estimator (or alpha) with OV / NOV sub-rows and one
column per overlap bucket plus the total mean; PSNR tables are dataset x method.
"""

import csv
import io as _io

from .losses import NORMALIZATION_NOTE

MISSING = "-"


def _fmt(x, digits=3):
    return MISSING if x is None else f"{x:.{digits}f}"


def _table(header, rows):
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    line = lambda r: " | ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip()
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in rows])


def epe_columns(reports):
    cols = []
    for rep in reports:
        for c in rep.columns:
            if c not in cols:
                cols.append(c)
    return cols


def epe_text(reports, title="End-point error (px) by overlap ratio (%)"):
    """Text table with one OV / NOV row pair per report."""
    cols = epe_columns(reports)
    header = ["method", "region"] + cols + ["total mean"]
    rows = []
    for rep in reports:
        for k, region in enumerate(("OV", "NOV")):
            cells = [_fmt(rep.cells.get(c, {}).get(region)) for c in cols]
            rows.append([rep.label if k == 0 else "", region] + cells + [_fmt(rep.total.get(region))])
    return f"# {title}\n# {NORMALIZATION_NOTE}\n" + _table(header, rows)


def epe_json(reports):
    cols = epe_columns(reports)
    return {
        "table": "epe",
        "normalization": NORMALIZATION_NOTE,
        "columns": cols + ["total mean"],
        "rows": [
            {
                "method": rep.label,
                "OV": {**{c: rep.cells.get(c, {}).get("OV") for c in cols}, "total mean": rep.total["OV"]},
                "NOV": {**{c: rep.cells.get(c, {}).get("NOV") for c in cols}, "total mean": rep.total["NOV"]},
                "samples": {**{c: rep.cells.get(c, {}).get("samples", 0) for c in cols}, "total mean": rep.total["samples"]},
            }
            for rep in reports
        ],
    }


def parse_table(text):
    """Parse a text table produced here back into a list of row lists (header first)."""
    lines = [l for l in text.splitlines() if l and not l.startswith("#") and not set(l) <= set("-+ ")]
    return [[c.strip() for c in l.split("|")] for l in lines]


def _methods(table):
    methods = []
    for row in table.values():
        for m in row:
            if m not in methods:
                methods.append(m)
    return methods


def psnr_text(table, title="Masked PSNR (dB) on the overlap region, holes excluded"):
    """``table`` maps dataset -> method -> mean PSNR."""
    methods = _methods(table)
    header = ["dataset"] + methods
    rows = [[ds] + [_fmt(table[ds].get(m), 4) for m in methods] for ds in table]
    return f"# {title}\n" + _table(header, rows)


def psnr_json(table):
    return {"table": "psnr", "columns": _methods(table),
            "rows": [{"dataset": ds, **vals} for ds, vals in table.items()]}


def psnr_csv(per_sample, mean):
    """CSV with ``sample_id,psnr_db`` rows and a final ``mean`` summary row."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_id", "psnr_db"])
    for sid, val in per_sample:
        w.writerow([sid, "absent" if val is None else f"{val:.6f}"])
    w.writerow(["mean", "absent" if mean is None else f"{mean:.6f}"])
    return buf.getvalue()


def alpha_text(rows, columns, title="Warp loss by alpha"):
    """``rows`` maps alpha -> {column: mean loss}."""
    header = ["alpha"] + columns
    body = [[f"{a:g}"] + [_fmt(vals.get(c), 4) for c in columns] for a, vals in rows.items()]
    return f"# {title}\n# {NORMALIZATION_NOTE}\n" + _table(header, body)


def alpha_json(rows, columns):
    return {"table": "alpha_sweep", "normalization": NORMALIZATION_NOTE, "columns": columns,
            "rows": [{"alpha": a, **vals} for a, vals in rows.items()]}
