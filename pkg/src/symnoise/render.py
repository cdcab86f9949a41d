"""Heatmap output: labelled CSV matrices and a dependency-free SVG renderer."""

from __future__ import annotations

import csv
import io
import os
from typing import Optional, Sequence

import numpy as np

LOG_FLOOR = 1e-6


def write_matrix_csv(path, matrix, labels: Sequence[str], sectors: Optional[Sequence] = None) -> None:
    """Write ``matrix`` with a label header row and label first column.

    ``sectors`` entries ``(q, start, stop)`` are recorded on a leading
    ``# sectors:`` comment line. Values use ``repr`` so reading back is exact.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (len(labels), len(labels)):
        raise ValueError("matrix shape does not match labels")
    buf = io.StringIO()
    if sectors:
        buf.write("# sectors: " + " ".join(f"{q:g}[{a}:{b}]" for q, a, b in sectors) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", *labels])
    for lab, row in zip(labels, matrix):
        writer.writerow([lab, *(repr(float(v)) for v in row)])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_matrix_csv(path):
    """Inverse of :func:`write_matrix_csv`; returns ``(matrix, labels, sectors)``."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    sectors = []
    body = []
    for line in lines:
        if line.startswith("# sectors:"):
            for tok in line.split(":", 1)[1].split():
                q, rng = tok.rstrip("]").split("[")
                a, b = rng.split(":")
                sectors.append((float(q), int(a), int(b)))
        elif not line.startswith("#") and line:
            body.append(line)
    rows = list(csv.reader(body))
    labels = rows[0][1:]
    matrix = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return matrix, labels, sectors


def _color(v: float) -> str:
    # white -> dark blue ramp
    v = min(max(v, 0.0), 1.0)
    r = round(255 * (1 - 0.9 * v))
    g = round(255 * (1 - 0.75 * v))
    b = round(255 * (1 - 0.35 * v))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(matrix, labels: Sequence[str], sectors: Optional[Sequence] = None, scale: str = "linear",
               title: str = "", cell: int = 36) -> str:
    """SVG heatmap of a non-negative matrix; byte-identical for identical input.

    ``scale="log"`` maps ``log10`` of the magnitudes over
    ``[log10(LOG_FLOOR), log10(max)]``.
    """
    m = np.abs(np.asarray(matrix, dtype=float))
    n = m.shape[0]
    if scale == "log":
        top = np.log10(max(m.max(initial=0.0), LOG_FLOOR * 10))
        vals = (np.log10(np.maximum(m, LOG_FLOOR)) - np.log10(LOG_FLOOR)) / (top - np.log10(LOG_FLOOR))
    elif scale == "linear":
        top = m.max(initial=0.0)
        vals = m / top if top > 0 else m
    else:
        raise ValueError("scale must be 'linear' or 'log'")
    margin = 90
    size = margin + n * cell + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20}" '
        f'viewBox="0 0 {size} {size + 20}" font-family="sans-serif" font-size="10">',
        f'<text x="{margin}" y="14">{title} ({scale} scale, max {m.max(initial=0.0):.4g})</text>',
    ]
    for k in range(n):
        y = margin + k * cell
        out.append(f'<text x="{margin - 4}" y="{y + cell / 2 + 3:.1f}" text-anchor="end">{labels[k]}</text>')
        out.append(f'<text x="{y + cell / 2:.1f}" y="{margin - 4}" text-anchor="start" '
                   f'transform="rotate(-60 {y + cell / 2:.1f} {margin - 4})">{labels[k]}</text>')
        for j in range(n):
            out.append(f'<rect x="{margin + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="{_color(vals[k, j])}"><title>{m[k, j]:.6g}</title></rect>')
    for _, a, b in sectors or ():
        x0, w = margin + a * cell, (b - a) * cell
        out.append(f'<rect x="{x0}" y="{x0}" width="{w}" height="{w}" fill="none" stroke="#c0392b" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_heatmap(report, out_dir, source: str = "mc", scale: str = "linear", prefix: str = "rho") -> dict:
    """Write ``<prefix>_<source>.csv`` and ``.svg`` for a scenario report; returns the paths."""
    mat = report.heatmap(source)
    used = source if source == "fff" or report.rho_mc is not None else "fff"
    base = os.path.join(out_dir, f"{prefix}_{used}")
    write_matrix_csv(base + ".csv", mat, report.labels, report.sector_bounds)
    with open(base + ".svg", "w") as fh:
        fh.write(render_svg(mat, report.labels, report.sector_bounds, scale, title=f"{report.config.name} {used}"))
    return {"csv": base + ".csv", "svg": base + ".svg"}


def write_filter_csv(path, ffs, basis) -> None:
    """Diagonal first-order filter functions ``F_ii(w)`` per decorrelated channel, one column each."""
    diag = ffs.first_diagonal()
    labels = [str(basis.labels[i]) for i in ffs.active]
    header = ["omega"] + [f"S_{p}" for p in range(diag.shape[1])]
    header += [f"F_{p}[{lab}]" for p in range(diag.shape[1]) for lab in labels]
    spectra = np.stack([ffs.spectra[:, p, p].real for p in range(diag.shape[1])], axis=1)
    rows = np.column_stack([ffs.omega, spectra, diag.reshape(len(ffs.omega), -1)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
