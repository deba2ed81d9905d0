"""CSV and SVG emission for experiment outputs."""

import os

import numpy as np


def format_float(value: float) -> str:
    """17 significant digits: round-trips bit-exactly through text."""
    return format(float(value), ".17g")


def emit_csv(path, header, columns):
    """Write columns (equal-length 1D sequences) under the given header row."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    if len(header) != len(cols):
        raise ValueError("header and column count differ")
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns must share a length")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(format_float(c[i]) for c in cols))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Read back a CSV written by emit_csv: (header, columns)."""
    with open(path) as fh:
        rows = [line.strip() for line in fh if line.strip()]
    header = rows[0].split(",")
    data = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    if data.size == 0:
        return header, [np.array([]) for _ in header]
    return header, [data[:, i] for i in range(len(header))]


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f")


def emit_svg(path, x, series, labels=None, title="", width=640, height=420):
    """Minimal multi-series line plot; no plotting dependency.

    ``series`` is a list of y arrays sharing the x axis.
    """
    x = np.asarray(x, dtype=float)
    series = [np.asarray(s, dtype=float) for s in series]
    if any(len(s) != len(x) for s in series):
        raise ValueError("series must match the x length")
    labels = labels or [f"series {i}" for i in range(len(series))]
    margin = 50
    inner_w = width - 2 * margin
    inner_h = height - 2 * margin
    x_lo, x_hi = float(x.min()), float(x.max())
    all_y = np.concatenate(series) if series else np.array([0.0, 1.0])
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    def sx(v):
        return margin + (v - x_lo) / (x_hi - x_lo) * inner_w

    def sy(v):
        return height - margin - (v - y_lo) / (y_hi - y_lo) * inner_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{inner_w}" height="{inner_h}" '
        'fill="none" stroke="black" stroke-width="1"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        parts.append(f'<text x="{sx(xv):.1f}" y="{height - margin + 18:.1f}" '
                     f'text-anchor="middle" font-size="10">{xv:.4g}</text>')
        parts.append(f'<text x="{margin - 6:.1f}" y="{sy(yv) + 3:.1f}" '
                     f'text-anchor="end" font-size="10">{yv:.4g}</text>')
    for i, (ys, label) in enumerate(zip(series, labels)):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{sx(xv):.2f},{sy(yv):.2f}" for xv, yv in zip(x, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.2"/>')
        parts.append(f'<text x="{width - margin - 4}" '
                     f'y="{margin + 14 + 14 * i}" text-anchor="end" '
                     f'font-size="11" fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
    return path


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
