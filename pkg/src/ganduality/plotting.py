"""Deterministic SVG emission for experiment outputs.

Pure string assembly: same series in, byte-identical file out. Only line
and scatter plots are needed, so the writer stays minimal.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def line_plot_svg(
    series: list[tuple[str, np.ndarray, np.ndarray]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 640,
    height: int = 420,
    scatter: bool = False,
) -> str:
    """Render labeled (x, y) series as one SVG document string."""
    if not series:
        raise DomainError("need at least one series")
    margin = 56
    xs_all = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in series])
    ys_all = np.concatenate([np.asarray(y, dtype=float) for _, _, y in series])
    finite = np.isfinite(xs_all) & np.isfinite(ys_all)
    if not np.any(finite):
        raise DomainError("series contain no finite points")
    x_lo, x_hi = float(xs_all[np.isfinite(xs_all)].min()), float(xs_all[np.isfinite(xs_all)].max())
    y_lo, y_hi = float(ys_all[np.isfinite(ys_all)].min()), float(ys_all[np.isfinite(ys_all)].max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def px(x: float) -> float:
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def py(y: float) -> float:
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
    ]
    for value, anchor in ((x_lo, "start"), (x_hi, "end")):
        parts.append(
            f'<text x="{_fmt(px(value))}" y="{height - margin + 18}" font-size="11" '
            f'text-anchor="{anchor}">{_fmt(value)}</text>'
        )
    for value in (y_lo, y_hi):
        parts.append(
            f'<text x="{margin - 6}" y="{_fmt(py(value) + 4)}" font-size="11" '
            f'text-anchor="end">{_fmt(value)}</text>'
        )
    if title:
        parts.append(
            f'<text x="{width // 2}" y="24" font-size="14" text-anchor="middle">{title}</text>'
        )
    if x_label:
        parts.append(
            f'<text x="{width // 2}" y="{height - 12}" font-size="12" '
            f'text-anchor="middle">{x_label}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="16" y="{height // 2}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 16 {height // 2})">{y_label}</text>'
        )
    for k, (label, xs, ys) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        pts = [
            (px(float(x)), py(float(y)))
            for x, y in zip(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
            if np.isfinite(x) and np.isfinite(y)
        ]
        if scatter or len(pts) == 1:
            for (cx, cy) in pts:
                parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3" fill="{color}"/>')
        else:
            path = " ".join(f"{_fmt(cx)},{_fmt(cy)}" for cx, cy in pts)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = 40 + 16 * k
        parts.append(f'<rect x="{width - margin - 130}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{width - margin - 114}" y="{ly}" font-size="11">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
