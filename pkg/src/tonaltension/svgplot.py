"""Minimal SVG line charts for tension curves.

Produces a standalone 800x300 chart with axes, light horizontal grid lines,
and a legend, without any plotting dependency.  Output is a deterministic
function of the input: coordinates are formatted with two decimals and curve
order is preserved, so byte-identical inputs give byte-identical files.
"""

from __future__ import annotations

import math
from typing import Sequence

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)

_MARGIN_LEFT = 52
_MARGIN_RIGHT = 12
_MARGIN_TOP = 28
_MARGIN_BOTTOM = 34


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def render_curves_svg(
    curves: Sequence[tuple[str, Sequence[float]]],
    *,
    width: int = 800,
    height: int = 300,
    title: str = "",
    x_label: str = "bar",
    y_label: str = "tension",
) -> str:
    """An SVG document plotting one polyline per (label, values) pair."""
    series = [(label, [float(v) for v in values]) for label, values in curves]
    if not series or all(not values for _, values in series):
        raise ValueError("nothing to plot")

    flat = [v for _, values in series for v in values]
    lo, hi = min(flat), max(flat)
    if math.isclose(lo, hi):
        lo, hi = lo - 1.0, hi + 1.0
    else:
        pad = 0.05 * (hi - lo)
        lo, hi = lo - pad, hi + pad
    max_len = max(len(values) for _, values in series)

    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def x_at(i: int) -> float:
        if max_len <= 1:
            return _MARGIN_LEFT + plot_w / 2.0
        return _MARGIN_LEFT + plot_w * i / (max_len - 1)

    def y_at(v: float) -> float:
        return _MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{_escape(title)}</text>'
        )

    # horizontal grid with y tick labels
    for i in range(5):
        v = lo + (hi - lo) * i / 4.0
        y = y_at(v)
        parts.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{_fmt(y)}" '
            f'x2="{width - _MARGIN_RIGHT}" y2="{_fmt(y)}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_LEFT - 6}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{v:.3g}</text>'
        )

    # x tick labels at a readable stride
    stride = max(1, math.ceil(max_len / 8))
    for i in range(0, max_len, stride):
        x = x_at(i)
        parts.append(
            f'<text x="{_fmt(x)}" y="{height - _MARGIN_BOTTOM + 14}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">{i}</text>'
        )

    # axes
    parts.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{height - _MARGIN_BOTTOM}" stroke="#333333" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{height - _MARGIN_BOTTOM}" '
        f'x2="{width - _MARGIN_RIGHT}" y2="{height - _MARGIN_BOTTOM}" '
        f'stroke="#333333" stroke-width="1"/>'
    )
    parts.append(
        f'<text x="{width / 2:.0f}" y="{height - 6}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{_escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="14" y="{height / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 14 {height / 2:.0f})">{_escape(y_label)}</text>'
    )

    for index, (label, values) in enumerate(series):
        if not values:
            continue
        color = PALETTE[index % len(PALETTE)]
        if len(values) == 1:
            parts.append(
                f'<circle cx="{_fmt(x_at(0))}" cy="{_fmt(y_at(values[0]))}" '
                f'r="3" fill="{color}"/>'
            )
        else:
            points = " ".join(
                f"{_fmt(x_at(i))},{_fmt(y_at(v))}" for i, v in enumerate(values)
            )
            parts.append(
                f'<polyline points="{points}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>'
            )
        legend_y = _MARGIN_TOP + 14 * index
        parts.append(
            f'<line x1="{width - 150}" y1="{legend_y}" x2="{width - 130}" '
            f'y2="{legend_y}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{width - 124}" y="{legend_y + 4}" '
            f'font-family="sans-serif" font-size="10">{_escape(label)}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
