"""Dependency-free SVG line plots for sweep and evolution outputs."""

from __future__ import annotations

import math

WIDTH, HEIGHT = 720, 480
MARGIN = 60


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + step * 1e-9:
        out.append(v)
        v += step
    return out


def line_plot_svg(path, xs, ys, *, xlog=False, xlabel="", ylabel="", title="") -> None:
    """Write a single-polyline plot; NaN points break the line."""
    pts = [(x, y) for x, y in zip(xs, ys) if _finite(y) and (not xlog or x > 0)]
    if not pts:
        raise ValueError("nothing to plot")
    fx = (lambda v: math.log10(v)) if xlog else (lambda v: v)
    x_lo, x_hi = min(fx(p[0]) for p in pts), max(fx(p[0]) for p in pts)
    y_lo, y_hi = min(p[1] for p in pts), max(p[1] for p in pts)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    span_x, span_y = x_hi - x_lo, y_hi - y_lo
    inner_w, inner_h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (fx(x) - x_lo) / span_x * inner_w

    def py(y):
        return HEIGHT - MARGIN - (y - y_lo) / span_y * inner_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
    ]
    axis = (
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>'
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>'
    )
    parts.append(axis)
    if xlog:
        lo_dec, hi_dec = math.floor(x_lo), math.ceil(x_hi)
        xticks = [10.0 ** d for d in range(lo_dec, hi_dec + 1)]
        xlabels = [f"1e{d}" for d in range(lo_dec, hi_dec + 1)]
    else:
        xticks = _ticks(x_lo, x_hi)
        xlabels = [f"{v:g}" for v in xticks]
    for v, lab in zip(xticks, xlabels):
        real = v if not xlog else v
        if xlog and not (10.0 ** x_lo <= v <= 10.0 ** x_hi):
            continue
        x = px(real)
        parts.append(
            f'<line x1="{x:.1f}" y1="{HEIGHT - MARGIN}" x2="{x:.1f}" '
            f'y2="{HEIGHT - MARGIN + 5}" stroke="black"/>'
            f'<text x="{x:.1f}" y="{HEIGHT - MARGIN + 20}" text-anchor="middle" '
            f'font-size="11">{lab}</text>'
        )
    for v in _ticks(y_lo, y_hi):
        y = py(v)
        parts.append(
            f'<line x1="{MARGIN - 5}" y1="{y:.1f}" x2="{MARGIN}" y2="{y:.1f}" stroke="black"/>'
            f'<text x="{MARGIN - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{v:g}</text>'
        )
    segments: list[list[str]] = [[]]
    for x, y in zip(xs, ys):
        if not _finite(y) or (xlog and x <= 0):
            if segments[-1]:
                segments.append([])
            continue
        segments[-1].append(f"{px(x):.2f},{py(y):.2f}")
    for seg in segments:
        if len(seg) >= 2:
            parts.append(
                f'<polyline points="{" ".join(seg)}" fill="none" stroke="#1f77b4" stroke-width="1.2"/>'
            )
    parts.append(
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 14}" text-anchor="middle" font-size="13">{xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{HEIGHT / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {HEIGHT / 2})">{ylabel}</text>'
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))


def _finite(v) -> bool:
    try:
        return math.isfinite(v)
    except TypeError:
        return False
