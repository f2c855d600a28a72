"""Static SVG figures: a scatter with least-squares line and survival step curves.

Output is plain text built from fixed-precision numbers, so identical input
gives byte-identical files.
"""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

from .survival import SurvivalCurve

WIDTH, HEIGHT = 640, 480
MARGIN = {"left": 70, "right": 20, "top": 40, "bottom": 55}
PALETTE = ("#c0392b", "#2166ac", "#1b7837", "#762a83")


def least_squares(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Slope and intercept of the ordinary least-squares line y = a*x + b."""
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxx = math.fsum((v - mx) ** 2 for v in x)
    if sxx == 0:
        raise ValueError("x is constant; regression line undefined")
    sxy = math.fsum((u - mx) * (v - my) for u, v in zip(x, y))
    slope = sxy / sxx
    return slope, my - slope * mx


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v == int(v):
        return f"{int(v):,}"
    return f"{v:g}"


class _Frame:
    def __init__(self, x_range, y_range):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.left = MARGIN["left"]
        self.right = WIDTH - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = HEIGHT - MARGIN["bottom"]

    def px(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y):
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def axes(self, title, xlabel, ylabel, xticks, yticks):
        out = [
            f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<line x1="{self.left}" y1="{self.bottom}" x2="{self.right}" y2="{self.bottom}" stroke="black"/>',
            f'<line x1="{self.left}" y1="{self.top}" x2="{self.left}" y2="{self.bottom}" stroke="black"/>',
        ]
        for t in xticks:
            x = _fmt(self.px(t))
            out.append(f'<line x1="{x}" y1="{self.bottom}" x2="{x}" y2="{self.bottom + 5}" stroke="black"/>')
            out.append(f'<text x="{x}" y="{self.bottom + 19}" text-anchor="middle" font-size="11">{_tick_label(t)}</text>')
        for t in yticks:
            y = _fmt(self.py(t))
            out.append(f'<line x1="{self.left - 5}" y1="{y}" x2="{self.left}" y2="{y}" stroke="black"/>')
            out.append(f'<text x="{self.left - 8}" y="{y}" text-anchor="end" dominant-baseline="middle" font-size="11">{_tick_label(t)}</text>')
        out.append(f'<text x="{(self.left + self.right) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
        cy = (self.top + self.bottom) / 2
        out.append(f'<text x="16" y="{cy:.1f}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {cy:.1f})">{escape(ylabel)}</text>')
        return out


def _document(body: list[str]) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n'
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def scatter_svg(
    x: Sequence[float],
    y: Sequence[float],
    title: str = "",
    xlabel: str = "total articles",
    ylabel: str = "incorrectly phrased articles",
    labels: Sequence[str] | None = None,
    annotation: str = "",
) -> str:
    """Scatter plot of (x, y) with its least-squares line."""
    slope, intercept = least_squares(x, y)
    xmax = max(x) * 1.05
    ymax = max(max(y), slope * xmax + intercept) * 1.05
    frame = _Frame((0.0, xmax), (0.0, ymax))
    body = frame.axes(title, xlabel, ylabel, _nice_ticks(0, xmax), _nice_ticks(0, ymax))

    x_end = xmax
    y_end = slope * x_end + intercept
    x_start = 0.0 if intercept >= 0 else -intercept / slope
    y_start = slope * x_start + intercept
    body.append(
        f'<line x1="{_fmt(frame.px(x_start))}" y1="{_fmt(frame.py(y_start))}" '
        f'x2="{_fmt(frame.px(x_end))}" y2="{_fmt(frame.py(y_end))}" stroke="{PALETTE[1]}" stroke-width="1.5"/>'
    )
    for i, (u, v) in enumerate(zip(x, y)):
        cx, cy = _fmt(frame.px(u)), _fmt(frame.py(v))
        tip = f"<title>{escape(labels[i])}</title>" if labels else ""
        body.append(f'<circle cx="{cx}" cy="{cy}" r="4" fill="{PALETTE[0]}">{tip}</circle>')
    if annotation:
        body.append(
            f'<text x="{frame.left + 10}" y="{frame.top + 16}" font-size="12">{escape(annotation)}</text>'
        )
    return _document(body)


def survival_svg(curves: dict[str, SurvivalCurve], title: str = "", xlabel: str = "time (days)") -> str:
    """Step plots of one or more survival curves with +/- 1 std shading."""
    t_max = max((c.steps[-1].time for c in curves.values() if c.steps), default=1.0)
    t_max = t_max * 1.05 if t_max > 0 else 1.0
    frame = _Frame((0.0, t_max), (0.0, 1.0))
    body = frame.axes(title, xlabel, "survival probability", _nice_ticks(0, t_max), [0, 0.2, 0.4, 0.6, 0.8, 1.0])

    for k, (name, curve) in enumerate(curves.items()):
        colour = PALETTE[k % len(PALETTE)]
        # knots: (start, end, estimate, std) for each flat segment
        segments = []
        start, estimate, std = 0.0, 1.0, 0.0
        for s in curve.steps:
            segments.append((start, s.time, estimate, std))
            start, estimate, std = s.time, s.estimate, s.std
        segments.append((start, t_max, estimate, std))

        upper, lower = [], []
        for a, b, e, sd in segments:
            hi, lo = min(1.0, e + sd), max(0.0, e - sd)
            upper += [(a, hi), (b, hi)]
            lower += [(a, lo), (b, lo)]
        band = upper + lower[::-1]
        pts = " ".join(f"{_fmt(frame.px(t))},{_fmt(frame.py(v))}" for t, v in band)
        body.append(f'<polygon points="{pts}" fill="{colour}" fill-opacity="0.2" stroke="none"/>')

        path = []
        for a, b, e, _ in segments:
            path.append(f"{_fmt(frame.px(a))},{_fmt(frame.py(e))}")
            path.append(f"{_fmt(frame.px(b))},{_fmt(frame.py(e))}")
        body.append(f'<polyline points="{" ".join(path)}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        y_legend = frame.top + 16 + 16 * k
        body.append(f'<line x1="{frame.right - 150}" y1="{y_legend}" x2="{frame.right - 130}" y2="{y_legend}" stroke="{colour}" stroke-width="2"/>')
        body.append(f'<text x="{frame.right - 124}" y="{y_legend + 4}" font-size="12">{escape(str(name))}</text>')
    return _document(body)
