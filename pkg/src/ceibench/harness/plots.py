"""Self-contained SVG regret plots."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from ..errors import EmptyPlotError, InvalidInputError

STYLES = ("regret_linear", "regret_loglog")
WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 80, 24, 40, 60


def _rows(result):
    rows = result.summary if hasattr(result, "summary") else result
    return [r for r in rows if r.get("n", 0) > 0 and r.get("q50") is not None]


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * abs(step):
        ticks.append(round(v, 12))
        v += step
    return ticks


def _polyline(points, dash=False) -> str:
    if len(points) < 2:
        if len(points) == 1:
            x, y = points[0]
            return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="#1f4e9a"/>'
        return ""
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    style = ' stroke-dasharray="6,4"' if dash else ""
    width = 1.2 if dash else 2.0
    return f'<polyline fill="none" stroke="#1f4e9a" stroke-width="{width}"{style} points="{coords}"/>'


def _segments(ts, vals, fx, fy, keep):
    """Split a series into drawable runs, breaking wherever ``keep`` fails."""
    runs, cur = [], []
    for t, v in zip(ts, vals):
        if v is not None and keep(t, v):
            cur.append((fx(t), fy(v)))
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def emit_plots(result, style: str = "regret_linear", title: str | None = None) -> str:
    """Render the regret quantiles of a run as an SVG document.

    ``result`` is a RunResult or a list of summary rows (dicts with
    ``t, q25, q50, q75, n``).  The median is drawn solid and the quartiles
    dashed.  In log-log mode rows with a non-positive median are dropped
    and the drop count is written on the plot.
    """
    if style not in STYLES:
        raise InvalidInputError(f"unknown plot style {style!r}; choose from {', '.join(STYLES)}")
    rows = _rows(result)
    if not rows:
        raise EmptyPlotError("no iteration has a contributing trial; nothing to plot")
    loglog = style == "regret_loglog"
    dropped = 0
    if loglog:
        kept = [r for r in rows if r["t"] > 0 and r["q50"] > 0]
        dropped = sum(1 for r in rows if r["q50"] <= 0)
        if not kept:
            raise EmptyPlotError("every median regret is zero or t=0 only; use --style regret_linear instead")
        rows = kept

    ts = [r["t"] for r in rows]
    series = {k: [r[k] for r in rows] for k in ("q25", "q50", "q75")}
    finite = [v for k in series for v in series[k] if v is not None and (not loglog or v > 0)]

    if loglog:
        tx = lambda t: math.log10(t)
        ty = lambda v: math.log10(v)
    else:
        tx = ty = float
    xlo, xhi = tx(min(ts)), tx(max(ts))
    ylo, yhi = min(ty(v) for v in finite), max(ty(v) for v in finite)
    if xhi - xlo < 1e-12:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi - ylo < 1e-12:
        pad = max(abs(ylo) * 0.1, 0.5)
        ylo, yhi = ylo - pad, yhi + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    fx = lambda t: LEFT + (tx(t) - xlo) / (xhi - xlo) * pw
    fy = lambda v: TOP + ph - (ty(v) - ylo) / (yhi - ylo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']

    def ticks(lo, hi):
        if loglog:
            dec = list(range(math.ceil(lo), math.floor(hi) + 1))
            return dec if len(dec) >= 2 else _nice_ticks(lo, hi)
        return _nice_ticks(lo, hi)

    def fmt(v):
        if loglog:
            return f"1e{v:g}" if float(v).is_integer() else f"{10 ** v:.3g}"
        return f"{v:g}"

    for v in ticks(xlo, xhi):
        px = LEFT + (v - xlo) / (xhi - xlo) * pw
        out.append(f'<line x1="{px:.2f}" y1="{TOP + ph}" x2="{px:.2f}" y2="{TOP + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{px:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{escape(fmt(v))}</text>')
    for v in ticks(ylo, yhi):
        py = TOP + ph - (v - ylo) / (yhi - ylo) * ph
        out.append(f'<line x1="{LEFT - 5}" y1="{py:.2f}" x2="{LEFT}" y2="{py:.2f}" stroke="#333"/>')
        out.append(f'<text x="{LEFT - 8}" y="{py + 4:.2f}" text-anchor="end">{escape(fmt(v))}</text>')

    keep = (lambda t, v: v > 0) if loglog else (lambda t, v: math.isfinite(v))
    for name, dash in (("q25", True), ("q75", True), ("q50", False)):
        for run in _segments(ts, series[name], fx, fy, keep):
            out.append(_polyline(run, dash))

    xlabel = "iteration t (log scale)" if loglog else "iteration t"
    ylabel = "simple regret (log scale)" if loglog else "simple regret"
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 18}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="18" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph / 2:.1f})">{ylabel}</text>')
    heading = title or "median (solid) and 25th/75th percentiles (dashed)"
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(heading)}</text>')
    if loglog and dropped:
        out.append(f'<text x="{LEFT + pw - 6}" y="{TOP + 16}" text-anchor="end" fill="#a33">'
                   f'{dropped} point(s) with median regret 0 not shown</text>')
    out.append("</svg>")
    return "\n".join(s for s in out if s) + "\n"


def plot_coordinates(svg: str) -> np.ndarray:
    """Vertices of the solid median polyline, for testing plotted geometry."""
    for line in svg.splitlines():
        if line.startswith("<polyline") and "stroke-dasharray" not in line:
            pts = line.split('points="')[1].split('"')[0]
            return np.array([[float(a) for a in p.split(",")] for p in pts.split()])
    return np.empty((0, 2))
