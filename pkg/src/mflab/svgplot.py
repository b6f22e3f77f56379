"""Minimal SVG line plots, written as plain text so byte output is a pure
function of the data."""

import math

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 50


def _fmt(x: float) -> str:
    return format(x, ".6g")


def _transform(v, lo, hi, log):
    if log:
        v, lo, hi = math.log10(v), math.log10(lo), math.log10(hi)
    if hi == lo:
        return 0.5
    return (v - lo) / (hi - lo)


def _ticks(lo, hi, log):
    if log:
        lo10 = int(math.floor(math.log10(lo)))
        hi10 = int(math.ceil(math.log10(hi)))
        span = max(1, (hi10 - lo10) // 6 + 1)
        return [10.0 ** k for k in range(lo10, hi10 + 1, span)]
    if hi == lo:
        return [lo]
    step = 10.0 ** math.floor(math.log10((hi - lo) / 4))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * abs(hi):
        ticks.append(t)
        t += step
    return ticks


def line_plot(series, title="", xlabel="", ylabel="",
              logx=False, logy=False) -> str:
    """series: iterable of (label, xs, ys).  Returns the SVG document."""
    series = [(label, list(xs), list(ys)) for label, xs, ys in series]
    if not series or not any(len(xs) for _, xs, _ in series):
        raise ValueError("nothing to plot")
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
           if math.isfinite(x) and math.isfinite(y)
           and not (logx and x <= 0) and not (logy and y <= 0)]
    if not pts:
        raise ValueError("no finite points to plot")
    xlo, xhi = min(p[0] for p in pts), max(p[0] for p in pts)
    ylo, yhi = min(p[1] for p in pts), max(p[1] for p in pts)
    if xlo == xhi:
        xlo, xhi = xlo - 1, xhi + 1
    if ylo == yhi:
        ylo, yhi = ylo - (abs(ylo) or 1.0) * 0.5, yhi + (abs(yhi) or 1.0) * 0.5

    def sx(x):
        return _ML + _transform(x, xlo, xhi, logx) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - _transform(y, ylo, yhi, logy) * (_H - _MT - _MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
           f'height="{_H}" viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<text x="{_W // 2}" y="22" text-anchor="middle" '
           f'font-size="15" font-family="sans-serif">{title}</text>']
    # axes
    out.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" '
               f'y2="{_H - _MB}" stroke="black"/>')
    out.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
               'stroke="black"/>')
    for t in _ticks(xlo, xhi, logx):
        px = sx(t)
        out.append(f'<line x1="{_fmt(px)}" y1="{_H - _MB}" x2="{_fmt(px)}" '
                   f'y2="{_H - _MB + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{_H - _MB + 18}" '
                   f'text-anchor="middle" font-size="11" '
                   f'font-family="sans-serif">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi, logy):
        py = sy(t)
        out.append(f'<line x1="{_ML - 5}" y1="{_fmt(py)}" x2="{_ML}" '
                   f'y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{_ML - 8}" y="{_fmt(py + 4)}" '
                   f'text-anchor="end" font-size="11" '
                   f'font-family="sans-serif">{_fmt(t)}</text>')
    out.append(f'<text x="{_W // 2}" y="{_H - 12}" text-anchor="middle" '
               f'font-size="12" font-family="sans-serif">{xlabel}</text>')
    out.append(f'<text x="16" y="{_H // 2}" text-anchor="middle" '
               f'font-size="12" font-family="sans-serif" '
               f'transform="rotate(-90 16 {_H // 2})">{ylabel}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = [(sx(x), sy(y)) for x, y in zip(xs, ys)
                  if math.isfinite(x) and math.isfinite(y)
                  and not (logx and x <= 0) and not (logy and y <= 0)]
        if not coords:
            continue
        path = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in coords)
        out.append(f'<polyline fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{path}"/>')
        if label:
            ly = _MT + 14 + 14 * i
            out.append(f'<line x1="{_W - _MR - 120}" y1="{ly - 4}" '
                       f'x2="{_W - _MR - 100}" y2="{ly - 4}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{_W - _MR - 95}" y="{ly}" font-size="11" '
                       f'font-family="sans-serif">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save(svg_text: str, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(svg_text)
