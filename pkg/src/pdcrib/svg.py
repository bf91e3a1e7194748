"""Tiny deterministic SVG writer for line plots and heatmaps."""

from __future__ import annotations

import base64
import io
import math
from xml.sax.saxutils import escape

import numpy as np
from PIL import Image

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=70, right=20, top=36, bottom=52)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]

# viridis anchors, interpolated linearly
_CMAP = np.array(
    [
        [68, 1, 84],
        [72, 40, 120],
        [62, 74, 137],
        [49, 104, 142],
        [38, 130, 142],
        [31, 158, 137],
        [53, 183, 121],
        [109, 205, 89],
        [180, 222, 44],
        [253, 231, 37],
    ],
    dtype=float,
)


def _f(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt_tick(v: float) -> str:
    return f"{v:.6g}"


class _Frame:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]
        self.xlabel, self.ylabel = xlabel, ylabel

    def X(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def Y(self, y):
        return MARGIN["top"] + (1 - (y - self.y0) / (self.y1 - self.y0)) * self.ph

    def axes(self):
        L, T = MARGIN["left"], MARGIN["top"]
        p = self.parts
        p.append(f'<rect x="{L}" y="{T}" width="{self.pw}" height="{self.ph}" fill="none" stroke="black"/>')
        for t in _ticks(self.x0, self.x1):
            x = self.X(t)
            p.append(f'<line x1="{_f(x)}" y1="{T + self.ph}" x2="{_f(x)}" y2="{T + self.ph + 5}" stroke="black"/>')
            p.append(f'<text x="{_f(x)}" y="{T + self.ph + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
        for t in _ticks(self.y0, self.y1):
            y = self.Y(t)
            p.append(f'<line x1="{L - 5}" y1="{_f(y)}" x2="{L}" y2="{_f(y)}" stroke="black"/>')
            p.append(f'<text x="{L - 8}" y="{_f(y + 4)}" text-anchor="end">{_fmt_tick(t)}</text>')
        p.append(
            f'<text x="{L + self.pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(self.xlabel)}</text>'
        )
        p.append(
            f'<text x="16" y="{T + self.ph / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {T + self.ph / 2})">{escape(self.ylabel)}</text>'
        )

    def close(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_plot(series, title="", xlabel="", ylabel="") -> str:
    """``series`` is a list of (name, x, y); returns SVG text."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    pad = 0.05 * (ys.max() - ys.min() or 1.0)
    fr = _Frame((xs.min(), xs.max()), (ys.min() - pad, ys.max() + pad), title, xlabel, ylabel)
    fr.axes()
    for k, (name, x, y) in enumerate(series):
        col = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(fr.X(a))},{_f(fr.Y(b))}" for a, b in zip(x, y))
        fr.parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        ly = MARGIN["top"] + 14 + 16 * k
        lx = MARGIN["left"] + fr.pw - 110
        fr.parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{col}" stroke-width="2"/>')
        fr.parts.append(f'<text x="{lx + 26}" y="{ly}">{escape(str(name))}</text>')
    return fr.close()


def colormap(t):
    t = np.clip(np.asarray(t, float), 0, 1) * (len(_CMAP) - 1)
    i = np.minimum(t.astype(int), len(_CMAP) - 2)
    f = (t - i)[..., None]
    return (_CMAP[i] * (1 - f) + _CMAP[i + 1] * f).round().astype(np.uint8)


def _png(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(rgb, "RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def heatmap(x, y, Z, title="", xlabel="", ylabel="", max_pixels: int = 400) -> str:
    """Z[i, j] at (x[i], y[j]); embedded as a PNG raster with a colour bar."""
    Z = np.asarray(Z, float)
    sx = max(1, Z.shape[0] // max_pixels)
    sy = max(1, Z.shape[1] // max_pixels)
    Zs = Z[::sx, ::sy]
    top = Zs.max() if Zs.max() > 0 else 1.0
    img = colormap(Zs.T[::-1] / top)
    data = base64.b64encode(_png(np.ascontiguousarray(img))).decode()
    fr = _Frame((float(x[0]), float(x[-1])), (float(y[0]), float(y[-1])), title, xlabel, ylabel)
    fr.pw -= 60
    L, T = MARGIN["left"], MARGIN["top"]
    fr.parts.append(
        f'<image x="{L}" y="{T}" width="{fr.pw}" height="{fr.ph}" preserveAspectRatio="none" '
        f'image-rendering="pixelated" href="data:image/png;base64,{data}"/>'
    )
    fr.axes()
    bx = L + fr.pw + 20
    steps = 50
    for k in range(steps):
        r, g, b = colormap(1 - k / (steps - 1))
        fr.parts.append(
            f'<rect x="{bx}" y="{_f(T + k * fr.ph / steps)}" width="14" height="{_f(fr.ph / steps + 0.5)}" '
            f'fill="rgb({r},{g},{b})"/>'
        )
    fr.parts.append(f'<text x="{bx + 18}" y="{T + 10}">{_fmt_tick(top)}</text>')
    fr.parts.append(f'<text x="{bx + 18}" y="{T + fr.ph}">0</text>')
    return fr.close()
