"""Minimal SVG output: log-log branch plots and solution profiles.

Numbers are written with a fixed format so identical inputs give identical
files.
"""

from __future__ import annotations

import numpy as np

_W, _H, _PAD = 640, 420, 60


def _fmt(x):
    return f"{x:.2f}"


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="24" text-anchor="middle" font-size="14">{_escape(title)}</text>',
    ]


def _escape(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class _Axes:
    def __init__(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        self.x0, self.x1 = float(x.min()), float(x.max())
        self.y0, self.y1 = float(y.min()), float(y.max())
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5
        pad = 0.05 * (self.y1 - self.y0)
        self.y0 -= pad
        self.y1 += pad

    def px(self, x):
        return _PAD + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * (_W - 2 * _PAD)

    def py(self, y):
        return _H - _PAD - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * (_H - 2 * _PAD)

    def frame(self, xlabel, ylabel, xticks, yticks):
        out = [f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
               'fill="none" stroke="black"/>']
        for val, lab in xticks:
            X = _fmt(self.px(val))
            out.append(f'<line x1="{X}" y1="{_H - _PAD}" x2="{X}" y2="{_H - _PAD + 5}" stroke="black"/>')
            out.append(f'<text x="{X}" y="{_H - _PAD + 18}" text-anchor="middle">{lab}</text>')
        for val, lab in yticks:
            Y = _fmt(self.py(val))
            out.append(f'<line x1="{_PAD - 5}" y1="{Y}" x2="{_PAD}" y2="{Y}" stroke="black"/>')
            out.append(f'<text x="{_PAD - 8}" y="{Y}" text-anchor="end" '
                       f'dominant-baseline="middle">{lab}</text>')
        out.append(f'<text x="{_W / 2:.0f}" y="{_H - 15}" text-anchor="middle">{_escape(xlabel)}</text>')
        out.append(f'<text x="15" y="{_H / 2:.0f}" text-anchor="middle" '
                   f'transform="rotate(-90 15 {_H / 2:.0f})">{_escape(ylabel)}</text>')
        return out

    def polyline(self, x, y, color, dash=None):
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self.px(x), self.py(y)))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>'


def _linear_ticks(lo, hi, n=5):
    vals = np.linspace(lo, hi, n)
    return [(v, f"{v:.3g}") for v in vals]


def _log_ticks(lo, hi):
    """Decade ticks for log10 data in ``[lo, hi]``; falls back to evenly spaced ones."""
    dec = np.arange(np.ceil(lo), np.floor(hi) + 1)
    if len(dec) < 2:
        dec = np.linspace(lo, hi, 4)
    return [(d, f"{10 ** d:.3g}") for d in dec]


def branch_svg(offsets, values, fit=None, title="branch", ylabel="|u|_2"):
    """Log-log plot of ``values`` against ``offsets = lam - lam_1``, with an
    optional fitted line ``(slope, intercept)`` in natural logs."""
    lx = np.log10(np.asarray(offsets, float))
    ly = np.log10(np.asarray(values, float))
    ax = _Axes(lx, ly)
    out = _header(title)
    out += ax.frame("lambda - lambda_1", ylabel, _log_ticks(ax.x0, ax.x1), _log_ticks(ax.y0, ax.y1))
    out.append(ax.polyline(lx, ly, "#1f4e9c"))
    for a, b in zip(ax.px(lx), ax.py(ly)):
        out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="#1f4e9c"/>')
    if fit is not None:
        slope, intercept = fit
        fx = np.array([lx.min(), lx.max()])
        fy = (slope * fx * np.log(10) + intercept) / np.log(10)
        out.append(ax.polyline(fx, fy, "#c0392b", dash="6,4"))
        out.append(f'<text x="{_W - _PAD - 5}" y="{_PAD + 16}" text-anchor="end" fill="#c0392b">'
                   f"slope {slope:.4f}</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def profile_svg(grid, u, title="profile"):
    """Line plot of a 1D field, or a shaded cell map of a 2D field."""
    full = grid.full_values(u)
    out = _header(title)
    if grid.dim == 1:
        x = grid.node_coords[:, 0]
        ax = _Axes(x, full)
        out += ax.frame("x", "u", _linear_ticks(ax.x0, ax.x1), _linear_ticks(ax.y0, ax.y1))
        out.append(ax.polyline(x, full, "#1f4e9c"))
    else:
        nx, ny = full.shape
        big = max(float(np.abs(full).max()), np.finfo(float).tiny)
        cw = (_W - 2 * _PAD) / nx
        ch = (_H - 2 * _PAD) / ny
        for i in range(nx):
            for j in range(ny):
                t = full[i, j] / big
                fade = int(round(255 * (1 - abs(t))))
                # red for positive values, blue for negative ones
                color = f"#ff{fade:02x}{fade:02x}" if t >= 0 else f"#{fade:02x}{fade:02x}ff"
                out.append(f'<rect x="{_fmt(_PAD + i * cw)}" y="{_fmt(_H - _PAD - (j + 1) * ch)}" '
                           f'width="{_fmt(cw)}" height="{_fmt(ch)}" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
