"""Minimal SVG rendering for run outputs (no plotting dependency)."""
import math
from typing import Dict, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")

W, H = 640, 440
ML, MR, MT, MB = 64, 20, 34, 46


def _header(w=W, h=H):
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">',
            f'<rect width="{w}" height="{h}" fill="white"/>']


def _ticks(lo, hi, n=5):
    if not hi > lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _axes(out, xlo, xhi, ylo, yhi, title, xlabel, ylabel, w=W, h=H):
    pw, ph = w - ML - MR, h - MT - MB

    def X(v):
        return ML + (v - xlo) / (xhi - xlo) * pw

    def Y(v):
        return MT + ph - (v - ylo) / (yhi - ylo) * ph

    out.append(f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    for t in _ticks(xlo, xhi):
        out.append(f'<line x1="{X(t):.1f}" y1="{MT + ph}" x2="{X(t):.1f}" y2="{MT + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{X(t):.1f}" y="{MT + ph + 17}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(ylo, yhi):
        out.append(f'<line x1="{ML - 4}" y1="{Y(t):.1f}" x2="{ML}" y2="{Y(t):.1f}" stroke="#444"/>')
        out.append(f'<text x="{ML - 7}" y="{Y(t) + 4:.1f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{w / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{ML + pw / 2:.0f}" y="{h - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{MT + ph / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {MT + ph / 2:.0f})">{escape(ylabel)}</text>')
    return X, Y


def _polyline(X, Y, x, y, color, width=1.5):
    pts = " ".join(f"{X(a):.1f},{Y(b):.1f}" for a, b in zip(x, y) if np.isfinite(a) and np.isfinite(b))
    if not pts:
        return ""
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>'


def series_svg(series: Dict[str, Tuple[Sequence[float], Sequence[float]]], title: str,
               xlabel: str = "step", ylabel: str = "") -> str:
    """Line chart of named (x, y) series."""
    out = _header()
    xs = [np.asarray(x, dtype=float) for x, _ in series.values()]
    ys = [np.asarray(y, dtype=float) for _, y in series.values()]
    fx = np.concatenate(xs) if xs else np.zeros(0)
    fy = np.concatenate(ys) if ys else np.zeros(0)
    fx, fy = fx[np.isfinite(fx)], fy[np.isfinite(fy)]
    if fx.size == 0 or fy.size == 0:
        out.append(f'<text x="{W / 2}" y="{H / 2}" text-anchor="middle">{escape(title)}: no data</text>')
        return "\n".join(out + ["</svg>"]) + "\n"
    xlo, xhi = float(fx.min()), float(fx.max())
    ylo, yhi = min(0.0, float(fy.min())), float(fy.max())
    if xhi <= xlo:
        xhi = xlo + 1.0
    if yhi <= ylo:
        yhi = ylo + 1.0
    X, Y = _axes(out, xlo, xhi, ylo, yhi * 1.05, title, xlabel, ylabel)
    for k, (name, x, y) in enumerate(zip(series, xs, ys)):
        c = PALETTE[k % len(PALETTE)]
        out.append(_polyline(X, Y, x, y, c))
        out.append(f'<text x="{W - MR - 6}" y="{MT + 16 + 15 * k}" text-anchor="end" fill="{c}">{escape(name)}</text>')
    return "\n".join(out + ["</svg>"]) + "\n"


def field_svg(density: np.ndarray, extent: Tuple[float, float, float, float],
              trajectories: np.ndarray = None, samples: Sequence[np.ndarray] = (),
              title: str = "trajectories") -> str:
    """Heat layer of ``density`` (rows along y) with agent paths and sample dots.

    ``trajectories`` has shape (steps + 1, n_agents, 2); ``samples`` holds
    one (n, 2) position array per agent.
    """
    xmin, xmax, ymin, ymax = extent
    side = H - MT - MB
    w = ML + side + MR
    out = _header(w, H)
    X, Y = _axes(out, xmin, xmax, ymin, ymax, title, "x [m]", "y [m]", w, H)
    ny, nx = density.shape
    top = float(density.max()) if density.size else 0.0
    cw, ch = (xmax - xmin) / nx, (ymax - ymin) / ny
    if top > 0:
        for r in range(ny):
            for c in range(nx):
                a = density[r, c] / top
                if a < 0.02:
                    continue
                x0, y1 = xmin + c * cw, ymin + (r + 1) * ch
                out.append(f'<rect x="{X(x0):.1f}" y="{Y(y1):.1f}" width="{X(x0 + cw) - X(x0) + 0.3:.1f}" '
                           f'height="{Y(y1 - ch) - Y(y1) + 0.3:.1f}" fill="#e34a33" fill-opacity="{0.85 * a:.3f}"/>')
    for i, pts in enumerate(samples):
        c = PALETTE[i % len(PALETTE)]
        for x, y in np.asarray(pts, dtype=float).reshape(-1, 2):
            out.append(f'<circle cx="{X(x):.1f}" cy="{Y(y):.1f}" r="1.6" fill="{c}" fill-opacity="0.6"/>')
    if trajectories is not None and trajectories.size:
        for i in range(trajectories.shape[1]):
            c = PALETTE[i % len(PALETTE)]
            out.append(_polyline(X, Y, trajectories[:, i, 0], trajectories[:, i, 1], c, 1.2))
            x0, y0 = trajectories[0, i]
            out.append(f'<circle cx="{X(x0):.1f}" cy="{Y(y0):.1f}" r="3.5" fill="none" stroke="{c}"/>')
    return "\n".join(out + ["</svg>"]) + "\n"
