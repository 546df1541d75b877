"""Minimal SVG line plots: one <polyline> per document, plus axes and labels.

Matplotlib's SVG backend draws curves as <path> elements, so these plots
are assembled directly with ElementTree to keep the output small and the
structure predictable (exactly one polyline for the data series).
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Sequence

import numpy as np

WIDTH, HEIGHT = 480, 360
MARGIN = 56


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def line_plot(
    x: Sequence[float],
    y: Sequence[float],
    title: str,
    xlabel: str,
    ylabel: str,
    logx: bool = False,
    logy: bool = False,
    reference: tuple[tuple[float, float], tuple[float, float]] | None = None,
) -> ET.Element:
    """Build the SVG tree for a single data series.

    ``reference`` is an optional straight segment ((x0, y0), (x1, y1)) in
    data coordinates, drawn as a dashed <line> (used for fitted laws).
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    keep = np.isfinite(xs) & np.isfinite(ys)
    if logx:
        keep &= xs > 0
    if logy:
        keep &= ys > 0
    xs, ys = xs[keep], ys[keep]
    if xs.size < 2:
        raise ValueError("need at least two finite points to plot")
    tx = np.log10 if logx else (lambda a: a)
    ty = np.log10 if logy else (lambda a: a)
    X, Y = tx(xs), ty(ys)
    x0, x1 = float(X.min()), float(X.max())
    y0, y1 = float(Y.min()), float(Y.max())
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5

    def px(u):
        return MARGIN + (u - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def py(v):
        return HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(WIDTH),
                     height=str(HEIGHT), viewBox=f"0 0 {WIDTH} {HEIGHT}")
    ET.SubElement(svg, "title").text = title
    ET.SubElement(svg, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
    axes = ET.SubElement(svg, "g", stroke="black", attrib={"stroke-width": "1"})
    ET.SubElement(axes, "line", x1=str(MARGIN), y1=str(HEIGHT - MARGIN),
                  x2=str(WIDTH - MARGIN), y2=str(HEIGHT - MARGIN))
    ET.SubElement(axes, "line", x1=str(MARGIN), y1=str(MARGIN),
                  x2=str(MARGIN), y2=str(HEIGHT - MARGIN))

    labels = ET.SubElement(svg, "g", attrib={"font-family": "sans-serif", "font-size": "11"})
    for u in _ticks(x0, x1):
        text = f"1e{u:.1f}" if logx else f"{u:.3g}"
        ET.SubElement(labels, "text", x=f"{px(u):.2f}", y=str(HEIGHT - MARGIN + 16),
                      attrib={"text-anchor": "middle"}).text = text
    for v in _ticks(y0, y1):
        text = f"1e{v:.1f}" if logy else f"{v:.3g}"
        ET.SubElement(labels, "text", x=str(MARGIN - 6), y=f"{py(v) + 4:.2f}",
                      attrib={"text-anchor": "end"}).text = text
    ET.SubElement(labels, "text", x=str(WIDTH // 2), y=str(HEIGHT - 12),
                  attrib={"text-anchor": "middle"}).text = xlabel
    ET.SubElement(labels, "text", x="14", y=str(HEIGHT // 2),
                  transform=f"rotate(-90 14 {HEIGHT // 2})",
                  attrib={"text-anchor": "middle"}).text = ylabel
    ET.SubElement(labels, "text", x=str(WIDTH // 2), y="22",
                  attrib={"text-anchor": "middle", "font-size": "13"}).text = title

    if reference is not None:
        (rx0, ry0), (rx1, ry1) = reference
        if (not logx or min(rx0, rx1) > 0) and (not logy or min(ry0, ry1) > 0):
            ET.SubElement(svg, "line",
                          x1=f"{px(float(tx(rx0))):.2f}", y1=f"{py(float(ty(ry0))):.2f}",
                          x2=f"{px(float(tx(rx1))):.2f}", y2=f"{py(float(ty(ry1))):.2f}",
                          stroke="gray", attrib={"stroke-dasharray": "4 3"})

    points = " ".join(f"{px(u):.2f},{py(v):.2f}" for u, v in zip(X, Y))
    ET.SubElement(svg, "polyline", points=points, fill="none", stroke="#1f4e9c",
                  attrib={"stroke-width": "1.5"})
    return svg


def write_svg(path: Path, tree: ET.Element) -> Path:
    path = Path(path)
    data = ET.tostring(tree, encoding="unicode")
    path.write_text('<?xml version="1.0" encoding="UTF-8"?>\n' + data + "\n")
    return path


def decimate(x: np.ndarray, y: np.ndarray, max_points: int = 800) -> tuple[np.ndarray, np.ndarray]:
    """Keep at most ``max_points`` evenly spaced samples (endpoints included)."""
    if x.size <= max_points:
        return x, y
    idx = np.unique(np.linspace(0, x.size - 1, max_points).round().astype(int))
    return x[idx], y[idx]


