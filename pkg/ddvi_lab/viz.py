# -*- coding: utf-8 -*-
"""SVG scatter plots of 2-D latents, one color per class."""
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .exceptions import ContractViolation

SVG_NS = "http://www.w3.org/2000/svg"

# 26 colors that stay distinguishable side by side.
PALETTE = (
    "#f0a3ff", "#0075dc", "#993f00", "#4c005c", "#191919", "#005c31", "#2bce48", "#ffcc99", "#808080",
    "#94ffb5", "#8f7c00", "#9dcc00", "#c20088", "#003380", "#ffa405", "#ffa8bb", "#426600", "#ff0010",
    "#5ef1f2", "#00998f", "#e0ff66", "#740aff", "#990000", "#ffff80", "#ffe100", "#ff5005",
)

WIDTH, HEIGHT = 640, 480
MARGIN = 50
LEGEND_WIDTH = 110
TICKS = 5


def _num(v):
    return "%.2f" % v


@dataclass
class ScatterPlot(object):
    points: np.ndarray
    labels: np.ndarray
    bounds: Tuple[float, float, float, float] = None  # xmin, xmax, ymin, ymax
    palette: Tuple[str, ...] = PALETTE
    title: str = ""
    classes: list = field(default_factory=list)

    @classmethod
    def from_points(cls, points, labels=None, title="", bounds=None):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1 and points.size == 0:
            points = points.reshape(0, 2)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ContractViolation("scatter plots need n x 2 points, got shape %s" % (points.shape,))
        labels = np.zeros(len(points), dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
        if len(labels) != len(points):
            raise ContractViolation("%d labels for %d points" % (len(labels), len(points)))
        if bounds is None:
            bounds = cls.auto_bounds(points)
        return cls(points, labels, tuple(float(b) for b in bounds), PALETTE, title,
                   [int(c) for c in np.unique(labels)])

    @staticmethod
    def auto_bounds(points, pad=0.05):
        if len(points) == 0:
            return (-1.0, 1.0, -1.0, 1.0)
        lo, hi = points.min(axis=0), points.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        lo, hi = lo - pad * span, hi + pad * span
        return (lo[0], hi[0], lo[1], hi[1])

    def color_of(self, label):
        return self.palette[self.classes.index(int(label)) % len(self.palette)]

    def _to_px(self, x, y):
        xmin, xmax, ymin, ymax = self.bounds
        plot_w = WIDTH - 2 * MARGIN - LEGEND_WIDTH
        plot_h = HEIGHT - 2 * MARGIN
        px = MARGIN + (x - xmin) / (xmax - xmin) * plot_w
        py = HEIGHT - MARGIN - (y - ymin) / (ymax - ymin) * plot_h
        return px, py

    def _axes(self, root):
        xmin, xmax, ymin, ymax = self.bounds
        axes = ET.SubElement(root, "g", {"id": "axes", "stroke": "#000000", "stroke-width": "1"})
        left, bottom = MARGIN, HEIGHT - MARGIN
        right, top = WIDTH - MARGIN - LEGEND_WIDTH, MARGIN
        ET.SubElement(axes, "rect", {"x": _num(left), "y": _num(top), "width": _num(right - left),
                                     "height": _num(bottom - top), "fill": "none"})
        labels = ET.SubElement(root, "g", {"id": "ticks", "font-family": "sans-serif", "font-size": "10"})
        for v in np.linspace(xmin, xmax, TICKS):
            px, _ = self._to_px(v, ymin)
            ET.SubElement(axes, "line", {"x1": _num(px), "y1": _num(bottom), "x2": _num(px), "y2": _num(bottom + 4)})
            text = ET.SubElement(labels, "text", {"x": _num(px), "y": _num(bottom + 16), "text-anchor": "middle"})
            text.text = "%.3g" % v
        for v in np.linspace(ymin, ymax, TICKS):
            _, py = self._to_px(xmin, v)
            ET.SubElement(axes, "line", {"x1": _num(left - 4), "y1": _num(py), "x2": _num(left), "y2": _num(py)})
            text = ET.SubElement(labels, "text", {"x": _num(left - 6), "y": _num(py + 3), "text-anchor": "end"})
            text.text = "%.3g" % v

    def to_element(self):
        root = ET.Element("svg", {"xmlns": SVG_NS, "width": str(WIDTH), "height": str(HEIGHT),
                                  "viewBox": "0 0 %d %d" % (WIDTH, HEIGHT)})
        if self.title:
            title = ET.SubElement(root, "text", {"x": _num(WIDTH / 2.0), "y": _num(MARGIN / 2.0),
                                                 "text-anchor": "middle", "font-family": "sans-serif",
                                                 "font-size": "14"})
            title.text = self.title
        self._axes(root)
        plot = ET.SubElement(root, "g", {"id": "points"})
        for (x, y), label in zip(self.points, self.labels):
            px, py = self._to_px(x, y)
            ET.SubElement(plot, "circle", {"cx": _num(px), "cy": _num(py), "r": "2", "fill": self.color_of(label),
                                           "fill-opacity": "0.7"})
        legend = ET.SubElement(root, "g", {"id": "legend", "font-family": "sans-serif", "font-size": "11"})
        x0 = WIDTH - MARGIN - LEGEND_WIDTH + 15
        for i, label in enumerate(self.classes):
            y = MARGIN + 10 + 16 * i
            entry = ET.SubElement(legend, "g", {"class": "legend-entry"})
            ET.SubElement(entry, "rect", {"x": _num(x0), "y": _num(y - 8), "width": "10", "height": "10",
                                          "fill": self.color_of(label)})
            text = ET.SubElement(entry, "text", {"x": _num(x0 + 16), "y": _num(y + 1)})
            text.text = "class %d" % label
        return root

    def to_svg(self):
        return ET.tostring(self.to_element(), encoding="utf-8", xml_declaration=True) + b"\n"

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_svg())
        return path


def emit_scatter(points, labels, out_path, title="", bounds: Optional[tuple] = None):
    """Write an SVG scatter of ``points`` (n x 2) colored by ``labels``.

    One circle per point, one legend entry per distinct label; identical input
    gives identical bytes.
    """
    return ScatterPlot.from_points(points, labels, title, bounds).save(out_path)
