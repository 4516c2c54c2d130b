"""Static SVG figures: parallel coordinates, clustered heatmap, CH curve.

Output is plain SVG 1.1 text built deterministically (fixed number formatting,
no timestamps), so identical inputs give byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .clustering import CHStats, FeatureMatrix, MergeTree, cut_tree
from .errors import KOutOfRange, TooFewFeatures


@dataclass(frozen=True)
class PlotStyle:
    width: int = 800
    height: int = 480
    margin: int = 50
    font_family: str = "Helvetica, Arial, sans-serif"
    axis_labels: tuple[str, ...] | None = None
    low_color: tuple[int, int, int] = (0, 0, 255)
    high_color: tuple[int, int, int] = (255, 0, 0)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("width and height must be positive")
        if self.margin < 0 or 2 * self.margin >= min(self.width, self.height):
            raise ValueError("margin does not leave room to draw")

    def labels_for(self, names) -> list[str]:
        if self.axis_labels is None:
            return list(names)
        if len(self.axis_labels) != len(names):
            raise ValueError("axis_labels must match the number of features")
        return list(self.axis_labels)


def _f(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _hex(rgb) -> str:
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def ramp_color(t: float, style: PlotStyle) -> str:
    """Blue (t=0) to red (t=1) by linear interpolation in RGB."""
    t = min(max(t, 0.0), 1.0)
    return _hex(round(lo + (hi - lo) * t) for lo, hi in zip(style.low_color, style.high_color))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0
        i = j + 1
    return ranks


def rank_colors(values, style: PlotStyle) -> list[str]:
    values = np.asarray(values, dtype=float)
    if len(values) == 1:
        return [ramp_color(0.5, style)]
    ranks = _average_ranks(values)
    return [ramp_color(r / (len(values) - 1), style) for r in ranks]


def _display_scale(values: np.ndarray) -> np.ndarray:
    lo = values.min(axis=0)
    span = values.max(axis=0) - lo
    return np.where(span > 0, (values - lo) / np.where(span > 0, span, 1.0), 0.0)


class _Doc:
    def __init__(self, style: PlotStyle, title: str | None = None):
        self.style = style
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            (
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                f'width="{style.width}" height="{style.height}" '
                f'viewBox="0 0 {style.width} {style.height}" '
                f"font-family={quoteattr(style.font_family)} font-size=\"11\">"
            ),
        ]
        if title:
            self.parts.append(f"<title>{escape(title)}</title>")

    def add(self, element: str):
        self.parts.append(element)

    def text(self, cls: str, x: float, y: float, content: str, anchor: str = "middle", extra: str = ""):
        self.parts.append(
            f'<text class="{cls}" x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{extra}>{escape(content)}</text>'
        )

    def line(self, cls: str, x1, y1, x2, y2, stroke="#444444", extra=""):
        self.parts.append(
            f'<line class="{cls}" x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" stroke="{stroke}"{extra}/>'
        )

    def polyline(self, cls: str, points, stroke: str, extra=""):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
        self.parts.append(f'<polyline class="{cls}" points="{pts}" fill="none" stroke="{stroke}"{extra}/>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def parallel_coordinates_svg(
    m: FeatureMatrix,
    color_by,
    style: PlotStyle | None = None,
    title: str | None = None,
) -> str:
    """One vertical axis per feature and one polyline per row.

    Axes are min-max scaled for display with the raw extremes printed at the
    ends; lines are colored by the rank of ``color_by`` (blue lowest, red
    highest). Works for meals and for cluster-mean tables alike.
    """
    style = style or PlotStyle()
    values = np.asarray(m.values, dtype=float)
    n, n_feat = values.shape
    if n_feat < 2:
        raise TooFewFeatures(f"parallel coordinates need at least 2 features, got {n_feat}")
    if n < 1:
        raise ValueError("nothing to plot")
    color_by = np.asarray(color_by, dtype=float)
    if color_by.shape != (n,):
        raise ValueError("color_by must have one value per row")

    labels = style.labels_for(m.feature_names)
    left, right = style.margin, style.width - style.margin
    top, bottom = style.margin, style.height - style.margin
    xs = [left + j * (right - left) / (n_feat - 1) for j in range(n_feat)]
    scaled = _display_scale(values)
    lo, hi = values.min(axis=0), values.max(axis=0)

    doc = _Doc(style, title)
    doc.add('<g class="axes">')
    for j, x in enumerate(xs):
        doc.line("axis", x, top, x, bottom)
        doc.text("axis-label", x, bottom + 28, labels[j])
        doc.text("axis-max", x, top - 6, f"{hi[j]:.4g}")
        doc.text("axis-min", x, bottom + 14, f"{lo[j]:.4g}")
    doc.add("</g>")
    doc.add('<g class="series">')
    for row, color in zip(scaled, rank_colors(color_by, style)):
        points = [(x, bottom - v * (bottom - top)) for x, v in zip(xs, row)]
        doc.polyline("series", points, color, ' stroke-width="1.5" stroke-opacity="0.8"')
    doc.add("</g>")
    return doc.render()


def _gray(v: float) -> str:
    level = round(255 - 215 * min(max(v, 0.0), 1.0))
    return _hex((level, level, level))


def heatmap_dendrogram_svg(
    m: FeatureMatrix,
    t: MergeTree,
    k: int,
    style: PlotStyle | None = None,
    title: str | None = None,
) -> str:
    """Heatmap with rows in dendrogram leaf order and the tree drawn to scale on the left.

    Darker cells hold larger values (per-column display scaling). Block
    separators mark the cut into ``k`` clusters.
    """
    style = style or PlotStyle()
    n = t.n_leaves
    if m.n_rows != n:
        raise ValueError("tree and feature matrix sizes differ")
    if not 1 <= k <= n:
        raise KOutOfRange(f"k must be in 1..{n}, got {k}")
    n_feat = len(m.feature_names)
    labels = style.labels_for(m.feature_names)

    left, right = style.margin, style.width - style.margin
    top, bottom = style.margin + 20, style.height - style.margin
    dend_w = 0.3 * (right - left)
    heat_left = left + dend_w + 4
    cell_w = (right - heat_left) / max(n_feat, 1)
    row_h = (bottom - top) / n

    order = t.leaf_order()
    position = {leaf: r for r, leaf in enumerate(order)}
    scaled = _display_scale(np.asarray(m.values, dtype=float))
    heights = t.heights
    hmax = float(heights.max()) if len(heights) and heights.max() > 0 else 1.0

    def x_of(h):
        return left + dend_w - (h / hmax) * dend_w

    doc = _Doc(style, title)
    doc.add('<g class="column-labels">')
    for j, name in enumerate(labels):
        doc.text("column-label", heat_left + (j + 0.5) * cell_w, top - 6, name)
    doc.add("</g>")

    doc.add('<g class="heatmap">')
    for r, leaf in enumerate(order):
        y = top + r * row_h
        for j in range(n_feat):
            doc.add(
                f'<rect class="cell" x="{_f(heat_left + j * cell_w)}" y="{_f(y)}" '
                f'width="{_f(cell_w)}" height="{_f(row_h)}" fill="{_gray(scaled[leaf, j])}"/>'
            )
    doc.add("</g>")

    node_y = {leaf: top + (position[leaf] + 0.5) * row_h for leaf in range(n)}
    doc.add('<g class="dendrogram" fill="none" stroke="#222222">')
    for s, mg in enumerate(t.merges):
        node = n + s
        yl, yr = node_y[mg.left], node_y[mg.right]
        node_y[node] = (yl + yr) / 2
        xl, xr, xn = x_of(t.node_height(mg.left)), x_of(t.node_height(mg.right)), x_of(mg.height)
        doc.add(
            f'<path class="merge" d="M{_f(xl)},{_f(yl)} H{_f(xn)} V{_f(yr)} H{_f(xr)}"/>'
        )
    doc.add("</g>")

    cut = cut_tree(t, k).labels
    doc.add('<g class="cuts">')
    for r in range(1, n):
        if cut[order[r]] != cut[order[r - 1]]:
            y = top + r * row_h
            doc.line("cut", left, y, right, y, stroke="#d62728", extra=' stroke-width="1.5"')
    doc.add("</g>")
    return doc.render()


def ch_curve_svg(stats: CHStats, style: PlotStyle | None = None, title: str | None = None) -> str:
    """CH against cluster count with the maximizer marked, above the B and W curves.

    ``k = 1`` keeps its tick but has no point (CH is undefined there);
    an infinite CH is drawn at the top of the panel.
    """
    style = style or PlotStyle()
    if len(stats.ks) < 2:
        raise ValueError("need CH values for at least 2 cluster counts")
    left, right = style.margin, style.width - style.margin
    top, bottom = style.margin, style.height - style.margin
    gap = 30
    mid = (top + bottom) / 2
    k_hi = max(stats.ks)

    def x_of(k):
        return left + (k - 1) * (right - left) / max(k_hi - 1, 1)

    finite = [c for c in stats.ch if math.isfinite(c)]
    ch_top = max(finite) * 1.05 if finite and max(finite) > 0 else 1.0

    def y_ch(c):
        v = 1.0 if not math.isfinite(c) else c / ch_top
        return mid - gap / 2 - v * (mid - gap / 2 - top)

    ss_top = stats.total if stats.total > 0 else 1.0

    def y_ss(v):
        return bottom - (v / ss_top) * (bottom - (mid + gap / 2))

    doc = _Doc(style, title)
    doc.add('<g class="axes">')
    doc.line("axis", left, top, left, mid - gap / 2)
    doc.line("axis", left, mid - gap / 2, right, mid - gap / 2)
    doc.line("axis", left, mid + gap / 2, left, bottom)
    doc.line("axis", left, bottom, right, bottom)
    for k in range(1, k_hi + 1):
        doc.text("tick", x_of(k), bottom + 14, str(k))
    doc.text("axis-title", (left + right) / 2, bottom + 30, "number of clusters")
    doc.text("axis-title", left - 8, top + 10, "CH", anchor="end")
    doc.text("axis-title", left - 8, mid + gap / 2 + 10, "SS", anchor="end")
    doc.text("undefined", x_of(1), mid - gap / 2 - 6, "n/a")
    doc.add("</g>")

    doc.polyline("ch", [(x_of(k), y_ch(c)) for k, c in zip(stats.ks, stats.ch)], "#1f77b4", ' stroke-width="2"')
    best = stats.best_k
    best_ch = stats.ch[stats.ks.index(best)]
    doc.add(
        f'<circle class="best" cx="{_f(x_of(best))}" cy="{_f(y_ch(best_ch))}" r="5" fill="#d62728"/>'
    )
    doc.text("best-label", x_of(best), y_ch(best_ch) - 9, f"k={best}")
    doc.polyline("between", [(x_of(k), y_ss(b)) for k, b in zip(stats.ks, stats.between)], "#2ca02c")
    doc.polyline("within", [(x_of(k), y_ss(w)) for k, w in zip(stats.ks, stats.within)], "#ff7f0e")
    doc.text("legend", right, mid + gap / 2 + 10, "between (green) / within (orange)", anchor="end")
    return doc.render()
