"""Standalone SVG renderings of attribution results plus plot-ready CSV export.

Three plot families: relevance curves (one line per feature over time),
contribution plots (stacked normalized areas with a time-averaged side bar),
and force plots (signed stacked bars with direction arrows at representative
times). Rendering is pure string building: byte-identical output on rerun.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .attribution import Attribution, normalized_contributions, time_averaged_importance
from .errors import ConfigError

PALETTE = (
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
    "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd",
)

PLOT_DATA_SCHEMA = "survgrad-plotdata-v1"


@dataclass
class PlotSpec:
    kind: str  # relevance_curves | contribution | force
    instance: int = 0
    width: int = 720
    height: int = 420
    palette: tuple = PALETTE
    force_points: int = 10
    title: str = ""

    def __post_init__(self):
        if self.kind not in ("relevance_curves", "contribution", "force"):
            raise ConfigError(f"unknown plot kind {self.kind!r}")
        if self.force_points < 2:
            raise ConfigError("force plots need at least 2 time slots")


def _num(v: float) -> str:
    return f"{v:.2f}"


class _Svg:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>\n'
        ]

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"{d}/>\n'
        )

    def polyline(self, pts, stroke, width=1.5, dash=None):
        coords = " ".join(f"{_num(x)},{_num(y)}" for x, y in pts)
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}"{d}/>\n'
        )

    def polygon(self, pts, fill, opacity=None):
        coords = " ".join(f"{_num(x)},{_num(y)}" for x, y in pts)
        o = f' fill-opacity="{opacity}"' if opacity is not None else ""
        self.parts.append(f'<polygon points="{coords}" fill="{fill}"{o}/>\n')

    def rect(self, x, y, w, h, fill, opacity=None):
        o = f' fill-opacity="{opacity}"' if opacity is not None else ""
        self.parts.append(
            f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(w)}" height="{_num(h)}" '
            f'fill="{fill}"{o}/>\n'
        )

    def text(self, x, y, s, size=11, anchor="start", fill="#000000"):
        self.parts.append(
            f'<text x="{_num(x)}" y="{_num(y)}" font-size="{size}" font-family="sans-serif" '
            f'text-anchor="{anchor}" fill="{fill}">{escape(str(s))}</text>\n'
        )

    def to_string(self) -> str:
        return "".join(self.parts) + "</svg>\n"


@dataclass
class _Frame:
    """Maps data coordinates into a pixel box."""

    x0: float
    y0: float
    x1: float
    y1: float
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def x(self, v):
        span = self.xmax - self.xmin or 1.0
        return self.x0 + (v - self.xmin) / span * (self.x1 - self.x0)

    def y(self, v):
        span = self.ymax - self.ymin or 1.0
        return self.y1 - (v - self.ymin) / span * (self.y1 - self.y0)


def _draw_axes(doc: _Svg, fr: _Frame, n_ticks: int = 5):
    doc.line(fr.x0, fr.y1, fr.x1, fr.y1, "#333333")
    doc.line(fr.x0, fr.y0, fr.x0, fr.y1, "#333333")
    for v in np.linspace(fr.xmin, fr.xmax, n_ticks):
        px = fr.x(v)
        doc.line(px, fr.y1, px, fr.y1 + 4, "#333333")
        doc.text(px, fr.y1 + 16, f"{v:.2f}", size=10, anchor="middle")
    for v in np.linspace(fr.ymin, fr.ymax, n_ticks):
        py = fr.y(v)
        doc.line(fr.x0 - 4, py, fr.x0, py, "#333333")
        doc.text(fr.x0 - 7, py + 3, f"{v:.2f}", size=10, anchor="end")


def _legend(doc: _Svg, fr: _Frame, labels, colors):
    y = fr.y0 + 8
    for label, color in zip(labels, colors):
        doc.rect(fr.x1 + 12, y - 8, 10, 10, color)
        doc.text(fr.x1 + 26, y, label, size=10)
        y += 16


def _check_instance(attr: Attribution, instance: int):
    if not 0 <= instance < attr.n:
        raise ConfigError(f"instance {instance} not in attribution (n={attr.n})")


def render_relevance_curves(spec: PlotSpec, attr: Attribution) -> str:
    """One polyline per feature over the grid; prediction curves overlaid when present."""
    _check_instance(attr, spec.instance)
    i = spec.instance
    t = attr.grid.points
    series = [attr.values[i, j, :] for j in range(attr.p)]
    labels = list(attr.feature_names)
    colors = [spec.palette[j % len(spec.palette)] for j in range(attr.p)]
    overlays = []
    for key, dash, color in (("pred", None, "#333333"), ("pred_ref", "6,3", "#777777"),
                             ("pred_diff", "2,2", "#000000")):
        arr = getattr(attr, key)
        if arr is not None:
            overlays.append((key, arr[i], dash, color))

    stacked = np.concatenate(series + [o[1] for o in overlays] + [np.zeros(1)])
    ymin, ymax = float(stacked.min()), float(stacked.max())
    pad = 0.05 * (ymax - ymin or 1.0)
    doc = _Svg(spec.width, spec.height)
    fr = _Frame(55, 30, spec.width - 130, spec.height - 45,
                float(t[0]), float(t[-1]), ymin - pad, ymax + pad)
    _draw_axes(doc, fr)
    if fr.ymin < 0.0 < fr.ymax:
        doc.line(fr.x0, fr.y(0.0), fr.x1, fr.y(0.0), "#aaaaaa", dash="4,4")
    for vals, color in zip(series, colors):
        doc.polyline([(fr.x(tv), fr.y(v)) for tv, v in zip(t, vals)], color)
    for key, vals, dash, color in overlays:
        doc.polyline([(fr.x(tv), fr.y(v)) for tv, v in zip(t, vals)], color, width=1.2, dash=dash)
        labels.append(key)
        colors.append(color)
    _legend(doc, fr, labels, colors)
    doc.text(fr.x0, 18, spec.title or f"{attr.method} relevance, instance {i}", size=12)
    doc.text((fr.x0 + fr.x1) / 2, spec.height - 8, "time", size=10, anchor="middle")
    return doc.to_string()


def render_contribution_plot(spec: PlotSpec, attr: Attribution) -> str:
    """Stacked normalized |contributions| over time + time-averaged side bar."""
    _check_instance(attr, spec.instance)
    i = spec.instance
    t = attr.grid.points
    norm = normalized_contributions(attr)[i]  # (p, T)
    avg = time_averaged_importance(attr)[i]  # (p,)
    cum = np.vstack([np.zeros(norm.shape[1]), np.cumsum(norm, axis=0)])  # (p+1, T)
    colors = [spec.palette[j % len(spec.palette)] for j in range(attr.p)]

    doc = _Svg(spec.width, spec.height)
    bar_w = 40
    fr = _Frame(55, 30, spec.width - 170 - bar_w, spec.height - 45,
                float(t[0]), float(t[-1]), 0.0, 1.0)
    _draw_axes(doc, fr)
    for j in range(attr.p):
        upper = [(fr.x(tv), fr.y(v)) for tv, v in zip(t, cum[j + 1])]
        lower = [(fr.x(tv), fr.y(v)) for tv, v in zip(t[::-1], cum[j][::-1])]
        doc.polygon(upper + lower, colors[j], opacity="0.85")
    # side bar of time-averaged importance, same stacking order
    bx = fr.x1 + 18
    base = fr.y1
    for j in range(attr.p):
        h = avg[j] * (fr.y1 - fr.y0)
        doc.rect(bx, base - h, bar_w, h, colors[j], opacity="0.85")
        base -= h
    doc.text(bx + bar_w / 2, fr.y1 + 16, "avg", size=10, anchor="middle")
    _legend(doc, _Frame(fr.x0, fr.y0, bx + bar_w, fr.y1, 0, 1, 0, 1),
            list(attr.feature_names), colors)
    doc.text(fr.x0, 18, spec.title or f"{attr.method} contributions, instance {i}", size=12)
    doc.text((fr.x0 + fr.x1) / 2, spec.height - 8, "time", size=10, anchor="middle")
    return doc.to_string()


def render_force_plot(spec: PlotSpec, attr: Attribution) -> str:
    """Signed stacked bars with direction arrows at equidistant grid times.

    The prediction-to-reference difference is overlaid as a black line; bar
    segments shorter than one pixel are folded into a per-slot "+k" marker.
    """
    if attr.pred_diff is None:
        raise ConfigError(
            "force plots need pred_diff: use a difference-to-reference method "
            "(path-integrated or background-expectation attributions)"
        )
    _check_instance(attr, spec.instance)
    i = spec.instance
    t = attr.grid.points
    slots = np.unique(np.round(np.linspace(0, t.size - 1, spec.force_points)).astype(int))
    vals = attr.values[i]  # (p, T)
    diff = attr.pred_diff[i]
    colors = [spec.palette[j % len(spec.palette)] for j in range(attr.p)]

    pos_tot = np.clip(vals, 0, None).sum(axis=0)
    neg_tot = np.clip(vals, None, 0).sum(axis=0)
    ymax = max(float(pos_tot.max()), float(diff.max()), 0.0)
    ymin = min(float(neg_tot.min()), float(diff.min()), 0.0)
    pad = 0.08 * ((ymax - ymin) or 1.0)

    doc = _Svg(spec.width, spec.height)
    fr = _Frame(55, 30, spec.width - 130, spec.height - 45,
                float(t[0]), float(t[-1]), ymin - pad, ymax + pad)
    _draw_axes(doc, fr)
    doc.line(fr.x0, fr.y(0.0), fr.x1, fr.y(0.0), "#aaaaaa", dash="4,4")

    bar_w = max(6.0, (fr.x1 - fr.x0) / (len(slots) * 3))
    for k in slots:
        cx = fr.x(t[k])
        doc.line(cx, fr.y(0.0) - 3, cx, fr.y(0.0) + 3, "#444444", width=1.2)  # slot tick
        up_base, down_base = 0.0, 0.0
        hidden = 0
        for j in range(attr.p):
            v = vals[j, k]
            if v >= 0:
                y_top, y_bot = fr.y(up_base + v), fr.y(up_base)
                up_base += v
            else:
                y_top, y_bot = fr.y(down_base), fr.y(down_base + v)
                down_base += v
            h = y_bot - y_top
            if h < 1.0:
                hidden += 1
                continue
            doc.rect(cx - bar_w / 2, y_top, bar_w, h, colors[j], opacity="0.9")
            # direction arrow: up for positive, down for negative contributions
            ax = cx + bar_w / 2 + 4
            mid = (y_top + y_bot) / 2
            if v >= 0:
                doc.polygon([(ax, mid + 3), (ax + 6, mid + 3), (ax + 3, mid - 3)], colors[j])
            else:
                doc.polygon([(ax, mid - 3), (ax + 6, mid - 3), (ax + 3, mid + 3)], colors[j])
            if h >= 10.0:
                doc.text(cx, mid + 3, f"{v:.3f}", size=8, anchor="middle", fill="#ffffff")
        if hidden:
            doc.text(cx, fr.y(up_base) - 4, f"+{hidden} other", size=8, anchor="middle",
                     fill="#555555")
    doc.polyline([(fr.x(tv), fr.y(v)) for tv, v in zip(t, diff)], "#000000", width=1.6)
    _legend(doc, fr, list(attr.feature_names) + ["pred_diff"], colors + ["#000000"])
    doc.text(fr.x0, 18, spec.title or f"{attr.method} force plot, instance {i}", size=12)
    doc.text((fr.x0 + fr.x1) / 2, spec.height - 8, "time", size=10, anchor="middle")
    return doc.to_string()


def render(spec: PlotSpec, attr: Attribution) -> str:
    if spec.kind == "relevance_curves":
        return render_relevance_curves(spec, attr)
    if spec.kind == "contribution":
        return render_contribution_plot(spec, attr)
    return render_force_plot(spec, attr)


def export_plot_data(attr: Attribution, directory) -> list[str]:
    """Write long-format CSVs for each plot family; returns the file paths.

    Files carry a schema comment line; ``relevance_curves.csv`` round-trips the
    raw tensor, ``contributions.csv`` the normalized values, ``curves.csv`` the
    prediction/reference/difference curves when present.
    """
    os.makedirs(directory, exist_ok=True)
    written = []

    path = os.path.join(directory, "relevance_curves.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {PLOT_DATA_SCHEMA} relevance method={attr.method}\n")
        fh.write("instance,feature,time,value\n")
        for i in range(attr.n):
            for j, name in enumerate(attr.feature_names):
                for k, tv in enumerate(attr.grid.points):
                    fh.write(f"{i},{name},{tv:.17g},{attr.values[i, j, k]:.17g}\n")
    written.append(path)

    path = os.path.join(directory, "contributions.csv")
    norm = normalized_contributions(attr) if attr.n else np.zeros_like(attr.values)
    avg = time_averaged_importance(attr) if attr.n else np.zeros(attr.values.shape[:2])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {PLOT_DATA_SCHEMA} contributions method={attr.method}\n")
        fh.write("instance,feature,time,normalized,time_averaged\n")
        for i in range(attr.n):
            for j, name in enumerate(attr.feature_names):
                for k, tv in enumerate(attr.grid.points):
                    fh.write(
                        f"{i},{name},{tv:.17g},{norm[i, j, k]:.17g},{avg[i, j]:.17g}\n"
                    )
    written.append(path)

    if attr.pred is not None:
        path = os.path.join(directory, "curves.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# {PLOT_DATA_SCHEMA} curves method={attr.method}\n")
            fh.write("instance,time,pred,pred_ref,pred_diff\n")
            for i in range(attr.n):
                for k, tv in enumerate(attr.grid.points):
                    ref = f"{attr.pred_ref[i, k]:.17g}" if attr.pred_ref is not None else ""
                    dif = f"{attr.pred_diff[i, k]:.17g}" if attr.pred_diff is not None else ""
                    fh.write(f"{i},{tv:.17g},{attr.pred[i, k]:.17g},{ref},{dif}\n")
        written.append(path)
    return written


def load_relevance_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Read ``relevance_curves.csv`` back into (values tensor, grid, feature names)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if PLOT_DATA_SCHEMA not in header:
            raise ValueError(f"{path}: unknown plot-data schema")
        fh.readline()  # column header
        for line in fh:
            inst, feat, tv, val = line.strip().split(",")
            rows.append((int(inst), feat, float(tv), float(val)))
    if not rows:
        return np.zeros((0, 0, 0)), np.zeros(0), []
    instances = sorted({r[0] for r in rows})
    features = list(dict.fromkeys(r[1] for r in rows))
    times = sorted({r[2] for r in rows})
    f_idx = {f: j for j, f in enumerate(features)}
    t_idx = {t: k for k, t in enumerate(times)}
    values = np.zeros((len(instances), len(features), len(times)))
    for inst, feat, tv, val in rows:
        values[inst, f_idx[feat], t_idx[tv]] = val
    return values, np.asarray(times), features
