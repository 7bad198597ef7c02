"""Euler-diagram SVG rendering and matplotlib report figures.

:func:`render_svg` writes the SVG by hand so the bytes depend only on the
ball parameters and the options.  Balls of dimension above two are drawn
by their first two coordinates.  The report figures use a private
``Figure`` with the Agg canvas, so no global pyplot state is touched.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Mapping
from xml.sax.saxutils import escape

from eulerball.geometry import Ball

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")


@dataclass(frozen=True)
class SvgOptions:
    width: int = 480
    margin: float = 0.05
    stroke_width: float = 1.5
    fill_opacity: float = 0.15
    font_size: int = 12
    labels: bool = True

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")
        if not 0 <= self.margin < 0.5:
            raise ValueError("margin must lie in [0, 0.5)")


def _num(x: float, places: int = 4) -> str:
    s = f"{x:.{places}f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _balls(diagram) -> list[Ball]:
    if isinstance(diagram, Mapping):
        return list(diagram.values())
    return list(getattr(diagram, "balls", diagram))


def render_svg(diagram, options: SvgOptions | None = None) -> str:
    """SVG text with one circle and one centred label per ball.

    ``diagram`` may be a list of balls, a label -> ball map or a solve
    report.  The view box is fitted to the union of the circles and padded
    by ``options.margin`` of its larger side on every edge.  The y axis
    points up, as in the plane the balls live in.
    """
    options = options or SvgOptions()
    balls = _balls(diagram)
    head = '<?xml version="1.0" encoding="UTF-8"?>\n'
    if not balls:
        return (
            head + f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{options.width}" height="{options.width}" viewBox="0 0 1 1">\n</svg>\n'
        )
    xs = [(float(b.center[0]), -float(b.center[1]), b.radius) for b in balls]
    x0 = min(x - r for x, _, r in xs)
    x1 = max(x + r for x, _, r in xs)
    y0 = min(y - r for _, y, r in xs)
    y1 = max(y + r for _, y, r in xs)
    side = max(x1 - x0, y1 - y0)
    pad = options.margin * side
    vx, vy = x0 - pad, y0 - pad
    vw, vh = (x1 - x0) + 2 * pad, (y1 - y0) + 2 * pad
    height = max(1, round(options.width * vh / vw))
    scale = vw / options.width  # user units per pixel
    # six significant digits relative to the drawing, whatever its scale
    places = max(4, 6 - math.floor(math.log10(side))) if side > 0 else 4

    def num(x):
        return _num(x, places)

    lines = [
        head.rstrip("\n"),
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{options.width}" height="{height}" '
        f'viewBox="{num(vx)} {num(vy)} {num(vw)} {num(vh)}">',
    ]
    for i, (b, (x, y, r)) in enumerate(zip(balls, xs)):
        color = PALETTE[i % len(PALETTE)]
        lines.append(
            f'  <circle cx="{num(x)}" cy="{num(y)}" r="{num(r)}" fill="{color}" '
            f'fill-opacity="{options.fill_opacity}" stroke="{color}" stroke-width="{num(options.stroke_width * scale)}"/>'
        )
    if options.labels:
        for b, (x, y, _) in zip(balls, xs):
            lines.append(
                f'  <text x="{num(x)}" y="{num(y)}" font-size="{num(options.font_size * scale)}" '
                f'font-family="sans-serif" text-anchor="middle" dominant-baseline="middle">{escape(b.label)}</text>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# -- report figures ------------------------------------------------------------

def _figure(size=(6.4, 4.0)):
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    fig = Figure(figsize=size, dpi=100)
    FigureCanvasAgg(fig)
    return fig


def figure_bytes(fig, fmt: str) -> bytes:
    """Serialize ``fig`` without timestamps or random ids, so reruns match byte for byte."""
    import matplotlib

    fmt = fmt.lower()
    buf = io.BytesIO()
    if fmt == "svg":
        with matplotlib.rc_context({"svg.hashsalt": "eulerball", "svg.fonttype": "path"}):
            fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    elif fmt == "png":
        fig.savefig(buf, format="png", metadata={"Software": None})
    elif fmt == "pdf":
        fig.savefig(buf, format="pdf", metadata={"CreationDate": None, "ModDate": None, "Producer": None, "Creator": None})
    else:
        raise ValueError(f"unsupported figure format {fmt!r}; use png, svg or pdf")
    return buf.getvalue()


def syllogism_accuracy_figure(by_group: Mapping[str, Mapping]):
    """Horizontal bar chart of accuracy per syllogism group."""
    fig = _figure((7.0, 0.35 * max(len(by_group), 4) + 1.2))
    ax = fig.add_subplot()
    names = list(by_group)
    acc = [100.0 * by_group[n]["accuracy"] for n in names]
    ax.barh(range(len(names)), acc, color=PALETTE[0])
    ax.set_yticks(range(len(names)), [n.replace("_", " / ") for n in names], fontsize=8)
    ax.invert_yaxis()
    ax.set_xlim(0, 100)
    ax.set_xlabel("accuracy (%)")
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    return fig


def family_size_figure(by_size: Mapping[int, Mapping]):
    """Precision and recall against family size."""
    fig = _figure()
    ax = fig.add_subplot()
    sizes = sorted(by_size)
    for key, color, marker in (("precision", PALETTE[0], "o"), ("recall", PALETTE[1], "s")):
        ax.plot(sizes, [by_size[s][key] for s in sizes], color=color, marker=marker, label=key)
    ax.set_xticks(sizes)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("family members")
    ax.set_ylabel("score")
    ax.legend(loc="lower left")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def save_figure(fig, path) -> None:
    from pathlib import Path

    from eulerball.dataio import write_bytes_atomic

    path = Path(path)
    write_bytes_atomic(path, figure_bytes(fig, path.suffix.lstrip(".") or "png"))

