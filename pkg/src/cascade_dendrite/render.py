"""SVG rendering of embedded dendrite graphs."""

from __future__ import annotations

import math
from typing import Dict, Optional, Tuple

from .dendrite import DendriteGraph, embed
from .errors import ValidationError


def _lerp_color(t: float) -> str:
    """Cold-to-warm ramp on [0, 1]."""
    lo = (38, 70, 150)
    hi = (200, 60, 40)
    r = tuple(round(a + (b - a) * t) for a, b in zip(lo, hi))
    return f"rgb({r[0]},{r[1]},{r[2]})"


def render_svg(
    graph: DendriteGraph,
    coords: Optional[Dict[int, Tuple[float, float]]] = None,
    c: float = 0.25,
    size: int = 900,
    background: str = "white",
) -> str:
    """Draw the graph; stroke width and color follow the log of the weight.

    Heavy cells draw thick and warm, light cells thin and cold, so the
    multiscale structure reads at a glance.
    """
    if size <= 0:
        raise ValidationError("size must be positive")
    if not graph.edges:
        raise ValidationError("graph has no edges to draw")
    if coords is None:
        coords = embed(graph, c)
    xs = [p[0] for p in coords.values()]
    ys = [p[1] for p in coords.values()]
    span = max(max(xs) - min(xs), max(ys) - min(ys), 1e-9)
    margin = 0.06 * span
    x0, y0 = min(xs) - margin, min(ys) - margin
    scale = size / (span + 2 * margin)

    logs = [math.log(e.weight) for e in graph.edges.values() if e.weight > 0]
    lo, hi = min(logs), max(logs)
    rng = hi - lo if hi > lo else 1.0

    def sx(x):
        return (x - x0) * scale

    def sy(y):
        # flip so the tip side points up in the image
        return size - (y - y0) * scale

    height = round((max(ys) - min(ys) + 2 * margin) * scale)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{height}" viewBox="0 0 {size} {height}">',
        f'<rect width="100%" height="100%" fill="{background}"/>',
    ]
    for e in sorted(graph.edges.values(), key=lambda e: e.weight):
        t = (math.log(e.weight) - lo) / rng if e.weight > 0 else 0.0
        w = 0.4 + 2.6 * t
        (ax, ay) = coords[e.end_local0]
        (bx, by) = coords[e.end_local1]
        lines.append(
            f'<line x1="{sx(ax):.2f}" y1="{sy(ay):.2f}" '
            f'x2="{sx(bx):.2f}" y2="{sy(by):.2f}" '
            f'stroke="{_lerp_color(t)}" stroke-width="{w:.2f}" '
            f'stroke-linecap="round"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines)


def write_svg(graph: DendriteGraph, path: str, **kwargs) -> None:
    with open(path, "w") as f:
        f.write(render_svg(graph, **kwargs))
