"""SVG rendering sanity: well-formed output, one segment per cell."""

import xml.etree.ElementTree as ET

from cascade_dendrite.cascade import CascadeHandle
from cascade_dendrite.dendrite import build_cutset_graph
from cascade_dendrite.laws import UniformIID
from cascade_dendrite.render import render_svg, write_svg


def test_svg_parses_and_counts_segments(tmp_path):
    h = CascadeHandle(0, UniformIID())
    g = build_cutset_graph(h, 0.2, r_depth=5)
    text = render_svg(g)
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    lines = [el for el in root.iter() if el.tag.endswith("line")]
    assert len(lines) == g.n_edges

    out = tmp_path / "graph.svg"
    write_svg(g, str(out))
    assert out.read_text() == text


def test_svg_deterministic():
    h = CascadeHandle(2, UniformIID())
    g = build_cutset_graph(h, 0.3, r_depth=5)
    assert render_svg(g) == render_svg(g)
