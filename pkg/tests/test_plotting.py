import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rcclust.plotting import PALETTE, render_scatter

NS = "{http://www.w3.org/2000/svg}"


def parse(svg):
    return ET.fromstring(svg.split("\n", 1)[1])


class TestRenderScatter:
    def test_one_circle_per_point(self):
        Y = np.random.default_rng(0).standard_normal((57, 2))
        root = parse(render_scatter(Y, np.arange(57) % 3, ["a", "b", "c"]))
        assert len(root.findall(f".//{NS}circle")) == 57

    def test_legend_and_fills(self):
        Y = np.random.default_rng(1).standard_normal((30, 2))
        labels = np.repeat([0, 1, 2], 10)
        root = parse(render_scatter(Y, labels, ["COVID", "Viral Pneumonia", "NORMAL"]))
        texts = root.findall(f".//{NS}text")
        assert [t.get("data-class") for t in texts] == ["COVID", "Viral Pneumonia", "NORMAL"]
        fills = {c.get("fill") for c in root.findall(f".//{NS}circle")}
        assert fills == set(PALETTE[:3])

    def test_viewbox_has_five_percent_margin(self):
        Y = np.array([[0.0, 0.0], [10.0, 20.0]])
        root = parse(render_scatter(Y, [0, 0], ["a"]))
        x0, y0, w, h = map(float, root.get("viewBox").split())
        assert (x0, y0, w, h) == pytest.approx((-0.5, -21.0, 11.0, 22.0))

    def test_empty_input(self):
        root = parse(render_scatter(np.empty((0, 2)), [], ["a", "b"]))
        assert root.findall(f".//{NS}circle") == []
        assert len(root.findall(f".//{NS}text")) == 2

    def test_escapes_names(self):
        root = parse(render_scatter([[0, 0]], [0], ["a<&>\"b"], title="t & u"))
        assert root.find(f".//{NS}text").text == "a<&>\"b"

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            render_scatter(np.zeros((3, 2)), [0, 1], ["a"])
