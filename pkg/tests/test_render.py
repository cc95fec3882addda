import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from ccmsynth.config import shipped
from ccmsynth.errors import ExportError
from ccmsynth.pipeline import analyze, material_for, prepare
from ccmsynth.render import SVG_NS, svg_frame, write_frames, write_path_csv


@pytest.fixture(scope="module")
def mechanism():
    cfg = shipped("test_mechanism")
    prep = prepare(cfg.domain(), cfg.design_vector(), cfg.settings)
    return cfg, prep, material_for(prep, cfg.E, cfg.nu)


def read_rows(p):
    with open(p) as fh:
        return list(csv.reader(fh))


def test_csv_has_one_row_per_converged_step(mechanism, tmp_path):
    cfg, prep, mat = mechanism
    an = analyze(prep, mat, cfg.settings)
    rows = read_rows(write_path_csv(an.path, tmp_path / "p.csv"))
    assert rows[0] == ["step", "x_mm", "y_mm"]
    assert len(rows) - 1 == len(an.result.steps) == len(an.result.load_factors)
    got = np.array([[float(r[1]), float(r[2])] for r in rows[1:]])
    np.testing.assert_array_equal(got, an.path)


def test_zero_force_rows_identical(mechanism, tmp_path):
    cfg, prep, mat = mechanism
    an = analyze(prep, mat, cfg.settings, force=0.0)
    rows = read_rows(write_path_csv(an.path, tmp_path / "z.csv"))[1:]
    assert len(rows) == cfg.settings.n_steps + 1
    assert len({(r[1], r[2]) for r in rows}) == 1


def test_frames_are_well_formed_svg(mechanism, tmp_path):
    cfg, prep, mat = mechanism
    an = analyze(prep, mat, cfg.settings)
    files = write_frames(an, tmp_path, np.array(cfg.desired_path_mm), cfg.obstacles, cfg.pad, every=5)
    assert len(files) == len(range(0, len(an.result.steps), 5))
    for f in files:
        root = ET.parse(f).getroot()
        assert root.tag == f"{{{SVG_NS}}}svg" and root.get("version") == "1.1"
        tags = [el.tag.split("}")[1] for el in root.iter()]
        assert tags.count("polygon") >= 2 * len(prep.loops)
        assert "polyline" in tags


def test_switch_scale_frame_parses():
    # a frame the size of the paper's switch: a few thousand outline points plus key surfaces
    t = np.linspace(0, 2 * np.pi, 4000)
    outer = np.column_stack([225 + 200 * np.cos(t), 225 + 200 * np.sin(t)])
    surfaces = [np.column_stack([c + 10 * np.cos(t[:64]), 100 + 10 * np.sin(t[:64])]) for c in (50, 150, 250)]
    svg = svg_frame([outer], [outer + 1.0], surfaces, desired=outer[:50], actual=outer[:40])
    root = ET.fromstring(svg.split("?>", 1)[1])
    assert len(root.findall(f".//{{{SVG_NS}}}polygon")) == 5


def test_write_failures_name_the_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ExportError) as err:
        write_path_csv(np.zeros((2, 2)), blocker / "p.csv")
    assert str(blocker) in str(err.value)
