import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccmsynth.config import Circle, JobConfig, ScenarioSpec, dump_config, dumps, load_config, loads, shipped, \
    shipped_names
from ccmsynth.domain import Bounds
from ccmsynth.errors import ConfigError
from ccmsynth.pipeline import AnalysisSettings

MINIMAL = """
[domain]
nx = 1
ny = 1
block_size_cm = 10.0
input_port = 3
output_port = 4
fixed = [0]
"""


@pytest.mark.parametrize("name", ["test_mechanism", "toy_single_kink", "three_kink_switch"])
def test_shipped_configs_round_trip(name, tmp_path):
    cfg = shipped(name)
    text = dumps(cfg)
    assert dumps(loads(text)) == text
    dump_config(cfg, tmp_path / "c.toml")
    assert dumps(load_config(tmp_path / "c.toml")) == text


def test_shipped_names():
    assert {"test_mechanism", "toy_single_kink", "three_kink_switch"} <= set(shipped_names())
    with pytest.raises(ConfigError):
        shipped("nope")


def test_minimal_config_gets_defaults():
    cfg = loads(MINIMAL)
    assert cfg.E == 20.0 and cfg.nu == 0.33
    assert cfg.mutation_probability == 0.08
    assert cfg.settings == AnalysisSettings()
    assert cfg.domain().layout.size == 44
    assert dumps(loads(dumps(cfg))) == dumps(cfg)


def test_switch_example_counts():
    cfg = shipped("three_kink_switch")
    dom = cfg.domain()
    assert len(dom.members) == 60 and dom.n_vertices == 25 and dom.layout.size == 364
    assert len(cfg.scenarios[0].cases) == 15


@settings(max_examples=30)
@given(p=st.floats(1e-3, 1.0), seed=st.integers(0, 2 ** 31), it=st.integers(0, 10_000),
       mu=st.floats(0.0, 1.0), path=st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=2,
                                                max_size=8),
       thr=st.none() | st.floats(0.0, 100.0))
def test_round_trip_property(p, seed, it, mu, path, thr):
    cfg = JobConfig(1, 1, 10.0, 3, 4, (0,), mutation_probability=p, seed=seed, max_iterations=it,
                    desired_path_mm=tuple(path), threshold=thr,
                    settings=AnalysisSettings(mu=mu), pad=Circle((1.0, 2.0), 0.5),
                    scenarios=(ScenarioSpec("wear-sweep", wear_percent=(0.5, 1.0)),
                               ScenarioSpec("mesh-density", meshes=((5, 20),))))
    text = dumps(cfg)
    back = loads(text)
    assert dumps(back) == text
    assert back.mutation_probability == p and back.seed == seed and back.threshold == thr


@pytest.mark.parametrize("text,msg", [
    ("[domain]\nnx = 1\n", "missing"),
    (MINIMAL + "[search]\nmutation_probability = 0.0\n", "mutation probability"),
    (MINIMAL + "[bounds]\nwidth_mm = [6.0, 2.0]\n", ""),
    (MINIMAL + "[bounds]\nwidth = [2.0, 6.0]\n", "unknown bound"),
    (MINIMAL + "[[scenario]]\nkind = \"bogus\"\n", "unknown scenario"),
    ("[domain\n", "TOML"),
    (MINIMAL.replace("fixed = [0]", "fixed = [99]"), ""),
    (MINIMAL + "[objective]\ndesired_path_mm = [[0.0, 0.0]]\n", "two waypoints"),
])
def test_invalid_configs_raise_config_error(text, msg):
    with pytest.raises(ConfigError) as err:
        loads(text)
    assert msg in str(err.value)


def test_design_vector_and_desired():
    cfg = loads(MINIMAL)
    v = cfg.design_vector()
    assert v.shape == (44,)
    with pytest.raises(ConfigError):
        cfg.desired()
    cfg = shipped("toy_single_kink")
    assert cfg.desired().alpha.shape == (100,)
    np.testing.assert_array_equal(cfg.design_vector(), np.array(cfg.design))


def test_bounds_must_be_ordered():
    with pytest.raises(ConfigError):
        Bounds(width=(6.0, 2.0))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")
