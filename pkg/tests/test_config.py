from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modlab import config as cfgmod
from modlab.config import ConfigError, ExperimentConfig
from modlab.datamodels import DataModelSpec
from modlab.modulators import ModulatorSpec

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

BASIC = """\
[experiment]
kind = conditions
seed = 7
reps = 500
schedule = 16, 64, 256

[model]
family = sphere
sigma = 1.0
"""


def test_parse_basic():
    cfg = cfgmod.loads(BASIC)
    assert cfg.kind == "conditions" and cfg.seed == 7 and cfg.reps == 500
    assert cfg.schedule == (16, 64, 256)
    assert cfg.model == DataModelSpec() and cfg.modulator == ModulatorSpec()
    assert cfg.output_stem == "conditions"


def test_parse_full():
    text = """\
# comment line
[experiment]
kind = cdf-lipschitz
seed = 18446744073709551615
reps = 100
schedule = 64
j = 1
pairs = -1:1, 0:2.5
y_grid = -1, 0, 1
t = 0, 0.5
workers = 2
format = json
output = out/x

[model]
family = student-t
nu = 7

[modulator]
family = stable
cf_index = 1.5
"""
    cfg = cfgmod.loads(text)
    assert cfg.pairs == ((-1.0, 1.0), (0.0, 2.5))
    assert cfg.y_grid == (-1.0, 0.0, 1.0) and cfg.t == (0.0, 0.5)
    assert cfg.model.nu == 7.0 and cfg.modulator.cf_index == 1.5
    assert cfg.format == "json" and cfg.workers == 2 and cfg.output_stem == "out/x"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.ini")), ids=lambda p: p.name)
def test_repo_configs_round_trip(path):
    cfg = cfgmod.load(path)
    assert cfgmod.loads(cfgmod.dumps(cfg)) == cfg
    assert cfgmod.dumps(cfgmod.loads(cfgmod.dumps(cfg))) == cfgmod.dumps(cfg)


def _error(text):
    with pytest.raises(ConfigError) as info:
        cfgmod.loads(text, "test.ini")
    return info.value


def test_unknown_key_reports_line():
    err = _error(BASIC + "radius = 3\n")
    assert "radius" in str(err) and err.line == 10
    assert str(err).startswith("test.ini:10:")


def test_unknown_section_reports_line():
    err = _error(BASIC + "[extras]\nx = 1\n")
    assert err.line == 10


def test_syntax_error_reports_line():
    err = _error("[experiment]\nkind = polya\nthis line has no separator\n")
    assert err.line == 3


def test_duplicate_key_rejected():
    err = _error("[experiment]\nkind = polya\nseed = 1\nseed = 2\n")
    assert err.line == 4


@pytest.mark.parametrize(
    "patch,needle",
    [
        ("reps = 500", "reps = 99"),
        ("schedule = 16, 64, 256", "schedule = 16, 16"),
        ("schedule = 16, 64, 256", "schedule = 64, 16"),
        ("seed = 7", "seed = -1"),
        ("seed = 7", "seed = soon"),
        ("kind = conditions", "kind = everything"),
        ("family = sphere", "family = torus"),
        ("sigma = 1.0", "sigma = -2"),
    ],
)
def test_invalid_values(patch, needle):
    err = _error(BASIC.replace(patch, needle))
    assert err.line is not None


def test_seed_is_mandatory():
    err = _error(BASIC.replace("seed = 7\n", ""))
    assert "seed" in str(err)


def test_missing_experiment_section():
    _error("[model]\nfamily = sphere\n")


def test_bad_pair_syntax():
    err = _error(BASIC.replace("reps = 500", "reps = 500\npairs = 0-1"))
    assert "pairs" in str(err)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        cfgmod.load(tmp_path / "nope.ini")


def test_config_hash_stable():
    a = cfgmod.loads(BASIC)
    assert cfgmod.config_hash(a) == cfgmod.config_hash(cfgmod.loads(BASIC))
    assert cfgmod.config_hash(a) != cfgmod.config_hash(a.with_(seed=8))


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def configs(draw):
    schedule = sorted(draw(st.sets(st.integers(2, 5000), min_size=1, max_size=4)))
    pairs = tuple(tuple(sorted(p)) for p in draw(st.lists(st.tuples(finite, finite), max_size=3)))
    family = draw(st.sampled_from(["sphere", "ball", "gaussian", "hypercube"]))
    mod = draw(st.sampled_from([ModulatorSpec.gaussian(), ModulatorSpec.student_t(3.5), ModulatorSpec.stable(0.7)]))
    return ExperimentConfig(
        kind=draw(st.sampled_from(cfgmod.KINDS)),
        seed=draw(st.integers(0, 2**64 - 1)),
        model=DataModelSpec(family=family, sigma=draw(st.floats(0.01, 100.0))),
        modulator=mod,
        reps=draw(st.integers(100, 10**7)),
        schedule=tuple(schedule),
        j=draw(st.integers(1, 5)),
        workers=draw(st.integers(1, 8)),
        y_grid=draw(st.none() | st.lists(finite, min_size=1, max_size=4).map(tuple)),
        pairs=pairs,
        t=tuple(draw(st.lists(finite, min_size=1, max_size=3))),
        output=draw(st.sampled_from(["", "reports/a", "b"])),
        format=draw(st.sampled_from(cfgmod.FORMATS)),
    )


@settings(max_examples=100, deadline=None)
@given(configs())
def test_round_trip_property(cfg):
    assert cfgmod.loads(cfgmod.dumps(cfg)) == cfg
