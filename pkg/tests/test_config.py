import pytest

from ppgtune.config import DEFAULT_TOML, Config, dumps_config, load_config, loads_config
from ppgtune.errors import InvalidInput, ParseError


def test_default_roundtrip():
    assert loads_config(DEFAULT_TOML) == Config()
    assert loads_config("") == Config()


def test_tables_map_to_fields():
    cfg = loads_config(
        """
seed = 7
jobs = 2
scopes = ["base", "global"]

[base]
f_low = 0.6

[ppg]
order = 3

[ibi]
min_ms = 250.0

[match]
tolerance_ms = 100.0

[nsga2]
pop_size = 20

[scope.per_person_task]
generations = 5

[stats]
cohens_d = "pooled"
"""
    )
    assert (cfg.seed, cfg.jobs, cfg.scopes) == (7, 2, ("base", "global"))
    assert cfg.base_f_low == 0.6 and cfg.base_f_high == 4.0
    assert cfg.evaluation.ppg_order == 3
    assert cfg.evaluation.ibi_min_ms == 250.0
    assert cfg.evaluation.tolerance_ms == 100.0
    assert cfg.nsga2.pop_size == 20
    assert cfg.nsga_for("per_person_task").generations == 5
    assert cfg.nsga_for("per_person_task").pop_size == 20
    assert cfg.nsga_for("global").generations == cfg.nsga2.generations
    assert cfg.stats.cohens_d == "pooled"
    assert loads_config(dumps_config(cfg)) == cfg


@pytest.mark.parametrize(
    "text",
    [
        "colour = 1\n",
        "[nope]\nx = 1\n",
        "[ppg]\nwidth = 3\n",
        'scopes = ["base", "weekly"]\n',
        'scopes = ["global"]\n',
        "jobs = 0\n",
        "window_ms = -5\n",
        '[stats]\ncohens_d = "hedges"\n',
        "[stats]\nalpha = 1.5\n",
        "[scope.weekly]\npop_size = 10\n",
        "[scope.global]\npop_size = 1.5\n",
        '[base]\nf_low = "low"\n',
    ],
)
def test_invalid_config(text):
    with pytest.raises(InvalidInput):
        loads_config(text)


def test_syntax_error_has_location(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("seed = 1\n[grid\n", encoding="utf-8")
    with pytest.raises(ParseError) as err:
        load_config(p)
    assert str(p) in str(err.value)


def test_missing_file():
    with pytest.raises(InvalidInput):
        load_config("/nonexistent/config.toml")
