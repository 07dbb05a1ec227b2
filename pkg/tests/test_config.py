import textwrap
from pathlib import Path

import numpy as np
import pytest

from equatorflow import catalog
from equatorflow.config import load_profile, load_sweep_config, load_yaml, sweep_config, sweep_from_tree
from equatorflow.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _load(text):
    return sweep_from_tree(load_yaml(textwrap.dedent(text), "t.yaml"))


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_shipped_configs_load(name):
    cfg = load_sweep_config(CONFIGS / name)
    assert cfg.m % 2 == 1 and cfg.xi_min == -cfg.xi_max
    assert cfg.tracking.eps_ess == cfg.E_window[0] and cfg.tracking.E_hi == cfg.E_window[1]
    assert Path(cfg.out_dir).is_absolute()


def test_explicit_segments_match_catalog():
    f = load_sweep_config(CONFIGS / "three_jumps.yaml").profile
    g = catalog.three_jumps()
    y = np.linspace(-10, 10, 2001)
    y = y[np.min(np.abs(y[:, None] - np.array([j.y for j in g.jumps])[None, :]), axis=1) > 1e-6]
    assert np.allclose(f(y), g(y))
    assert [(j.y, j.f_plus - j.f_minus) for j in f.jumps] == [(j.y, j.f_plus - j.f_minus) for j in g.jumps]


def test_defaults_and_presets():
    cfg = _load("profile: {catalog: linear}\n")
    assert (cfg.L, cfg.m, cfg.delta_xi, cfg.xi_max) == (11.0, 601, 0.05, 8.0)
    assert cfg.xi_grid.size == 321 and cfg.xi_grid[160] == 0.0
    assert _load("profile: {catalog: linear}\npreset: paper\n").m == 5001
    tree = load_yaml("profile: {catalog: linear}\ngrid: {m: 201}\n")
    assert sweep_from_tree(tree).m == 201
    assert sweep_from_tree(tree, preset="paper").m == 5001


def test_digest_ignores_paths_and_workers():
    a = sweep_config("linear", output={"dir": "a"}, workers=1)
    b = sweep_config("linear", output={"dir": "b"}, workers=3)
    c = sweep_config("linear", grid={"m": 201})
    assert a.digest() == b.digest() != c.digest()


@pytest.mark.parametrize(
    "text, line, field",
    [
        ("profile: {catalog: linear}\ngrid:\n  m: 600\n", 3, "grid.m"),
        ("profile: {catalog: linear}\ngrid:\n  L: -1\n", 3, "grid.L"),
        ("profile: {catalog: linear}\nsweep:\n  delta_xi: 0.3\n", 3, "sweep.delta_xi"),
        ("profile: {catalog: linear}\nsweep:\n  xi_min: -4\n", 3, "sweep.xi_min"),
        ("profile: {catalog: linear}\nsweep:\n  E_window: [1, 0.5]\n", 3, "sweep.E_window"),
        ("profile: {catalog: linear}\nalpha: [0.5, 'x']\n", 2, "alpha[1]"),
        ("profile: {catalog: sign}\nalpha: [1.0]\n", 2, "alpha[0]"),
        ("profile: {catalog: linear}\nalpha: [0.01]\n", 2, "alpha[0]"),
        ("profile: {catalog: linear}\nbogus: 1\n", 2, "bogus"),
        ("profile: {catalog: nope}\n", 1, "profile.catalog"),
        ("profile:\n  catalog: linear\n  args: {slope: 'a'}\n", 3, "profile.args"),
        ("profile: {catalog: linear}\nfilter:\n  wall_threshold: yes\n", 3, "filter.wall_threshold"),
        ("profile: {catalog: linear}\ntracking:\n  eps_ess: 0.1\n", 3, "tracking.eps_ess"),
        ("profile: {catalog: linear}\nworkers: 0\n", 2, "workers"),
        (
            "profile:\n  segments:\n    - {kind: linear, y_from: -5, y_to: 5, params: {slope: 1}}\n"
            "    - {kind: wobble, y_from: 5, y_to: 6}\n",
            4,
            "profile.segments[1]",
        ),
    ],
)
def test_errors_carry_line_and_field(text, line, field):
    with pytest.raises(ConfigError) as exc:
        _load(text)
    msg = str(exc.value)
    assert f"line {line}" in msg and f"field {field}" in msg


def test_yaml_syntax_error_has_line():
    with pytest.raises(ConfigError, match="line 3"):
        load_yaml("a: 1\nb: [1, 2\nc: 3\n", "t.yaml")


def test_missing_profile_and_file(tmp_path):
    with pytest.raises(ConfigError, match="profile"):
        _load("alpha: [0.5]\n")
    with pytest.raises(ConfigError, match="cannot read"):
        load_sweep_config(tmp_path / "missing.yaml")


def test_profile_file_reference(tmp_path):
    (tmp_path / "p.yaml").write_text("profile:\n  catalog: sign\n")
    (tmp_path / "s.yaml").write_text("profile: {file: p.yaml}\nalpha: [0.5]\noutput: {dir: o}\n")
    cfg = load_sweep_config(tmp_path / "s.yaml")
    assert len(cfg.profile.jumps) == 1
    assert cfg.out_dir == str(tmp_path / "o")
    assert load_profile(tmp_path / "p.yaml").jumps[0].y == 0.0


def test_programmatic_overrides():
    cfg = sweep_config(catalog.sign(), grid={"m": 101}, alpha=[0.5, 1.5])
    assert cfg.m == 101 and cfg.alphas == [0.5, 1.5]
    with pytest.raises(TypeError):
        sweep_config("linear", colour="red")
