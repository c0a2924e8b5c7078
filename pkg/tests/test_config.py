from pathlib import Path

import numpy as np
import pytest

from rqhd_lab.config import (
    ExperimentConfig,
    build_initial,
    load_config,
    parse_config,
    serialize_config,
)
from rqhd_lab.errors import ParseError, ValidationError
from rqhd_lab.storage import write_snapshot

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def build(text):
    cfg = parse_config(text)
    grid = cfg.grid.build()
    params = cfg.physical_params()
    return cfg, grid, params, build_initial(cfg, grid, params)


class TestParse:
    def test_minimal_kg(self):
        cfg = parse_config("mode: kg\n")
        assert cfg.grid.build().points == (128,)
        assert cfg.run.dt == "auto" and cfg.run.tol == 1e-9 and cfg.run.max_iter == 50
        assert cfg.params.epsilon == 1.0 and cfg.initial.family == "sine-perturbation"
        assert cfg.physical_params().delta == pytest.approx(0.1)

    def test_default_2d_resolution(self):
        assert parse_config("mode: kg\ngrid:\n  dim: 2\n").grid.build().points == (64, 64)

    def test_negative_upsilon(self):
        with pytest.raises(ValidationError, match="upsilon must be >= 0") as info:
            parse_config("mode: kg\nparams:\n  upsilon: -1\n")
        assert "line 3" in str(info.value)

    def test_unknown_key_names_line(self):
        with pytest.raises(ValidationError, match=r"run\.dtt \(line 4\)"):
            parse_config("mode: kg\nrun:\n  T: 0.1\n  dtt: 0.01\n")

    def test_unknown_mode(self):
        with pytest.raises(ValidationError, match="mode"):
            parse_config("mode: fly\n")

    def test_missing_mode(self):
        with pytest.raises(ValidationError):
            parse_config("grid:\n  dim: 1\n")

    def test_bad_yaml(self):
        with pytest.raises(ParseError, match="line"):
            parse_config("mode: kg\ngrid: [1, 2\n")

    def test_exponent_strings_are_numbers(self):
        cfg = parse_config("mode: rqhd\nrun:\n  tol: 1e-9\n  dt: 1e-3\n")
        assert cfg.run.tol == 1e-9 and cfg.run.dt == 1e-3

    def test_non_numeric(self):
        with pytest.raises(ValidationError, match="run.T"):
            parse_config("mode: kg\nrun:\n  T: soon\n")

    def test_odd_points(self):
        with pytest.raises(ValidationError, match="points"):
            parse_config("mode: kg\ngrid:\n  points: 9\n")

    def test_limits_section(self):
        cfg = parse_config("mode: limits\nlimits:\n  kind: semiclassical\n  values: [0.4, 0.2, 0.1]\n")
        assert cfg.limits.kind == "semiclassical" and cfg.limits.values == [0.4, 0.2, 0.1]
        with pytest.raises(ValidationError, match="limits"):
            parse_config("mode: limits\nlimits:\n  values: [0.1, 0.2, 0.4]\n")

    def test_kg_needs_positive_parameters(self):
        with pytest.raises(ValidationError):
            parse_config("mode: kg\nparams:\n  upsilon: 0\n")


class TestRoundTrip:
    def test_shipped_equivalence_config(self):
        text = (CONFIGS / "equiv_1d.yaml").read_text()
        cfg = parse_config(text)
        assert cfg.mode == "equivalence" and cfg.run.tol == 1e-12
        again = parse_config(serialize_config(cfg))
        assert again.to_dict() == cfg.to_dict()
        assert serialize_config(again) == serialize_config(cfg)

    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
    def test_every_shipped_config(self, path):
        cfg = load_config(path)
        assert parse_config(serialize_config(cfg)).to_dict() == cfg.to_dict()

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_config(tmp_path / "nope.yaml")


class TestFamilies:
    def test_constant(self):
        _, grid, _, data = build("mode: kg\ninitial:\n  family: constant\n")
        assert np.all(data.n0 == 1.0) and np.all(data.S0 == 0)

    def test_sine(self):
        _, grid, _, data = build("mode: kg\ninitial:\n  amplitude: 0.05\n  phase_amplitude: 0.1\n  k: [2]\n")
        x = grid.coords[0]
        np.testing.assert_allclose(data.n0, 1 + 0.05 * np.sin(2 * x))
        np.testing.assert_allclose(data.S0, 0.1 * np.cos(2 * x))

    def test_gaussian_is_neutral(self):
        _, grid, _, data = build("mode: kg\ninitial:\n  family: gaussian-bump\n  amplitude: 0.2\n")
        assert abs(np.mean(data.n0) - 1.0) < 1e-14 and np.max(data.n0) > 1.1

    def test_plane_wave(self):
        _, grid, params, data = build("mode: kg\ninitial:\n  family: plane-wave\n  amplitude: 1.0\n  k: [1]\n")
        assert data.kg is not None and data.winding == (1,)
        np.testing.assert_allclose(data.kg.phi, np.exp(1j * grid.coords[0]), atol=1e-14)

    def test_snapshot_relative_to_config(self, tmp_path):
        cfg0 = parse_config("mode: kg\n")
        grid = cfg0.grid.build()
        n0 = 1 + 0.01 * np.cos(grid.coords[0])
        write_snapshot(tmp_path / "n0.snap", grid, n0)
        (tmp_path / "c.yaml").write_text("mode: kg\ninitial:\n  family: snapshot\n  path: n0.snap\n")
        cfg = load_config(tmp_path / "c.yaml")
        data = build_initial(cfg, grid, cfg.physical_params())
        assert np.array_equal(data.n0, n0)

    def test_unknown_family(self):
        with pytest.raises(ValidationError, match="family"):
            parse_config("mode: kg\ninitial:\n  family: vortex\n")

    def test_config_type(self):
        assert isinstance(parse_config("mode: identities\n"), ExperimentConfig)
