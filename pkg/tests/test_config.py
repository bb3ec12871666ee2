"""Configuration validation, derived geometry and dataset presets."""

import json

import pytest

from hypercast.config import PRESET_SHAPES, ModelConfig, preset
from hypercast.errors import ConfigError


class TestValidation:
    def test_defaults_are_valid(self):
        ModelConfig()

    @pytest.mark.parametrize("field,value", [
        ("input_len", 0), ("horizon", -1), ("pool_ratio", 0),
        ("hidden_dim", 0), ("patience", 0), ("batch_size", 0),
        ("temporal_scales", 0),
    ])
    def test_positive_integer_fields(self, field, value):
        with pytest.raises(ConfigError, match=field):
            ModelConfig(**{field: value})

    def test_pool_loss_weight_range(self):
        """The pooling-loss weight is constrained to [0, 1]."""
        ModelConfig(pool_loss_weight=0.0)
        ModelConfig(pool_loss_weight=1.0)
        with pytest.raises(ConfigError, match="pool_loss_weight"):
            ModelConfig(pool_loss_weight=1.5)
        with pytest.raises(ConfigError, match="pool_loss_weight"):
            ModelConfig(pool_loss_weight=-0.1)

    def test_input_len_must_halve_cleanly(self):
        with pytest.raises(ConfigError, match="divisible"):
            ModelConfig(input_len=10, temporal_scales=3)

    def test_patch_longer_than_coarsest_scale(self):
        # 16 -> 8 -> 4 but patch_len 8 leaves zero patches at the last scale
        with pytest.raises(ConfigError, match="patch"):
            ModelConfig(input_len=16, temporal_scales=3, patch_len=8)

    def test_large_dropped_remainder_warns(self):
        # scale lengths 20, 10, 5; patch 3 drops 2 of 5 (> 1.5)
        with pytest.warns(UserWarning, match="drops"):
            ModelConfig(input_len=20, temporal_scales=3, patch_len=3)

    def test_pyramid_collapse_needs_n_vars(self):
        cfg = ModelConfig(pool_ratio=20, spatial_scales=3)
        cfg.validate_for(n_vars=500)  # 500 -> 25 -> 1 is fine
        with pytest.raises(ConfigError, match="zero nodes"):
            cfg.validate_for(n_vars=300)  # 300 -> 15 -> 0

    def test_enum_fields(self):
        for field, value in [("head", "medium"), ("loss_reduction", "max"),
                             ("dtype", "float16")]:
            with pytest.raises(ConfigError):
                ModelConfig(**{field: value})


class TestGeometry:
    def test_node_counts_divide_by_pool_ratio(self):
        cfg = ModelConfig(pool_ratio=20, spatial_scales=2)
        assert cfg.node_counts(209) == [209, 10]

    def test_node_counts_three_scales(self):
        cfg = ModelConfig(pool_ratio=30, spatial_scales=3)
        assert cfg.node_counts(3850) == [3850, 128, 4]

    def test_scale_lengths_halve(self):
        cfg = ModelConfig(input_len=96, temporal_scales=3)
        assert cfg.scale_lengths() == [96, 48, 24]

    def test_patch_counts_floor(self):
        cfg = ModelConfig(input_len=96, temporal_scales=3, patch_len=16)
        assert cfg.patch_counts() == [6, 3, 1]

    def test_flat_positions(self):
        cfg = ModelConfig(input_len=16, temporal_scales=2, patch_len=4,
                          pool_ratio=3, spatial_scales=2)
        # node counts [6, 2], two temporal scales -> 16 rows
        assert cfg.n_flat_positions(6) == 16

    def test_head_resolution(self):
        assert ModelConfig(input_len=12, horizon=12, patch_len=2).resolve_head() == "short"
        assert ModelConfig(input_len=96, horizon=720).resolve_head() == "long"
        assert ModelConfig(input_len=96, horizon=720, head="short").resolve_head() == "short"


class TestPresets:
    def test_balancing_weights(self):
        """Traffic presets weight the pooling loss at 1e-1, others at 1e-2."""
        assert preset("metr-la").pool_loss_weight == pytest.approx(1e-1)
        assert preset("pems-bay").pool_loss_weight == pytest.approx(1e-1)
        for name in ("china-aqi", "electricity", "solar", "temperature"):
            assert preset(name).pool_loss_weight == pytest.approx(1e-2)

    def test_pyramid_settings(self):
        assert preset("metr-la").pool_ratio == 10
        assert preset("temperature").pool_ratio == 30
        assert preset("temperature").spatial_scales == 3
        for name in PRESET_SHAPES:
            if name != "temperature":
                assert preset(name).spatial_scales == 2
            assert preset(name).temporal_scales == 3

    def test_patch_lengths(self):
        expected = {"metr-la": 2, "pems-bay": 2, "china-aqi": 16,
                    "electricity": 8, "solar": 16, "temperature": 16}
        for name, r in expected.items():
            assert preset(name).patch_len == r

    def test_nodes_per_edge(self):
        expected = {"metr-la": 20, "pems-bay": 20, "china-aqi": 20,
                    "electricity": 10, "solar": 10, "temperature": 20}
        for name, k in expected.items():
            assert preset(name).nodes_per_edge == k

    def test_head_selection_per_dataset(self):
        """Short head iff the horizon fits in the lookback."""
        assert preset("metr-la").resolve_head() == "short"          # 12 <= 12
        assert preset("china-aqi").resolve_head() == "short"        # 24 <= 96
        assert preset("electricity", horizon=720).resolve_head() == "long"
        assert preset("electricity", horizon=96).resolve_head() == "short"
        assert preset("temperature").resolve_head() == "long"       # 192 > 96

    def test_preset_geometry_is_consistent(self):
        """Every preset builds a valid pyramid on its dataset's shape."""
        for name, (n_vars, _) in PRESET_SHAPES.items():
            cfg = preset(name)
            cfg.validate_for(n_vars)

    def test_temperature_batch_size(self):
        assert preset("temperature").batch_size == 8
        assert preset("china-aqi").batch_size == 32

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            preset("nonexistent")


class TestSerialization:
    def test_file_round_trip_json(self, tmp_path):
        cfg = ModelConfig(input_len=32, horizon=8, patch_len=4, seed=7,
                          pool_loss_weight=0.05)
        path = tmp_path / "cfg.json"
        cfg.save(path)
        assert ModelConfig.from_file(path) == cfg

    def test_file_round_trip_yaml(self, tmp_path):
        cfg = ModelConfig(input_len=32, horizon=8, patch_len=4, head="long")
        path = tmp_path / "cfg.yaml"
        cfg.save(path)
        assert ModelConfig.from_file(path) == cfg

    def test_partial_file_uses_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"input_len": 64, "horizon": 16}))
        cfg = ModelConfig.from_file(path)
        assert cfg.input_len == 64
        assert cfg.hidden_dim == ModelConfig().hidden_dim

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"input_len": 64, "horizont": 16}))
        with pytest.raises(ConfigError, match="horizont"):
            ModelConfig.from_file(path)

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            ModelConfig.from_file("/nonexistent/cfg.json")

    def test_hash_tracks_content(self):
        a = ModelConfig(seed=0)
        b = ModelConfig(seed=1)
        assert a.config_hash() == ModelConfig(seed=0).config_hash()
        assert a.config_hash() != b.config_hash()
