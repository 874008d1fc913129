"""Key = value parsing, typed overlay, and precedence."""
from __future__ import annotations

import pytest

from querysmt import ConfigError, PipelineConfig, load_config
from querysmt.config import apply_kv, parse_kv_file, parse_kv_text, write_kv_file


class TestParseKv:
    def test_basic_lines(self):
        got = parse_kv_text("a = 1\nb= two \n c =3")
        assert got == {"a": "1", "b": "two", "c": "3"}

    def test_comments_and_blanks_ignored(self):
        got = parse_kv_text("# header\n\na = 1\n   # indented comment\n")
        assert got == {"a": "1"}

    def test_value_may_contain_equals(self):
        assert parse_kv_text("url = http://h:1/?q=x")["url"] == "http://h:1/?q=x"

    def test_later_key_wins(self):
        assert parse_kv_text("a = 1\na = 2") == {"a": "2"}

    def test_missing_equals_rejected_with_line(self):
        with pytest.raises(ConfigError, match=":2:"):
            parse_kv_text("a = 1\nnot a pair")

    def test_empty_key_rejected(self):
        with pytest.raises(ConfigError, match="empty key"):
            parse_kv_text(" = 1")

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_kv_file(tmp_path / "nope.conf")

    def test_write_read_round_trip(self, tmp_path):
        path = tmp_path / "c.conf"
        items = {"raw_tsv": "x.tsv", "seed": "7"}
        write_kv_file(path, items)
        assert parse_kv_file(path) == items


class TestApplyKv:
    def test_pipeline_scalars(self):
        cfg = apply_kv(PipelineConfig(), {"seed": "9", "dev_fraction": "0.25", "raw_tsv": "r.tsv"})
        assert cfg.seed == 9 and cfg.dev_fraction == 0.25 and cfg.raw_tsv == "r.tsv"

    def test_nested_sections_routed(self):
        cfg = apply_kv(
            PipelineConfig(),
            {
                "min_chars": "10",
                "strip_diacritics": "off",
                "min_jaccard": "0.5",
                "beam_size": "7",
                "weights.lm": "0.9",
            },
        )
        assert cfg.prefilter.min_chars == 10
        assert cfg.prefilter.norm.strip_diacritics is False
        assert cfg.norm.strip_diacritics is False  # convenience view
        assert cfg.simfilter.min_jaccard == 0.5
        assert cfg.decode.beam_size == 7
        assert cfg.weights.lm == 0.9

    @pytest.mark.parametrize("raw,expected", [("true", True), ("YES", True), ("1", True), ("on", True), ("false", False), ("no", False), ("0", False), ("off", False)])
    def test_bool_spellings(self, raw, expected):
        cfg = apply_kv(PipelineConfig(), {"strip_tatweel": raw})
        assert cfg.norm.strip_tatweel is expected

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key: turbo"):
            apply_kv(PipelineConfig(), {"turbo": "1"})

    @pytest.mark.parametrize(
        "kv,match",
        [
            ({"seed": "x"}, "integer"),
            ({"dev_fraction": "much"}, "number"),
            ({"strip_tatweel": "maybe"}, "boolean"),
        ],
    )
    def test_bad_values_rejected(self, kv, match):
        with pytest.raises(ConfigError, match=match):
            apply_kv(PipelineConfig(), kv)

    def test_invalid_setting_surfaces_as_config_error(self):
        with pytest.raises(ConfigError, match="beam_size"):
            apply_kv(PipelineConfig(), {"beam_size": "0"})

    def test_empty_site_blocklist_means_packaged_default(self):
        cfg = apply_kv(PipelineConfig(), {"site_blocklist": ""})
        assert cfg.prefilter.site_blocklist is None


class TestLoadConfig:
    def test_precedence(self, tmp_path):
        path = tmp_path / "c.conf"
        path.write_text("seed = 5\nbeam_size = 50\n", encoding="utf-8")
        cfg = load_config(path, overrides={"seed": "9"})
        assert cfg.seed == 9  # override beats file
        assert cfg.decode.beam_size == 50  # file beats default
        assert cfg.dev_cap == 500  # default untouched

    def test_no_inputs_gives_defaults(self):
        assert load_config() == PipelineConfig()
