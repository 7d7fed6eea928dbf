"""INI configs and bundled presets."""

import pytest

from rram_baseband.config import RUN_DEFAULTS, config_snapshot, load_config, parse_config, preset_names
from rram_baseband.errors import ConfigError


class TestPresets:
    def test_names(self):
        assert {"awgn_siso", "image_demo", "mimo_demo", "ofdm_demo", "paper_4x4"} <= set(preset_names())

    @pytest.mark.parametrize("name", ["awgn_siso", "image_demo", "mimo_demo", "ofdm_demo", "paper_4x4"])
    def test_all_load(self, name):
        cfg, run = load_config(name)
        assert set(run) == set(RUN_DEFAULTS)
        snap = config_snapshot(cfg, run)
        assert set(snap) == {"system", "device", "run"}

    def test_paper_preset(self):
        cfg, _ = load_config("paper_4x4.ini")
        assert (cfg.n_c, cfg.n_t, cfg.n_r) == (1024, 4, 4)

    def test_file_path(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[system]\nn_c = 8\n[run]\nsizes = 4, 8\n")
        cfg, run = load_config(str(p))
        assert cfg.n_c == 8 and run["sizes"] == [4, 8]

    def test_missing(self):
        with pytest.raises(ConfigError, match="neither"):
            load_config("no_such_preset")


class TestParsing:
    def test_types(self):
        cfg, run = parse_config("[system]\nperfect_csi = yes\nsnr_db = 12.5\n"
                                "[device]\nn_states = 32\nmean_step = auto\n[run]\nmodes = ideal, verify\n")
        assert cfg.perfect_csi is True and cfg.snr_db == 12.5
        assert cfg.device.n_states == 32 and cfg.device.mean_step is None
        assert run["modes"] == ["ideal", "verify"]

    def test_complex_matrix(self):
        cfg, _ = parse_config("[system]\nn_c = 1\nn_t = 1\nn_r = 1\ncp_len = 0\nchannel_taps = 1\n"
                              "channel_model = fixed\nchannel_matrix = 0.5 - 1j\n")
        assert cfg.channel_matrix == (0.5 - 1j,)

    @pytest.mark.parametrize("text,match", [
        ("[system]\ncolour = red\n", "unknown system key"),
        ("[device]\nweight = 3\n", "unknown device key"),
        ("[run]\nspeed = 3\n", "unknown run key"),
        ("[extra]\na = 1\n", "unknown section"),
        ("[system]\nn_c = many\n", "cannot parse"),
        ("[system]\nperfect_csi = perhaps\n", "cannot parse"),
        ("[system]\nn_t = 4\nn_r = 2\n", "n_r >= n_t"),
        ("[device]\ng_min = 1\ng_max = 0.5\n", "g_min"),
        ("no header\n", "section"),
    ])
    def test_errors(self, text, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(text)
