"""QAM, metrics, channel model, the end-to-end link and image I/O."""

import numpy as np
import pytest

from oracles import convolve_streams, gray_qam_points, min_distance_demap
from rram_baseband.errors import BadLengthError, EmptyInputError, IoError, ShapeMismatchError
from rram_baseband.link import (
    SystemConfig,
    apply_channel,
    awgn,
    compute_ber,
    compute_mer,
    constellation,
    generate_channel,
    ofdm_receive_time,
    ofdm_transmit,
    qam_demap,
    qam_map,
    random_payload,
    read_pgm,
    run_link,
    sample_image,
    transmit_image,
    write_pgm,
)
from rram_baseband.device import DeviceParams

DEVICE = DeviceParams(n_states=64, sigma_c2c=0.3, sigma_read=0.006)


class TestQam:
    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_matches_textbook_gray(self, m):
        pts, labels = gray_qam_points(m)
        np.testing.assert_allclose(qam_map(labels.ravel(), m), pts, atol=1e-12)

    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_unit_energy(self, m):
        pts, _ = constellation(m)
        assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
        assert len(set(np.round(pts, 9))) == m

    def test_neighbours_differ_in_one_bit(self):
        pts, bits = constellation(16)
        d = np.abs(pts[:, None] - pts[None, :])
        dmin = d[d > 0].min()
        for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
            assert np.sum(bits[i] != bits[j]) == 1

    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_demap_matches_min_distance(self, rng, m):
        sym = qam_map(rng.integers(0, 2, 600 * int(np.log2(m))), m)
        noisy = sym + 0.3 * (rng.standard_normal(sym.size) + 1j * rng.standard_normal(sym.size))
        np.testing.assert_array_equal(qam_demap(noisy, m), min_distance_demap(noisy, m))

    def test_round_trip(self, rng):
        bits = rng.integers(0, 2, 4000, dtype=np.uint8)
        np.testing.assert_array_equal(qam_demap(qam_map(bits)), bits)

    def test_errors(self):
        with pytest.raises(BadLengthError):
            qam_map(np.zeros(6, dtype=np.uint8), 16)
        with pytest.raises(ValueError):
            qam_map(np.zeros(8, dtype=np.uint8), 8)


class TestMetrics:
    def test_mer_known_value(self):
        ideal = np.ones(100)
        assert compute_mer(ideal + 0.1, ideal) == pytest.approx(20.0)
        assert compute_mer(ideal, ideal) == 200.0

    def test_ber_known_value(self):
        assert compute_ber([0, 1, 1, 0], [0, 1, 0, 0]) == 0.25

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            compute_mer([], [])
        with pytest.raises(ShapeMismatchError):
            compute_mer([1, 2], [1])
        with pytest.raises(EmptyInputError):
            compute_ber([], [])
        with pytest.raises(ShapeMismatchError):
            compute_ber([1], [1, 0])


class TestChannel:
    def test_rayleigh_power(self, rng):
        cfg = SystemConfig(n_t=2, n_r=2, channel_taps=4)
        p = np.mean([np.sum(np.abs(generate_channel(cfg, rng).taps) ** 2, axis=-1) for _ in range(3000)])
        assert p == pytest.approx(1.0, rel=0.02)

    def test_awgn_variance(self, rng):
        z = awgn(200000, 10.0, rng)
        assert np.mean(np.abs(z) ** 2) == pytest.approx(0.1, rel=0.02)
        assert np.all(awgn(3, np.inf, rng) == 0)

    def test_convolution_matches_oracle(self, rng):
        cfg = SystemConfig(n_t=2, n_r=3, channel_taps=3)
        real = generate_channel(cfg, rng)
        s = rng.standard_normal((2, 50)) + 1j * rng.standard_normal((2, 50))
        np.testing.assert_allclose(apply_channel(s, real), convolve_streams(s, real.taps), atol=1e-12)

    def test_cp_makes_channel_per_subcarrier(self, rng):
        cfg = SystemConfig(n_c=32, n_t=2, n_r=2, cp_len=3, channel_taps=4)
        real = generate_channel(cfg, rng)
        x = qam_map(rng.integers(0, 2, 3 * cfg.bits_per_frame)).reshape(3, 2, 32)
        rx = apply_channel(ofdm_transmit(x, cfg.cp_len), real)
        y = np.fft.fft(ofdm_receive_time(rx, 32, 3), axis=-1, norm="ortho")
        expect = np.einsum("krt,ftk->frk", real.freq, x)
        np.testing.assert_allclose(y, expect, atol=1e-9)

    def test_fixed_channel(self):
        cfg = SystemConfig(n_c=1, n_t=2, n_r=2, cp_len=0, channel_taps=1, channel_model="fixed",
                           channel_matrix=(1, 2j, 3, 4))
        np.testing.assert_array_equal(generate_channel(cfg, None).freq[0], [[1, 2j], [3, 4]])


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(n_t=2, n_r=1), dict(modulation=8), dict(cp_len=1, channel_taps=4),
                                    dict(processor="gpu"), dict(scheme="maybe"), dict(channel_update_period=0),
                                    dict(channel_model="fixed"), dict(n_c=1), dict(tolerance=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SystemConfig(**kw)

    def test_derived(self):
        cfg = SystemConfig(n_c=64, n_t=4, n_r=4, modulation=16, snr_db=20)
        assert cfg.bits_per_symbol == 4
        assert cfg.bits_per_frame == 1024
        assert cfg.snr == pytest.approx(100.0)


class TestRunLink:
    def test_noiseless_ideal_is_error_free(self, rng):
        cfg = SystemConfig(n_c=16, n_t=2, n_r=2, cp_len=3, snr_db=float("inf"))
        bits = random_payload(cfg, 20, rng)
        rx, m, led = run_link(cfg, bits, rng)
        np.testing.assert_array_equal(rx, bits)
        assert m.mer_db > 100 and led.events == []

    def test_crossbar_close_to_ideal(self):
        cfg = SystemConfig(n_c=16, n_t=2, n_r=2, cp_len=3, snr_db=25.0, device=DEVICE, seed=3)
        bits = random_payload(cfg, 28, np.random.default_rng(0))
        _, ideal, _ = run_link(cfg, bits, np.random.default_rng(1))
        _, xb, led = run_link(cfg.replace(processor="crossbar"), bits, np.random.default_rng(1))
        assert xb.mer_db < ideal.mer_db
        assert ideal.mer_db - xb.mer_db < 3.0
        assert set(led.modules()) == {"dft", "detection"}

    def test_pilot_count(self):
        cfg = SystemConfig(n_c=8, n_t=2, n_r=2, cp_len=3, processor="crossbar", pilot="dft",
                           channel_update_period=5, device=DEVICE)
        _, _, led = run_link(cfg, random_payload(cfg, 10, np.random.default_rng(0)), np.random.default_rng(1))
        # two blocks, each with n_t pilot symbols and five data symbols, all n_r antennas
        assert led.invocations("dft") == 2 * (2 + 5) * 2
        assert led.invocations("estimation") == 2 * 2 * 2 * 8
        assert led.invocations("detection") == 10 * 8

    def test_same_seed_same_result(self):
        cfg = SystemConfig(n_c=8, n_t=2, n_r=2, cp_len=3, processor="crossbar", device=DEVICE)
        bits = random_payload(cfg, 6, np.random.default_rng(0))
        a = run_link(cfg, bits, np.random.default_rng(5))
        b = run_link(cfg, bits, np.random.default_rng(5))
        np.testing.assert_array_equal(a[0], b[0])
        assert a[1].mer_db == b[1].mer_db

    def test_bad_payload(self, rng):
        with pytest.raises(BadLengthError):
            run_link(SystemConfig(n_c=8), np.zeros(5, dtype=np.uint8), rng)


class TestImages:
    def test_pgm_round_trip(self, tmp_path):
        img = sample_image(20)
        write_pgm(tmp_path / "a.pgm", img)
        np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            read_pgm(tmp_path / "nope.pgm")

    def test_not_pgm(self, tmp_path):
        (tmp_path / "x.pgm").write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
        with pytest.raises(IoError):
            read_pgm(tmp_path / "x.pgm")

    def test_ideal_transfer_is_exact(self, rng):
        cfg = SystemConfig(n_c=16, n_t=2, n_r=4, cp_len=3, snr_db=30.0)
        img = sample_image(16)
        out, m = transmit_image(cfg, img, rng)
        np.testing.assert_array_equal(out, img)
        assert m.bits_sent == img.size * 8
