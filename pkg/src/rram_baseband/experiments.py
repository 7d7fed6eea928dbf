"""Experiment drivers shared by the command-line tools and the acceptance tests.

Every driver is deterministic in ``seed``: trial ``t`` of point ``p`` uses the
generator ``default_rng([seed, p, t])`` for the link and a separate one for
the payload, and the same streams are reused across processor modes so that
modes are compared on identical channels and noise.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .link import (
    awgn,
    compute_mer,
    crossbar_dft,
    dft_matrix,
    ofdm_receive_time,
    ofdm_transmit,
    qam_map,
    random_payload,
    run_link,
    transmit_image,
)
from .ofdm import dft
from .perf import latency_scan

MODES = {
    "ideal": ("ideal", None),
    "verify": ("crossbar", "verify"),
    "no_verify": ("crossbar", "no_verify"),
}


def mode_config(cfg, mode):
    try:
        processor, scheme = MODES[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}; expected one of {sorted(MODES)}") from None
    return cfg.replace(processor=processor, scheme=scheme or cfg.scheme)


@dataclass
class SweepPoint:
    snr_db: float
    mode: str
    scheme: str
    mer_db: float
    ber: float
    bits: int
    bit_errors: int


def _trial(args):
    cfg, seed, point, trial, frames = args
    payload = random_payload(cfg, frames, np.random.default_rng([seed, point, trial, 1]))
    _, m, _ = run_link(cfg, payload, np.random.default_rng([seed, point, trial]), keep_constellation=0)
    return m.bit_errors, m.bits_sent, m.signal_energy, m.error_energy


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def sweep_snr(cfg, snr_list, modes, bits_per_point, trials, seed, jobs=1):
    """BER / MER per (SNR, mode); trials are pooled by summing errors and energies."""
    frames = max(1, math.ceil(bits_per_point / (trials * cfg.bits_per_frame)))
    tasks, keys = [], []
    for p, snr in enumerate(snr_list):
        for mode in modes:
            c = mode_config(cfg, mode).replace(snr_db=float(snr))
            for t in range(trials):
                tasks.append((c, seed, p, t, frames))
                keys.append((p, mode))
    results = _map(_trial, tasks, jobs)
    points = []
    for p, snr in enumerate(snr_list):
        for mode in modes:
            rs = [r for k, r in zip(keys, results) if k == (p, mode)]
            errs = sum(r[0] for r in rs)
            bits = sum(r[1] for r in rs)
            sig = sum(r[2] for r in rs)
            err_e = sum(r[3] for r in rs)
            mer = 200.0 if err_e == 0 else min(10 * math.log10(sig / err_e), 200.0)
            scheme = "none" if mode == "ideal" else mode
            points.append(SweepPoint(float(snr), mode, scheme, mer, errs / bits, bits, errs))
    return points


def ofdm_demo(cfg, symbols, snr_db, seed):
    """Single-antenna OFDM over an AWGN channel with the receive DFT on the crossbar.

    Returns ``(received, sent)`` frequency-domain symbols of shape
    ``(symbols, n_c)``; no equalisation is applied.
    """
    if cfg.n_t != 1 or cfg.n_r != 1:
        raise ValueError("the OFDM demo is single-antenna")
    rng = np.random.default_rng([seed, 0x0FD])
    bits = rng.integers(0, 2, symbols * cfg.bits_per_frame, dtype=np.uint8)
    x = qam_map(bits, cfg.modulation).reshape(symbols, 1, cfg.n_c)
    stream = ofdm_transmit(x, cfg.cp_len)
    noise_rng, dev_rng = rng.spawn(2)
    rx = stream + awgn(stream.shape, 10.0 ** (snr_db / 10.0), noise_rng)
    time = ofdm_receive_time(rx, cfg.n_c, cfg.cp_len)
    if cfg.processor == "crossbar":
        op = crossbar_dft(cfg.n_c, cfg.dft_tolerance, cfg.device, cfg.seed)[0]
        y = dft(time, op, cfg.device, dev_rng)
    else:
        y = dft(time, dft_matrix(cfg.n_c))
    return y[:, 0, :], x[:, 0, :]


def mimo_demo(cfg, snr_list, symbols, seed):
    """Narrow-band MIMO detection at each SNR; returns a list of (snr, LinkMetrics)."""
    out = []
    for p, snr in enumerate(snr_list):
        c = cfg.replace(snr_db=float(snr))
        payload = random_payload(c, symbols, np.random.default_rng([seed, p, 1]))
        _, m, _ = run_link(c, payload, np.random.default_rng([seed, p]), keep_constellation=payload.size)
        out.append((float(snr), m))
    return out


def image_demo(cfg, image, modes, seed):
    out = []
    for mode in modes:
        img, m = transmit_image(mode_config(cfg, mode), image, np.random.default_rng([seed, 0x1A6]))
        out.append((mode, img, m))
    return out


def scan(cfg, sizes, schemes, trials, seed, full_scale, tolerance):
    reports = []
    for i, scheme in enumerate(schemes):
        rng = np.random.default_rng([seed, 0x5CA, i])
        reports.append(latency_scan(sizes, scheme, cfg.device, trials, rng, full_scale=full_scale,
                                    tolerance=tolerance))
    return reports


def dft_demo_mer(cfg, symbols, seed):
    y, x = ofdm_demo(cfg.replace(processor="crossbar"), symbols, float("inf"), seed)
    return compute_mer(y, x)


def calibrate_read_noise(cfg, target_mer_db, symbols=500, seed=0, lo=1e-4, hi=0.1, iters=30):
    """Bisect ``sigma_read`` so the noiseless-channel DFT demo hits ``target_mer_db``."""
    crossbar_dft.cache_clear()

    def mer(sigma):
        c = cfg.replace(device=cfg.device.replace(sigma_read=sigma))
        return dft_demo_mer(c, symbols, seed)

    m_lo, m_hi = mer(lo), mer(hi)
    if not m_hi <= target_mer_db <= m_lo:
        raise ValueError(f"target {target_mer_db} dB outside reachable range [{m_hi:.2f}, {m_lo:.2f}] dB")
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if mer(mid) > target_mer_db:
            lo = mid
        else:
            hi = mid
    sigma = math.sqrt(lo * hi)
    return sigma, mer(sigma)
