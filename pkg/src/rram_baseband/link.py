"""End-to-end MIMO-OFDM link: QAM mapping, fading channel, receiver chain, metrics.

Signal conventions: unit average symbol energy per transmit antenna, a
unitary DFT, and complex AWGN of variance ``1 / snr`` per received sample,
so that on every sub-carrier ``y = H x + z`` with ``E|z|^2 = 1 / snr``.

The channel is block fading: a fresh realization for every block of
``channel_update_period`` data OFDM symbols.  Unless perfect CSI is
configured, each block is preceded by ``n_t`` pilot OFDM symbols carrying the
columns of a unitary training matrix on every sub-carrier.  In crossbar mode
the receive DFT, channel estimation and detection run on simulated RRAM
arrays, and the detector bank (one circuit per sub-carrier) is reprogrammed
at the start of every block.  By default the bank starts out holding the
detector of an earlier, independent channel block, so every block pays the
steady-state cost of rewriting rather than the one-off cost of a fresh array.
The transmitter side is exact.
"""

import dataclasses
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel_est import PilotBlock, estimate_channel, is_identity_pilot, make_unitary_pilot, program_pilot
from .detect import LMMSE, ZF, build_detector, detect_algebraic, detect_exact
from .device import DeviceParams
from .errors import BadLengthError, EmptyInputError, IoError, ShapeMismatchError
from .ofdm import add_cyclic_prefix, dft, dft_matrix, idft, program_dft, remove_cyclic_prefix
from .perf import EnergyLatencyLedger

MER_CAP_DB = 200.0
MAX_DETECTOR_SNR = 1e12
PROCESSORS = ("ideal", "crossbar")
SCHEMES = ("verify", "no_verify")
CHANNEL_MODELS = ("rayleigh", "awgn", "fixed")


@dataclass(frozen=True)
class SystemConfig:
    n_c: int = 64
    n_t: int = 1
    n_r: int = 1
    modulation: int = 16
    cp_len: int = 3
    channel_taps: int = 4
    snr_db: float = 30.0
    processor: str = "ideal"
    scheme: str = "verify"
    tolerance: float = 0.01  # detector / pilot programming tolerance
    dft_tolerance: float = 0.005  # the DFT array is static and always written with verify
    channel_update_period: int = 14  # data OFDM symbols per channel block
    channel_model: str = "rayleigh"
    channel_matrix: tuple | None = None  # flat n_r x n_t channel for the "fixed" model
    detector: str = LMMSE
    pilot: str = "identity"
    perfect_csi: bool = False
    warm_start: bool = True  # detector bank starts out holding a previous, unrelated channel
    seed: int = 0
    device: DeviceParams = field(default_factory=DeviceParams)

    def __post_init__(self):
        if self.n_c < 1 or self.n_t < 1 or self.n_r < 1:
            raise ValueError("n_c, n_t and n_r must be >= 1")
        if self.n_r < self.n_t:
            raise ValueError("need n_r >= n_t")
        k = int(round(math.log(self.modulation, 4))) if self.modulation > 1 else 0
        if k < 1 or 4**k != self.modulation:
            raise ValueError(f"modulation order must be a power of 4, got {self.modulation}")
        if self.channel_taps < 1:
            raise ValueError("channel_taps must be >= 1")
        if self.cp_len < self.channel_taps - 1:
            raise ValueError("cp_len must be >= channel_taps - 1")
        if self.n_c > 1 and self.cp_len >= self.n_c:
            raise ValueError("cp_len must be < n_c")
        if self.processor not in PROCESSORS:
            raise ValueError(f"processor must be one of {PROCESSORS}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.channel_model not in CHANNEL_MODELS:
            raise ValueError(f"channel_model must be one of {CHANNEL_MODELS}")
        if self.detector not in (LMMSE, ZF):
            raise ValueError("detector must be 'lmmse' or 'zf'")
        if self.channel_update_period < 1:
            raise ValueError("channel_update_period must be >= 1")
        if not self.tolerance > 0 or not self.dft_tolerance > 0:
            raise ValueError("tolerances must be > 0")
        if self.channel_model == "fixed":
            h = self.fixed_channel()
            if h.shape != (self.n_r, self.n_t):
                raise ValueError(f"channel_matrix must have {self.n_r * self.n_t} entries")
            if self.channel_taps != 1:
                raise ValueError("a fixed channel is flat: channel_taps must be 1")
        if self.n_c == 1 and self.channel_taps != 1:
            raise ValueError("single-carrier links need a flat channel")

    @property
    def bits_per_symbol(self):
        return int(math.log2(self.modulation))

    @property
    def bits_per_frame(self):
        return self.n_c * self.n_t * self.bits_per_symbol

    @property
    def snr(self):
        return 10.0 ** (self.snr_db / 10.0)

    def fixed_channel(self):
        if self.channel_matrix is None:
            raise ValueError("channel_model 'fixed' needs channel_matrix")
        return np.asarray(self.channel_matrix, dtype=complex).reshape(self.n_r, self.n_t)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class ChannelRealization:
    taps: np.ndarray  # (n_r, n_t, channel_taps)
    n_c: int

    @property
    def freq(self):
        """Per-sub-carrier matrices H[k] = sum_l h_l exp(-2j pi k l / n_c), shape (n_c, n_r, n_t)."""
        l = np.arange(self.taps.shape[-1])
        k = np.arange(self.n_c)
        phase = np.exp(-2j * np.pi * np.outer(k, l) / self.n_c)
        return np.einsum("kl,rtl->krt", phase, self.taps)


@dataclass
class LinkMetrics:
    mer_db: float
    ber: float
    symbols_sent: int
    bits_sent: int
    bit_errors: int = 0
    signal_energy: float = 0.0
    error_energy: float = 0.0
    constellation: np.ndarray = field(repr=False, default=None)
    reference: np.ndarray = field(repr=False, default=None)


# QAM

def _gray_levels(m_side):
    """Gray code -> PAM amplitude index lookup for one dimension."""
    idx = np.arange(m_side)
    gray = idx ^ (idx >> 1)
    level_of_gray = np.empty(m_side, dtype=np.int64)
    level_of_gray[gray] = idx
    return level_of_gray, gray


def qam_scale(m):
    return math.sqrt(2.0 * (m - 1) / 3.0)


def _check_order(m):
    k = int(round(math.log(m, 4))) if m > 1 else 0
    if k < 1 or 4**k != m:
        raise ValueError(f"modulation order must be a power of 4, got {m}")
    return k


def qam_map(bits, m=16):
    """Gray-coded square QAM with unit average energy.

    Each symbol takes ``log2(m)`` bits: the first half select the in-phase
    level, the second half the quadrature level, most significant bit first.
    """
    k = _check_order(m)
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size % (2 * k):
        raise BadLengthError(f"bit count {bits.size} is not a multiple of {2 * k}")
    side = 1 << k
    level_of_gray, _ = _gray_levels(side)
    weights = 1 << np.arange(k - 1, -1, -1)
    b = bits.reshape(-1, 2, k)
    gi, gq = b[:, 0] @ weights, b[:, 1] @ weights
    amp = 2 * np.arange(side) - (side - 1)
    return (amp[level_of_gray[gi]] + 1j * amp[level_of_gray[gq]]) / qam_scale(m)


def qam_demap(symbols, m=16):
    """Hard minimum-distance decisions, one dimension at a time."""
    k = _check_order(m)
    side = 1 << k
    s = np.asarray(symbols, dtype=complex).ravel() * qam_scale(m)
    _, gray = _gray_levels(side)
    out = np.empty((s.size, 2, k), dtype=np.uint8)
    for d, comp in enumerate((s.real, s.imag)):
        idx = np.clip(np.floor((comp + side) / 2.0), 0, side - 1).astype(np.int64)
        g = gray[idx]
        for j in range(k):
            out[:, d, j] = (g >> (k - 1 - j)) & 1
    return out.reshape(-1)


def constellation(m=16):
    k = _check_order(m)
    n = 2 * k
    bits = ((np.arange(m)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)
    return qam_map(bits.ravel(), m), bits


# metrics

def compute_mer(received, ideal, cap_db=MER_CAP_DB):
    received = np.asarray(received, dtype=complex).ravel()
    ideal = np.asarray(ideal, dtype=complex).ravel()
    if received.size == 0:
        raise EmptyInputError("no symbols to compare")
    if received.size != ideal.size:
        raise ShapeMismatchError(f"{received.size} received vs {ideal.size} ideal symbols")
    err = float(np.sum(np.abs(received - ideal) ** 2))
    sig = float(np.sum(np.abs(ideal) ** 2))
    if err == 0:
        return cap_db
    return min(10.0 * math.log10(sig / err), cap_db)


def compute_ber(rx_bits, tx_bits):
    rx_bits = np.asarray(rx_bits).ravel()
    tx_bits = np.asarray(tx_bits).ravel()
    if tx_bits.size == 0:
        raise EmptyInputError("no bits to compare")
    if rx_bits.size != tx_bits.size:
        raise ShapeMismatchError(f"{rx_bits.size} received vs {tx_bits.size} sent bits")
    return float(np.count_nonzero(rx_bits != tx_bits)) / tx_bits.size


# channel

def generate_channel(cfg, rng):
    """Draw one block-fading realization.

    Rayleigh taps are i.i.d. CN(0, 1/L) so each antenna pair has unit average
    power.  ``awgn`` is the identity channel, ``fixed`` the configured matrix.
    """
    shape = (cfg.n_r, cfg.n_t, cfg.channel_taps)
    if cfg.channel_model == "rayleigh":
        taps = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2 * cfg.channel_taps)
    elif cfg.channel_model == "awgn":
        taps = np.zeros(shape, dtype=complex)
        taps[..., 0] = np.eye(cfg.n_r, cfg.n_t)
    else:
        taps = np.zeros(shape, dtype=complex)
        taps[..., 0] = cfg.fixed_channel()
    return ChannelRealization(taps, cfg.n_c)


def apply_channel(stream, realization):
    """Linear convolution of each transmit stream with its taps, summed per receive antenna.

    ``stream`` is (n_t, T); returns (n_r, T), truncated to the input length.
    """
    taps = realization.taps
    n_r = taps.shape[0]
    out = np.zeros((n_r, stream.shape[-1]), dtype=complex)
    t = stream.shape[-1]
    for l in range(taps.shape[-1]):
        if l >= t:
            break
        out[:, l:] += taps[:, :, l] @ stream[:, : t - l]
    return out


def awgn(shape, snr, rng):
    if not np.isfinite(snr):
        return np.zeros(shape, dtype=complex)
    return np.sqrt(0.5 / snr) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def ofdm_transmit(frames, cp_len, op=None, params=None, rng=None, ledger=None):
    """(n_frames, n_t, n_c) frequency symbols -> (n_t, n_frames * (n_c + cp_len)) serial samples."""
    n_frames, n_t, n_c = frames.shape
    if n_c == 1:
        return frames.transpose(1, 0, 2).reshape(n_t, -1)
    op = dft_matrix(n_c) if op is None else op
    time = add_cyclic_prefix(idft(frames, op, params, rng, ledger=ledger, lanes=n_t), cp_len)
    return time.transpose(1, 0, 2).reshape(n_t, -1)


def ofdm_receive_time(samples, n_c, cp_len):
    """(n_r, n_frames * (n_c + cp_len)) -> (n_frames, n_r, n_c) with CP removed."""
    n_r = samples.shape[0]
    frames = samples.reshape(n_r, -1, n_c + (cp_len if n_c > 1 else 0)).transpose(1, 0, 2)
    return frames if n_c == 1 else remove_cyclic_prefix(frames, cp_len, n_c)


@functools.lru_cache(maxsize=4)
def crossbar_dft(n_c, tolerance, params, seed):
    """Programmed receive-DFT array, shared by every run with the same settings."""
    rng = np.random.default_rng([seed, 0xDF7, n_c])
    op, _, delta = program_dft(dft_matrix(n_c), "verify", tolerance, params, rng)
    return op, delta


def _pilot_frames(p, n_c):
    # pilot OFDM symbol j carries column j of P on every sub-carrier
    return np.repeat(p.T[:, :, None], n_c, axis=2)


def run_link(cfg, payload_bits, rng, *, keep_constellation=4096):
    """Send ``payload_bits`` through the configured link.

    Returns ``(received_bits, LinkMetrics, EnergyLatencyLedger)``.  The
    generator is split into independent channel, noise and device streams,
    so the ideal and crossbar processors see identical channels and noise
    for the same generator seed.
    """
    bits = np.asarray(payload_bits, dtype=np.uint8).ravel()
    bpf = cfg.bits_per_frame
    if bits.size == 0 or bits.size % bpf:
        raise BadLengthError(f"payload of {bits.size} bits is not a whole number of {bpf}-bit OFDM symbols")
    n_sym = bits.size // bpf
    x = qam_map(bits, cfg.modulation).reshape(n_sym, cfg.n_t, cfg.n_c)
    ch_rng, noise_rng, dev_rng, warm_rng = rng.spawn(4)
    ledger = EnergyLatencyLedger()
    crossbar = cfg.processor == "crossbar"
    dev = cfg.device
    ofdm = cfg.n_c > 1
    rx_op = None
    if ofdm:
        rx_op = crossbar_dft(cfg.n_c, cfg.dft_tolerance, dev, cfg.seed)[0] if crossbar else dft_matrix(cfg.n_c)
    pilot = make_unitary_pilot(cfg.n_t, cfg.pilot)
    pilot_pair = None
    if crossbar and not cfg.perfect_csi and not is_identity_pilot(pilot):
        pilot_pair = program_pilot(pilot, "verify", cfg.tolerance, dev, dev_rng, ledger=ledger)
    det_snr = min(cfg.snr, MAX_DETECTOR_SNR)
    circuit = None
    if crossbar and cfg.warm_start:
        # steady state: the bank was last written for an earlier channel block (not charged)
        prior = generate_channel(cfg, warm_rng).freq
        circuit = build_detector(prior, det_snr, cfg.detector, cfg.scheme, dev, warm_rng, tolerance=cfg.tolerance)
    x_hat = np.empty_like(x)
    for start in range(0, n_sym, cfg.channel_update_period):
        xs = x[start:start + cfg.channel_update_period]
        n_data = xs.shape[0]
        real = generate_channel(cfg, ch_rng)
        n_pilot = 0 if cfg.perfect_csi else cfg.n_t
        frames = xs if cfg.perfect_csi else np.concatenate([_pilot_frames(pilot, cfg.n_c), xs])
        stream = ofdm_transmit(frames, cfg.cp_len)
        rx = apply_channel(stream, real)
        rx = rx + awgn(rx.shape, cfg.snr, noise_rng)
        time = ofdm_receive_time(rx, cfg.n_c, cfg.cp_len)
        if not ofdm:
            y = time
        elif crossbar:
            yp = dft(time[:n_pilot], rx_op, dev, dev_rng, ledger=ledger, lanes=cfg.n_r, count_ops=False) \
                if n_pilot else time[:0]
            yd = dft(time[n_pilot:], rx_op, dev, dev_rng, ledger=ledger, lanes=cfg.n_r)
            y = np.concatenate([yp, yd])
        else:
            y = dft(time, rx_op)
        if cfg.perfect_csi:
            h_hat = real.freq
        else:
            s = y[:n_pilot].transpose(2, 1, 0)  # (n_c, n_r, n_t)
            h_hat = estimate_channel(PilotBlock(pilot, s), "crossbar" if crossbar else "exact", dev, dev_rng,
                                     pair=pilot_pair, ledger=ledger if crossbar else None, lanes=cfg.n_c)
        yd = y[n_pilot:].transpose(0, 2, 1)  # (n_data, n_c, n_r)
        if crossbar:
            circuit = build_detector(h_hat, det_snr, cfg.detector, cfg.scheme, dev, dev_rng,
                                     tolerance=cfg.tolerance, ledger=ledger, circuit=circuit)
            xd = detect_algebraic(circuit, yd, dev, dev_rng, ledger=ledger).x_hat
        else:
            xd = detect_exact(h_hat, yd, det_snr, cfg.detector)
        x_hat[start:start + n_data] = xd.transpose(0, 2, 1)
    rx_bits = qam_demap(x_hat.ravel(), cfg.modulation)
    keep = min(keep_constellation, x.size)
    metrics = LinkMetrics(
        mer_db=compute_mer(x_hat, x),
        ber=compute_ber(rx_bits, bits),
        symbols_sent=int(x.size),
        bits_sent=int(bits.size),
        bit_errors=int(np.count_nonzero(rx_bits != bits)),
        signal_energy=float(np.sum(np.abs(x) ** 2)),
        error_energy=float(np.sum(np.abs(x_hat - x) ** 2)),
        constellation=x_hat.ravel()[:keep].copy(),
        reference=x.ravel()[:keep].copy(),
    )
    return rx_bits, metrics, ledger


def frames_for(cfg, n_bits):
    return -(-n_bits // cfg.bits_per_frame)


def random_payload(cfg, n_frames, rng):
    return rng.integers(0, 2, n_frames * cfg.bits_per_frame, dtype=np.uint8)


# images

def transmit_image(cfg, image, rng):
    """Send an 8-bit grayscale image; returns (recovered image, LinkMetrics)."""
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 2:
        raise ValueError("image must be a 2-D uint8 array")
    bits = np.unpackbits(image.ravel())
    n = frames_for(cfg, bits.size) * cfg.bits_per_frame
    payload = np.zeros(n, dtype=np.uint8)
    payload[: bits.size] = bits
    rx, metrics, _ = run_link(cfg, payload, rng)
    out = np.packbits(rx[: bits.size]).reshape(image.shape)
    sent = bits.size
    errors = int(np.count_nonzero(rx[:sent] != bits))
    metrics = dataclasses.replace(metrics, ber=errors / sent, bits_sent=sent, bit_errors=errors)
    return out, metrics


def read_pgm(path):
    """Read a binary (P5) 8-bit PGM image."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read image {path}: {exc.strerror}") from exc
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end == pos:
            raise IoError(f"{path}: truncated PGM header")
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise IoError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise IoError(f"{path}: only 8-bit PGM is supported")
    pixels = np.frombuffer(data[pos + 1:pos + 1 + width * height], dtype=np.uint8)
    if pixels.size != width * height:
        raise IoError(f"{path}: expected {width * height} pixels, found {pixels.size}")
    return pixels.reshape(height, width).copy()


def write_pgm(path, image):
    image = np.asarray(image, dtype=np.uint8)
    try:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii"))
            fh.write(image.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write image {path}: {exc.strerror}") from exc


def sample_image(size=28):
    """Deterministic digit-like test pattern (a ring and a bar on black)."""
    yy, xx = np.mgrid[:size, :size]
    c = (size - 1) / 2.0
    r = np.hypot(yy - c, xx - c)
    img = np.where(np.abs(r - size * 0.3) < size * 0.07, 255, 0)
    img[(np.abs(xx - yy) < size * 0.06) & (r < size * 0.3)] = 200
    return img.astype(np.uint8)
