"""Command-line front end: ``rram-baseband <subcommand> [options]``.

Every subcommand writes CSV files plus ``manifest.json`` into ``--out``.
CSV content depends only on the config and seed; the manifest also records
wall-clock timestamps.  On failure a single line

    error: <ErrorType>: <message>

is printed to stderr and the exit status is nonzero (2 for config errors,
3 for I/O errors, 1 otherwise).
"""

import argparse
import csv
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_snapshot, load_config
from .crossbar import effective_matrix, error_matrix, write_error_csv
from .detect import write_constellation_csv
from .device import device_statistics
from .errors import ConfigError, IoError, RramBasebandError
from .experiments import calibrate_read_noise, image_demo, mimo_demo, ofdm_demo, scan, sweep_snr
from .link import compute_mer, crossbar_dft, read_pgm, sample_image, write_pgm

DEFAULT_PRESETS = {
    "sweep-snr": "paper_4x4",
    "ofdm-demo": "ofdm_demo",
    "mimo-demo": "mimo_demo",
    "latency-scan": "paper_4x4",
    "image": "image_demo",
    "calibrate-device": "ofdm_demo",
}


def fmt(x):
    """Deterministic text form of a CSV cell."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.10g}"
    return str(x)


class Run:
    def __init__(self, args, command):
        self.args = args
        self.command = command
        self.out = Path(args.out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create output directory {self.out}: {exc.strerror}") from exc
        self.files = []
        self.started = datetime.now(timezone.utc).isoformat()
        self.cfg, self.run = load_config(args.config or DEFAULT_PRESETS[command])
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be >= 1")
            self.run["trials"] = args.trials

    @property
    def seed(self):
        return self.cfg.seed if self.args.seed is None else self.args.seed

    def path(self, name):
        p = self.out / name
        self.files.append(name)
        return p

    def write_csv(self, name, header, rows):
        p = self.path(name)
        try:
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                for row in rows:
                    w.writerow([fmt(v) for v in row])
        except OSError as exc:
            raise IoError(f"cannot write {p}: {exc.strerror}") from exc
        return p

    def finish(self):
        manifest = {
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "config_source": self.args.config or f"preset:{DEFAULT_PRESETS[self.command]}",
            "config": config_snapshot(self.cfg, self.run),
            "outputs": sorted(self.files),
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
        }
        p = self.out / "manifest.json"
        try:
            p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise IoError(f"cannot write {p}: {exc.strerror}") from exc


def _plot(run, name, draw):
    if not run.args.plot:
        return
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("warning: matplotlib not installed; skipping plots", file=sys.stderr)
        return
    fig, ax = plt.subplots(figsize=(5, 4))
    draw(ax)
    fig.tight_layout()
    fig.savefig(run.path(name), format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_sweep_snr(args):
    run = Run(args, "sweep-snr")
    snrs = args.snr if args.snr else run.run["snr_list"]
    modes = args.modes if args.modes else run.run["modes"]
    points = sweep_snr(run.cfg, snrs, modes, run.run["bits_per_point"], run.run["trials"], run.seed, args.jobs)
    run.write_csv("sweep.csv", ["snr_db", "mode", "scheme", "mer_db", "ber", "bits"],
                  [(p.snr_db, p.mode, p.scheme, p.mer_db, p.ber, p.bits) for p in points])

    def curves(key, log):
        def draw(ax):
            for mode in modes:
                pts = [p for p in points if p.mode == mode]
                ys = [max(getattr(p, key), 1e-7) if log else getattr(p, key) for p in pts]
                ax.plot([p.snr_db for p in pts], ys, marker="o", label=mode)
            if log:
                ax.set_yscale("log")
            ax.set_xlabel("SNR (dB)")
            ax.set_ylabel(key)
            ax.legend()
        return draw

    _plot(run, "mer.svg", curves("mer_db", False))
    _plot(run, "ber.svg", curves("ber", True))
    for p in points:
        print(f"snr={p.snr_db:g} mode={p.mode} mer_db={p.mer_db:.2f} ber={p.ber:.4e}")
    run.finish()


def cmd_ofdm_demo(args):
    run = Run(args, "ofdm-demo")
    snrs = args.snr if args.snr else run.run["snr_list"]
    rows = []
    for snr in snrs:
        y, x = ofdm_demo(run.cfg, run.run["symbols"], snr, run.seed)
        mer = compute_mer(y, x)
        tag = "noiseless" if math.isinf(snr) else f"{snr:g}dB"
        write_constellation_csv(run.path(f"constellation_{tag}.csv"), y, x)
        rows.append((snr, mer, y.size))
        print(f"snr={snr:g} mer_db={mer:.2f} symbols={y.size}")
        _plot(run, f"constellation_{tag}.svg", lambda ax, y=y: (ax.scatter(y.real.ravel(), y.imag.ravel(), s=2),
                                                                 ax.set_aspect("equal")))
    run.write_csv("mer.csv", ["snr_db", "mer_db", "symbols"], rows)
    if run.cfg.processor == "crossbar":
        op = crossbar_dft(run.cfg.n_c, run.cfg.dft_tolerance, run.cfg.device, run.cfg.seed)[0]
        write_error_csv(run.path("dft_stored_matrix.csv"), effective_matrix(op.pair))
        write_error_csv(run.path("dft_error_matrix.csv"), error_matrix(op.pair))
    run.finish()


def cmd_mimo_demo(args):
    run = Run(args, "mimo-demo")
    snrs = args.snr if args.snr else run.run["snr_list"]
    results = mimo_demo(run.cfg, snrs, run.run["symbols"], run.seed)
    rows = []
    for snr, m in results:
        write_constellation_csv(run.path(f"constellation_{snr:g}dB.csv"), m.constellation, m.reference)
        rows.append((snr, m.mer_db, m.ber, m.symbols_sent))
        print(f"snr={snr:g} mer_db={m.mer_db:.2f} ber={m.ber:.4e}")
    run.write_csv("mer.csv", ["snr_db", "mer_db", "ber", "symbols"], rows)
    run.finish()


def cmd_latency_scan(args):
    run = Run(args, "latency-scan")
    sizes = args.sizes if args.sizes else run.run["sizes"]
    trials = max(run.run["trials"], 30) if args.trials is None else run.run["trials"]
    reports = scan(run.cfg, sizes, run.run["schemes"], trials, run.seed, run.run["full_scale"],
                   run.run["scan_tolerance"])
    rows, fits = [], []
    for rep in reports:
        for r in rep.rows():
            rows.append(tuple(r.values()))
        for model, fit in sorted(rep.fits.items()):
            coef = fit["coef"] if isinstance(fit["coef"], list) else [fit["coef"]]
            fits.append((rep.scheme, model, ";".join(fmt(c) for c in coef), fit["rel_rms_residual"],
                         rep.bound_ratio("n_ln_n"), rep.bound_ratio("n_sqrt_ln_n")))
        print(f"scheme={rep.scheme} latency_s=" + ",".join(f"{v:.4g}" for v in rep.mean_latency))
    run.write_csv("latency_scan.csv", list(reports[0].rows()[0].keys()), rows)
    run.write_csv("latency_fits.csv", ["scheme", "model", "coef", "rel_rms_residual", "ratio_n_ln_n",
                                       "ratio_n_sqrt_ln_n"], fits)

    def draw(ax):
        for rep in reports:
            ax.loglog(rep.sizes, rep.mean_latency, marker="o", label=rep.scheme)
        ax.set_xlabel("N")
        ax.set_ylabel("latency (s)")
        ax.legend()

    _plot(run, "latency.svg", draw)
    run.finish()


def cmd_image(args):
    run = Run(args, "image")
    source = args.image or run.run["image"]
    image = read_pgm(source) if source else sample_image()
    modes = args.modes if args.modes else run.run["modes"]
    rows = []
    for mode, img, m in image_demo(run.cfg, image, modes, run.seed):
        write_pgm(run.path(f"recovered_{mode}.pgm"), img)
        exact = bool(np.array_equal(img, image))
        rows.append((mode, run.cfg.snr_db, m.mer_db, m.ber, m.bits_sent, exact))
        print(f"mode={mode} mer_db={m.mer_db:.2f} ber={m.ber:.4e} exact={exact}")
    run.write_csv("image_metrics.csv", ["mode", "snr_db", "mer_db", "ber", "bits", "pixel_exact"], rows)
    run.finish()


def cmd_calibrate_device(args):
    run = Run(args, "calibrate-device")
    rng = np.random.default_rng([run.seed, 0xCA1])
    stats = device_statistics(run.cfg.device, rng, trials=run.run["trials"] if args.trials else 10_000,
                              tolerance=run.cfg.tolerance)
    rows = sorted(stats.items())
    if args.target_mer is not None:
        sigma, mer = calibrate_read_noise(run.cfg, args.target_mer, seed=run.seed)
        rows += [("calibrated_sigma_read", sigma), ("calibrated_dft_mer_db", mer)]
    run.write_csv("device_stats.csv", ["quantity", "value"], rows)
    for k, v in rows:
        print(f"{k}={fmt(v)}")
    run.finish()


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _words(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file or bundled preset name")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--plot", action="store_true", help="also write SVG plots (needs matplotlib)")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for independent trials")

    parser = argparse.ArgumentParser(prog="rram-baseband", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-snr", parents=[common], help="BER/MER versus SNR for each processor mode")
    p.add_argument("--snr", type=_floats, help="comma-separated SNR list in dB")
    p.add_argument("--modes", type=_words, help="subset of ideal,verify,no_verify")
    p.set_defaults(func=cmd_sweep_snr)

    p = sub.add_parser("ofdm-demo", parents=[common], help="single-antenna OFDM with the crossbar DFT")
    p.add_argument("--snr", type=_floats, help="comma-separated SNR list in dB (inf for noiseless)")
    p.set_defaults(func=cmd_ofdm_demo)

    p = sub.add_parser("mimo-demo", parents=[common], help="narrow-band MIMO detection constellations")
    p.add_argument("--snr", type=_floats, help="comma-separated SNR list in dB")
    p.set_defaults(func=cmd_mimo_demo)

    p = sub.add_parser("latency-scan", parents=[common], help="row-by-row write latency versus array size")
    p.add_argument("--sizes", type=_ints, help="comma-separated array sizes")
    p.set_defaults(func=cmd_latency_scan)

    p = sub.add_parser("image", parents=[common], help="send a grayscale PGM image over the link")
    p.add_argument("--image", help="binary PGM (P5) file; default is a built-in test pattern")
    p.add_argument("--modes", type=_words, help="subset of ideal,verify,no_verify")
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("calibrate-device", parents=[common], help="Monte Carlo statistics of the device model")
    p.add_argument("--target-mer", type=float, help="fit sigma_read so the noiseless DFT demo hits this MER (dB)")
    p.set_defaults(func=cmd_calibrate_device)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        args.func(args)
    except ConfigError as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return 2
    except (IoError, OSError) as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 3
    except (RramBasebandError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
