"""INI experiment configs.

Three sections, all optional: ``[system]`` (fields of :class:`SystemConfig`),
``[device]`` (fields of :class:`DeviceParams`) and ``[run]`` (experiment
settings used by the command-line tools).  Unknown sections or keys raise
:class:`ConfigError`.  A config may be given as a path or as the name of a
bundled preset.
"""

import configparser
import dataclasses
import math
from importlib import resources
from pathlib import Path

from .device import DeviceParams
from .errors import ConfigError
from .link import SystemConfig

RUN_DEFAULTS = {
    "snr_list": [10.0, 15.0, 20.0, 25.0, 30.0],
    "modes": ["ideal", "verify", "no_verify"],
    "bits_per_point": 100_000,
    "trials": 1,
    "symbols": 256,
    "sizes": [8, 16, 32, 64, 128],
    "schemes": ["no_verify", "verify"],
    "full_scale": 4.0,
    "scan_tolerance": 0.01,
    "image": "",
}


def preset_names():
    return sorted(p.name[:-4] for p in resources.files("rram_baseband").joinpath("presets").iterdir()
                  if p.name.endswith(".ini"))


def _resolve(source):
    path = Path(source)
    if path.exists():
        return path.read_text(), str(path)
    name = source[:-4] if source.endswith(".ini") else source
    preset = resources.files("rram_baseband").joinpath("presets", f"{name}.ini")
    if preset.is_file():
        return preset.read_text(), f"preset:{name}"
    raise ConfigError(f"config {source!r} is neither a file nor a preset ({', '.join(preset_names())})")


def _parse_scalar(raw, kind, key):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is complex:
            return complex(raw.replace(" ", ""))
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from exc
    return raw


def _list(raw, kind, key):
    return [_parse_scalar(x, kind, key) for x in raw.split(",") if x.strip()]


_SYSTEM_TYPES = {
    "n_c": int, "n_t": int, "n_r": int, "modulation": int, "cp_len": int, "channel_taps": int,
    "snr_db": float, "processor": str, "scheme": str, "tolerance": float, "dft_tolerance": float,
    "channel_update_period": int, "channel_model": str, "detector": str, "pilot": str,
    "perfect_csi": bool, "warm_start": bool, "seed": int,
}
_DEVICE_TYPES = {f.name: (int if f.name == "n_states" else float) for f in dataclasses.fields(DeviceParams)}
_RUN_TYPES = {
    "snr_list": (list, float), "modes": (list, str), "bits_per_point": int, "trials": int,
    "symbols": int, "sizes": (list, int), "schemes": (list, str), "full_scale": float,
    "scan_tolerance": float, "image": str,
}


def parse_config(text, origin="<string>"):
    """Returns ``(SystemConfig, run_settings_dict)``."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    unknown = set(parser.sections()) - {"system", "device", "run"}
    if unknown:
        raise ConfigError(f"{origin}: unknown section(s) {sorted(unknown)}")
    sys_kw, dev_kw, run = {}, {}, dict(RUN_DEFAULTS)
    if parser.has_section("device"):
        for key, raw in parser.items("device"):
            if key not in _DEVICE_TYPES:
                raise ConfigError(f"{origin}: unknown device key {key!r}")
            if key == "mean_step" and raw.strip().lower() in ("", "none", "auto"):
                dev_kw[key] = None
            else:
                dev_kw[key] = _parse_scalar(raw, _DEVICE_TYPES[key], key)
    if parser.has_section("system"):
        for key, raw in parser.items("system"):
            if key == "channel_matrix":
                sys_kw[key] = tuple(_list(raw, complex, key))
            elif key in _SYSTEM_TYPES:
                sys_kw[key] = _parse_scalar(raw, _SYSTEM_TYPES[key], key)
            else:
                raise ConfigError(f"{origin}: unknown system key {key!r}")
    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            if key not in _RUN_TYPES:
                raise ConfigError(f"{origin}: unknown run key {key!r}")
            kind = _RUN_TYPES[key]
            run[key] = _list(raw, kind[1], key) if isinstance(kind, tuple) else _parse_scalar(raw, kind, key)
    try:
        device = DeviceParams(**dev_kw)
        cfg = SystemConfig(device=device, **sys_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    return cfg, run


def load_config(source):
    text, origin = _resolve(source)
    return parse_config(text, origin)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    if isinstance(value, complex):
        return repr(value).strip("()")
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    return "none" if value is None else str(value)


def config_snapshot(cfg, run):
    """Plain dict view of a parsed config, as stored in run manifests."""
    system = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg) if f.name != "device"}
    device = dataclasses.asdict(cfg.device)
    return {
        "system": {k: _fmt(v) for k, v in system.items()},
        "device": {k: _fmt(v) for k, v in device.items()},
        "run": {k: _fmt(v) for k, v in run.items()},
    }
