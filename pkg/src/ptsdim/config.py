"""INI-style experiment configuration.

Sections group keys for readability only; all keys share one flat
namespace.  ``[curve:NAME]`` sections override keys for one named curve,
so a single file can describe several curves of a figure::

    [system]
    n_u = 15
    ...
    [curve:direct]
    mode = direct
    [curve:aar80]
    mode = aar
    n_on = 80
"""

from __future__ import annotations

import configparser
from typing import Dict, List, Tuple

from .channel import ConfigError
from .simkit import SimConfig
from .txgen import AarSettings

__all__ = ["load_config", "parse_config", "build_config"]

_INT = {"n_u", "n_tx", "n_rx", "n_s", "n_a", "order", "min_bit_errors", "max_symbols", "seed",
        "channel_reuse", "shard_symbols", "calibration_samples", "n_on", "q_max"}
_FLOAT = {"sigma_err", "vth_scale", "alpha", "lambda", "grad_tol"}
_BOOL = {"noiseless", "accelerate", "polish", "warm_start"}
_STR = {"family", "variant", "mode", "detector", "snr_reference"}
_LIST = {"snr_db"}
KNOWN = _INT | _FLOAT | _BOOL | _STR | _LIST
_AAR_KEYS = {"n_on", "q_max", "alpha", "lambda", "accelerate", "polish", "warm_start", "grad_tol"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT:
            return int(raw)
        if key in _FLOAT:
            return float(raw)
        if key in _BOOL:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if key in _LIST:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ConfigError(f"invalid value for {key!r}: {raw!r}") from None


def _section_items(parser: configparser.ConfigParser, section: str) -> Dict:
    out = {}
    for key, raw in parser.items(section):
        if key not in KNOWN:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        out[key] = _convert(key, raw)
    return out


def build_config(values: Dict) -> SimConfig:
    """Turn a flat key dict into a validated :class:`SimConfig`."""
    v = dict(values)
    missing = [k for k in ("n_u", "n_tx", "n_rx", "n_s", "n_a") if k not in v]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    aar = None
    if v.get("mode", "direct") == "aar" or "n_on" in v:
        if "n_on" not in v:
            raise ConfigError("mode=aar requires n_on")
        aar = AarSettings(
            n_on=v["n_on"], q_max=v.get("q_max", 100), alpha=v.get("alpha", 0.01),
            lam=v.get("lambda"), accelerate=v.get("accelerate", True),
            polish=v.get("polish", True), warm_start=v.get("warm_start", False),
            grad_tol=v.get("grad_tol", 0.0))
    kwargs = {k: v[k] for k in ("n_u", "n_tx", "n_rx", "n_s", "n_a", "order", "family", "variant",
                                 "sigma_err", "min_bit_errors", "max_symbols", "seed",
                                 "channel_reuse", "detector", "vth_scale", "snr_reference",
                                 "noiseless", "shard_symbols", "calibration_samples") if k in v}
    kwargs["tx_mode"] = v.get("mode", "direct")
    kwargs["snr_grid_db"] = v.get("snr_db", ())
    return SimConfig(aar=aar, **kwargs).validate()


def parse_config(text: str, overrides: Dict = None) -> List[Tuple[str, SimConfig]]:
    """Parse config text into ``(curve_name, SimConfig)`` pairs.

    Without curve sections a single curve named after its mode is returned.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    base: Dict = {}
    curves: List[Tuple[str, Dict]] = []
    for section in parser.sections():
        items = _section_items(parser, section)
        if section.startswith("curve:"):
            name = section.split(":", 1)[1].strip()
            if not name:
                raise ConfigError("curve section needs a name")
            curves.append((name, items))
        else:
            base.update(items)
    overrides = overrides or {}
    if not curves:
        merged = {**base, **overrides}
        return [(merged.get("mode", "direct"), build_config(merged))]
    return [(name, build_config({**base, **items, **overrides})) for name, items in curves]


def load_config(path, overrides: Dict = None) -> List[Tuple[str, SimConfig]]:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)
