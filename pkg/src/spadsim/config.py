"""Scenario config files: JSON in, validated and normalized scenarios out.

A config names exactly one experiment kind, a seed, a detector (preset name
or inline parameter object), kind-specific source and instrument settings,
and the output files to write. Validation is strict: unknown keys are
rejected and every error message names the offending field path, so a typo
in a parameter name can never silently fall back to a default. Durations
are integer picoseconds; rates and probabilities are reals.
"""

from __future__ import annotations

import json

from .detector import DetectorParams
from .presets import available_presets, preset
from .qkd import FrameConfig

__all__ = ["ConfigError", "KINDS", "load_config", "validate_config"]

KINDS = ("interarrival", "jitter-scan", "pair-scan", "twilight", "autocorr", "qkd", "keyrate")

CONFIG_VERSION = 1


class ConfigError(Exception):
    """A scenario config is malformed; the message names the field."""


def _err(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _mapping(v, path: str) -> dict:
    if not isinstance(v, dict):
        _err(path, "must be an object")
    return v


def _known(d: dict, allowed, path: str) -> None:
    unknown = [k for k in d if k not in allowed]
    if unknown:
        onekey = ", ".join(repr(k) for k in sorted(unknown))
        _err(path, f"unknown key(s) {onekey}; allowed: {', '.join(sorted(allowed))}")


_MISSING = object()


def _field(d: dict, key: str, path: str, default=_MISSING):
    if key in d:
        return d[key]
    if default is _MISSING:
        _err(path + "." + key, "is required")
    return default


def _int(v, path: str, *, minimum=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        _err(path, f"must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        _err(path, f"must be >= {minimum}, got {v}")
    return v


def _num(v, path: str, *, minimum=None, maximum=None) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _err(path, f"must be a number, got {v!r}")
    v = float(v)
    if minimum is not None and v < minimum:
        _err(path, f"must be >= {minimum}, got {v}")
    if maximum is not None and v > maximum:
        _err(path, f"must be <= {maximum}, got {v}")
    return v


def _bool(v, path: str) -> bool:
    if not isinstance(v, bool):
        _err(path, f"must be true or false, got {v!r}")
    return v


def _str(v, path: str) -> str:
    if not isinstance(v, str):
        _err(path, f"must be a string, got {v!r}")
    return v


def _parse_detector(doc: dict, key: str) -> DetectorParams:
    d = _mapping(_field(doc, key, "config"), key)
    _known(d, ("preset", "variant", "params"), key)
    has_preset = "preset" in d
    has_params = "params" in d
    if has_preset == has_params:
        _err(key, "needs exactly one of 'preset' or 'params'")
    if has_preset:
        name = _str(d["preset"], key + ".preset")
        variant = _str(d.get("variant", "timing"), key + ".variant")
        try:
            return preset(name, variant=variant).params
        except ValueError as exc:
            _err(key + ".preset", str(exc))
    try:
        return DetectorParams.from_dict(_mapping(d["params"], key + ".params"))
    except (KeyError, TypeError) as exc:
        _err(key + ".params", f"missing or malformed field: {exc}")
    except ValueError as exc:
        _err(key + ".params", str(exc))


def _parse_outputs(doc: dict, allowed, path: str = "outputs") -> dict:
    out = _mapping(doc.get("outputs", {}), path)
    _known(out, allowed, path)
    return {k: _str(v, f"{path}.{k}") for k, v in out.items()}


def _parse_pair_scan_source(src: dict) -> dict:
    _known(src, ("delta_ts_ps", "pair_period_ps", "n_pairs", "occupancy"), "source")
    dts = _field(src, "delta_ts_ps", "source")
    if not isinstance(dts, list) or not dts:
        _err("source.delta_ts_ps", "must be a non-empty list of integers")
    dts = [_int(v, f"source.delta_ts_ps[{i}]", minimum=1) for i, v in enumerate(dts)]
    period = _int(_field(src, "pair_period_ps", "source"), "source.pair_period_ps", minimum=1)
    if any(dt >= period for dt in dts):
        _err("source.delta_ts_ps", f"every spacing must be < pair_period_ps ({period})")
    return {
        "delta_ts_ps": dts,
        "pair_period_ps": period,
        "n_pairs": _int(_field(src, "n_pairs", "source"), "source.n_pairs", minimum=1),
        "occupancy": _num(
            src.get("occupancy", 1.0), "source.occupancy", minimum=0.0, maximum=1.0
        ),
    }


def validate_config(doc) -> dict:
    """Validate a parsed config document and normalize it for the runner.

    Returns a dict with kind, seed, live parameter objects, filled-in
    defaults, and the declared outputs. Raises ConfigError naming the field
    on the first problem found.
    """
    doc = _mapping(doc, "config")
    version = _int(_field(doc, "version", "config"), "version")
    if version != CONFIG_VERSION:
        _err("version", f"unsupported config version {version}, expected {CONFIG_VERSION}")
    kind = _str(_field(doc, "kind", "config"), "kind")
    if kind not in KINDS:
        _err("kind", f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    seed = _int(_field(doc, "seed", "config"), "seed", minimum=0)

    top_allowed = {"version", "kind", "seed", "outputs"}
    norm = {"kind": kind, "seed": seed}

    if kind == "interarrival":
        _known(doc, top_allowed | {"detector", "source", "instrument"}, "config")
        src = _mapping(_field(doc, "source", "config"), "source")
        _known(src, ("rate_cps", "duration_ps"), "source")
        ins = _mapping(doc.get("instrument", {}), "instrument")
        _known(
            ins,
            ("bin_width_ps", "span_ps", "analyze", "spectroscopy", "tau_trap_guess_ps"),
            "instrument",
        )
        bin_width = _int(ins.get("bin_width_ps", 1000), "instrument.bin_width_ps", minimum=1)
        span = ins.get("span_ps")
        if span is not None:
            span = _int(span, "instrument.span_ps", minimum=bin_width)
            if span % bin_width != 0:
                _err("instrument.span_ps", f"must be a multiple of bin_width_ps ({bin_width})")
        norm.update(
            detector=_parse_detector(doc, "detector"),
            rate_cps=_num(_field(src, "rate_cps", "source"), "source.rate_cps", minimum=0.0),
            duration_ps=_int(
                _field(src, "duration_ps", "source"), "source.duration_ps", minimum=1
            ),
            bin_width_ps=bin_width,
            span_ps=span,
            analyze=_bool(ins.get("analyze", True), "instrument.analyze"),
            spectroscopy=_bool(ins.get("spectroscopy", True), "instrument.spectroscopy"),
            tau_trap_guess_ps=_num(
                ins.get("tau_trap_guess_ps", 32000.0),
                "instrument.tau_trap_guess_ps",
                minimum=1.0,
            ),
            outputs=_parse_outputs(doc, ("histogram_csv", "summary_json")),
        )
        return norm

    if kind in ("jitter-scan", "twilight", "pair-scan"):
        _known(doc, top_allowed | {"detector", "source", "instrument"}, "config")
        src = _mapping(_field(doc, "source", "config"), "source")
        norm.update(_parse_pair_scan_source(src))
        ins = _mapping(doc.get("instrument", {}), "instrument")
        if kind == "jitter-scan":
            _known(ins, ("min_pairs",), "instrument")
            norm["min_pairs"] = _int(ins.get("min_pairs", 1000), "instrument.min_pairs", minimum=1)
        else:
            _known(ins, (), "instrument")
        out_keys = (
            ("curve_csv", "points_csv", "summary_json")
            if kind == "pair-scan"
            else ("curve_csv", "summary_json")
        )
        norm["detector"] = _parse_detector(doc, "detector")
        norm["outputs"] = _parse_outputs(doc, out_keys)
        return norm

    if kind == "autocorr":
        _known(doc, top_allowed | {"detector", "source", "instrument"}, "config")
        src = _mapping(_field(doc, "source", "config"), "source")
        _known(
            src, ("period_ps", "mean_photons_per_pulse", "duration_ps", "pulse_fwhm_ps"), "source"
        )
        ins = _mapping(_field(doc, "instrument", "config"), "instrument")
        _known(ins, ("max_lag_ps", "bin_width_ps"), "instrument")
        bin_width = _int(
            _field(ins, "bin_width_ps", "instrument"), "instrument.bin_width_ps", minimum=1
        )
        norm.update(
            detector=_parse_detector(doc, "detector"),
            period_ps=_int(_field(src, "period_ps", "source"), "source.period_ps", minimum=1),
            mean_photons_per_pulse=_num(
                _field(src, "mean_photons_per_pulse", "source"),
                "source.mean_photons_per_pulse",
                minimum=0.0,
            ),
            duration_ps=_int(
                _field(src, "duration_ps", "source"), "source.duration_ps", minimum=1
            ),
            pulse_fwhm_ps=_int(src.get("pulse_fwhm_ps", 0), "source.pulse_fwhm_ps", minimum=0),
            max_lag_ps=_int(
                _field(ins, "max_lag_ps", "instrument"),
                "instrument.max_lag_ps",
                minimum=bin_width,
            ),
            bin_width_ps=bin_width,
            outputs=_parse_outputs(doc, ("histogram_csv", "summary_json")),
        )
        return norm

    if kind == "qkd":
        _known(
            doc, top_allowed | {"detector_a", "detector_b", "source", "frame", "instrument"},
            "config",
        )
        src = _mapping(_field(doc, "source", "config"), "source")
        _known(
            src,
            (
                "rep_rate_hz",
                "mean_pairs_per_pulse",
                "duration_ps",
                "eta_alice",
                "eta_bob",
                "emission_fwhm_ps",
            ),
            "source",
        )
        fr = _mapping(_field(doc, "frame", "config"), "frame")
        _known(fr, ("bin_width_ps", "bins_per_frame"), "frame")
        frame = FrameConfig(
            bin_width_ps=_int(
                _field(fr, "bin_width_ps", "frame"), "frame.bin_width_ps", minimum=1
            ),
            bins_per_frame=_int(fr.get("bins_per_frame", 1024), "frame.bins_per_frame"),
        )
        try:
            frame.validate()
        except ValueError as exc:
            _err("frame", str(exc))
        rep = _num(_field(src, "rep_rate_hz", "source"), "source.rep_rate_hz", minimum=1.0)
        implied = 1.0e12 / frame.bin_width_ps
        if abs(rep - implied) > 0.02 * implied:
            _err(
                "source.rep_rate_hz",
                f"{rep:.6g} Hz does not match frame.bin_width_ps "
                f"{frame.bin_width_ps} ps (implies {implied:.6g} Hz)",
            )
        ins = _mapping(doc.get("instrument", {}), "instrument")
        _known(
            ins, ("ac_bin_width_ps", "ac_span_ps", "cc_bin_width_ps", "cc_span_ps"), "instrument"
        )
        inst = {
            k: _int(ins[k], f"instrument.{k}", minimum=1)
            for k in ("ac_bin_width_ps", "ac_span_ps", "cc_bin_width_ps", "cc_span_ps")
            if k in ins
        }
        norm.update(
            detector_a=_parse_detector(doc, "detector_a"),
            detector_b=_parse_detector(doc, "detector_b"),
            rep_rate_hz=rep,
            mean_pairs_per_pulse=_num(
                _field(src, "mean_pairs_per_pulse", "source"),
                "source.mean_pairs_per_pulse",
                minimum=0.0,
            ),
            duration_ps=_int(
                _field(src, "duration_ps", "source"), "source.duration_ps", minimum=1
            ),
            eta_alice=_num(src.get("eta_alice", 1.0), "source.eta_alice", minimum=0.0, maximum=1.0),
            eta_bob=_num(src.get("eta_bob", 1.0), "source.eta_bob", minimum=0.0, maximum=1.0),
            emission_fwhm_ps=_int(
                src.get("emission_fwhm_ps", 0), "source.emission_fwhm_ps", minimum=0
            ),
            frame=frame,
            instrument=inst,
            outputs=_parse_outputs(doc, ("report_json", "crosscorr_csv")),
        )
        return norm

    # keyrate
    _known(doc, top_allowed | {"inputs"}, "config")
    inp = _mapping(_field(doc, "inputs", "config"), "inputs")
    _known(inp, ("m_channels", "eta", "n_mean", "xi", "bin_width_ps"), "inputs")
    norm.update(
        m_channels=_int(_field(inp, "m_channels", "inputs"), "inputs.m_channels", minimum=0),
        eta=_num(_field(inp, "eta", "inputs"), "inputs.eta", minimum=0.0, maximum=1.0),
        n_mean=_num(_field(inp, "n_mean", "inputs"), "inputs.n_mean", minimum=0.0),
        xi=_num(_field(inp, "xi", "inputs"), "inputs.xi", minimum=0.0),
        bin_width_ps=_num(
            _field(inp, "bin_width_ps", "inputs"), "inputs.bin_width_ps", minimum=1e-12
        ),
        outputs=_parse_outputs(doc, ("summary_json",)),
    )
    return norm


def load_config(path: str) -> dict:
    """Read and validate a JSON scenario config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(doc)
