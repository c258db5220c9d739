"""YAML experiment configs: schema validation, dotted overrides, canonical form.

A config is a nested mapping; every key is checked against the schema below
and unknown keys are rejected by name.  ``sensors``, ``channel`` and
``signaling`` are either one mapping applied to every sensor or a list with
one mapping per sensor.
"""

from __future__ import annotations

import copy
import math
from typing import Any

import yaml

from .channels import AWGN, BEC, BSC, ChannelModel, Ideal, Rayleigh, Rician, Signaling, for_snr
from .detection import Hypothesis, ObservationModel, SensorConfig, calibrate_delta
from .sim import FUSION_MODES, ConfigError, ExperimentConfig

TOP_KEYS = {"seed", "trials", "max_time", "hypothesis", "prep_trials", "sensors", "channel", "signaling", "fusion"}
SENSOR_KEYS = {"count", "target_interval", "threshold_up", "threshold_down", "alpha_local", "beta_local", "model"}
MODEL_KEYS = {"signal_mean_h1", "signal_mean_h0", "noise_variance"}
CHANNEL_KEYS = {"kind", "snr_db", "epsilon", "gain_h", "gain_var", "gain_mean", "noise_var"}
SIGNALING_KEYS = {"kind", "P", "Q", "level_a", "level_b", "swap"}
FUSION_KEYS = {"mode", "target_alpha", "target_beta", "threshold_up", "threshold_down", "detection_threshold"}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "trials": 1000,
    "max_time": 10 ** 6,
    "hypothesis": "both",
    "prep_trials": 50_000,
    "sensors": {"count": 2, "target_interval": 4.0},
    "channel": {"kind": "ideal"},
    "signaling": {"kind": "antipodal", "P": 1.0},
    "fusion": {"mode": "channel-aware", "target_alpha": 0.01, "target_beta": 0.01},
}


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown config key {where + '.' if where else ''}{key}")


def _complex(v, where) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(float(v), 0.0)
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError:
            pass
    raise ConfigError(f"{where}: expected a complex number as [re, im]")


def _number(v, where, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number")
    if integer:
        if int(v) != v:
            raise ConfigError(f"{where}: expected an integer")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    return float(v)


def _opt(d, key, where, integer=False):
    v = d.get(key)
    return None if v is None else _number(v, f"{where}.{key}", integer)


def parse_override(text: str) -> tuple[list[str], Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, value = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        parsed = yaml.safe_load(value) if value.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: {exc}") from None
    return path, parsed


def apply_overrides(raw: dict, overrides) -> dict:
    out = copy.deepcopy(raw)
    for text in overrides or ():
        path, value = parse_override(text)
        node = out
        for p in path[:-1]:
            nxt = node.get(p)
            if nxt is None:
                nxt = node[p] = {}
            if isinstance(nxt, list):
                raise ConfigError(f"override {text!r}: cannot address into a per-sensor list")
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {text!r}: {p} is not a mapping")
            node = nxt
        node[path[-1]] = value
    return out


def _merged(raw: dict) -> dict:
    _check_keys(raw, TOP_KEYS, "")
    out = copy.deepcopy(DEFAULTS)
    for k, v in raw.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "channel" and k != "signaling":
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def _per_sensor(value, count, where):
    if isinstance(value, list):
        if len(value) != count:
            raise ConfigError(f"{where}: list length {len(value)} does not match {count} sensors")
        return value
    return [value] * count


def _build_model(d, where) -> ObservationModel:
    if d is None:
        return ObservationModel()
    _check_keys(d, MODEL_KEYS, where)
    kw = {}
    for key in ("signal_mean_h1", "signal_mean_h0"):
        if key in d:
            kw[key] = _complex(d[key], f"{where}.{key}")
    if "noise_variance" in d:
        kw["noise_variance"] = _number(d["noise_variance"], f"{where}.noise_variance")
    try:
        return ObservationModel(**kw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _build_sensors(spec) -> list[SensorConfig]:
    if isinstance(spec, dict):
        _check_keys(spec, SENSOR_KEYS, "sensors")
        count = _number(spec.get("count", 1), "sensors.count", integer=True)
        if count < 1:
            raise ConfigError("sensors.count must be >= 1")
        items = [spec] * count
    elif isinstance(spec, list) and spec:
        items = spec
        count = len(items)
    else:
        raise ConfigError("sensors: expected a mapping or a non-empty list")
    out = []
    for k, d in enumerate(items):
        where = f"sensors[{k}]" if isinstance(spec, list) else "sensors"
        _check_keys(d, SENSOR_KEYS - ({"count"} if isinstance(spec, list) else set()), where)
        model = _build_model(d.get("model"), f"{where}.model")
        up, down = _opt(d, "threshold_up", where), _opt(d, "threshold_down", where)
        if up is None or down is None:
            T = _number(d.get("target_interval", 4.0), f"{where}.target_interval")
            delta = calibrate_delta(T, count * model.kl_per_observation[1], count)
            up = delta if up is None else up
            down = delta if down is None else down
        try:
            out.append(SensorConfig(k, model, up, down, _opt(d, "alpha_local", where), _opt(d, "beta_local", where)))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return out


def _build_channel(d, where) -> ChannelModel:
    _check_keys(d, CHANNEL_KEYS, where)
    kind = str(d.get("kind", "ideal")).lower()
    allowed = {"ideal": {"kind"}, "bec": {"kind", "epsilon"}, "bsc": {"kind", "epsilon"},
               "awgn": {"kind", "snr_db", "gain_h", "noise_var"},
               "rayleigh": {"kind", "snr_db", "gain_var", "noise_var"},
               "rician": {"kind", "snr_db", "gain_mean", "gain_var", "noise_var"}}
    if kind not in allowed:
        raise ConfigError(f"{where}.kind: unknown channel {kind!r}")
    _check_keys(d, allowed[kind], where)
    try:
        if kind == "ideal":
            return Ideal()
        if kind in ("bec", "bsc"):
            eps = _number(d.get("epsilon", 0.0), f"{where}.epsilon")
            return BEC(eps) if kind == "bec" else BSC(eps)
        if "snr_db" in d and "noise_var" in d:
            raise ConfigError(f"{where}: give snr_db or noise_var, not both")
        kw = {}
        if "gain_h" in d:
            kw["gain_h"] = _complex(d["gain_h"], f"{where}.gain_h")
        if "gain_mean" in d:
            kw["gain_mean"] = _complex(d["gain_mean"], f"{where}.gain_mean")
        if "gain_var" in d:
            kw["gain_var"] = _number(d["gain_var"], f"{where}.gain_var")
        if "snr_db" in d:
            return for_snr(kind, _number(d["snr_db"], f"{where}.snr_db"), **kw)
        nv = _number(d.get("noise_var", 1.0), f"{where}.noise_var")
        if kind == "awgn":
            return AWGN(kw.get("gain_h", 1 + 0j), nv)
        if kind == "rayleigh":
            return Rayleigh(kw.get("gain_var", 1.0), nv)
        return Rician(kw.get("gain_mean", complex(0.5, 0.5)), kw.get("gain_var", 0.5), nv)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _build_signaling(d, where) -> Signaling:
    _check_keys(d, SIGNALING_KEYS, where)
    kind = str(d.get("kind", "antipodal")).lower()
    try:
        if kind == "antipodal":
            _check_keys(d, {"kind", "P"}, where)
            return Signaling.antipodal(_number(d.get("P", 1.0), f"{where}.P"))
        if kind == "ook":
            _check_keys(d, {"kind", "P", "Q", "swap"}, where)
            return Signaling.ook_like(_number(d.get("P", 1.0), f"{where}.P"), _number(d.get("Q", 0.0), f"{where}.Q"),
                                      bool(d.get("swap", False)))
        if kind == "custom":
            a = _complex(d.get("level_a", 1.0), f"{where}.level_a")
            b = _complex(d.get("level_b", -1.0), f"{where}.level_b")
            P = _number(d.get("P", max(abs(a), abs(b))), f"{where}.P")
            Q = _number(d.get("Q", 0.0), f"{where}.Q")
            return Signaling(a, b, P, Q)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.kind: unknown signalling {kind!r}")


def parse_hypotheses(value) -> tuple[Hypothesis, ...]:
    if isinstance(value, str) and value.strip().lower() == "both":
        return (Hypothesis.H0, Hypothesis.H1)
    try:
        return (Hypothesis.parse(value),)
    except ValueError:
        raise ConfigError(f"hypothesis: expected H0, H1 or both, got {value!r}") from None


def build_experiment(raw: dict, seed: int | None = None) -> tuple[ExperimentConfig, tuple[Hypothesis, ...]]:
    """Validate a raw mapping and build the experiment plus the hypotheses to run."""
    if raw is None:
        raw = {}
    m = _merged(raw)
    sensors = _build_sensors(m["sensors"])
    K = len(sensors)
    chans = [_build_channel(d, f"channel[{k}]" if isinstance(m["channel"], list) else "channel")
             for k, d in enumerate(_per_sensor(m["channel"], K, "channel"))]
    sigs = [_build_signaling(d, f"signaling[{k}]" if isinstance(m["signaling"], list) else "signaling")
            for k, d in enumerate(_per_sensor(m["signaling"], K, "signaling"))]
    fz = m["fusion"]
    _check_keys(fz, FUSION_KEYS, "fusion")
    mode = fz.get("mode", "channel-aware")
    if mode not in FUSION_MODES:
        raise ConfigError(f"fusion.mode: unknown mode {mode!r}; expected one of {', '.join(FUSION_MODES)}")
    hyps = parse_hypotheses(m["hypothesis"])
    s = seed if seed is not None else _number(m["seed"], "seed", integer=True)
    exp = ExperimentConfig(
        sensors=tuple(sensors), channels=tuple(chans), signaling=tuple(sigs),
        target_alpha=_number(fz.get("target_alpha", 0.01), "fusion.target_alpha"),
        target_beta=_number(fz.get("target_beta", 0.01), "fusion.target_beta"),
        fusion_up=_opt(fz, "threshold_up", "fusion"), fusion_down=_opt(fz, "threshold_down", "fusion"),
        fusion_mode=mode, hypothesis=hyps[-1],
        trials=_number(m["trials"], "trials", integer=True),
        max_time=_number(m["max_time"], "max_time", integer=True),
        seed=s, prep_trials=_number(m["prep_trials"], "prep_trials", integer=True),
        detection_threshold=_opt(fz, "detection_threshold", "fusion"),
    )
    return exp, hyps


def load_config(path, overrides=(), seed: int | None = None) -> tuple[ExperimentConfig, tuple[Hypothesis, ...]]:
    """Read a YAML file, apply ``key=value`` overrides and validate.

    Raises :class:`ConfigError` for content problems and ``OSError`` when the
    file cannot be read.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return build_experiment(apply_overrides(raw, overrides), seed)


# --- canonical form --------------------------------------------------------


def _c(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _channel_dict(ch) -> dict:
    d: dict[str, Any] = {"kind": ch.name}
    if isinstance(ch, (BEC, BSC)):
        d["epsilon"] = ch.epsilon
    elif isinstance(ch, AWGN):
        d.update(gain_h=_c(ch.gain_h), noise_var=ch.noise_var)
    elif isinstance(ch, Rayleigh):
        d.update(gain_var=ch.gain_var, noise_var=ch.noise_var)
    elif isinstance(ch, Rician):
        d.update(gain_mean=_c(ch.gain_mean), gain_var=ch.gain_var, noise_var=ch.noise_var)
    return d


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    """Fully resolved config as plain data (complex numbers as ``[re, im]``)."""
    return {
        "seed": cfg.seed, "trials": cfg.trials, "max_time": cfg.max_time, "hypothesis": cfg.hypothesis.name,
        "prep_trials": cfg.prep_trials,
        "sensors": [{"threshold_up": s.threshold_up, "threshold_down": s.threshold_down,
                     "alpha_local": s.alpha_local, "beta_local": s.beta_local,
                     "model": {"signal_mean_h1": _c(s.model.signal_mean_h1),
                               "signal_mean_h0": _c(s.model.signal_mean_h0),
                               "noise_variance": s.model.noise_variance}} for s in cfg.sensors],
        "channel": [_channel_dict(c) for c in cfg.channels],
        "signaling": [{"kind": "custom", "level_a": _c(s.level_a), "level_b": _c(s.level_b),
                       "P": s.peak_power_P, "Q": s.floor_power_Q} for s in cfg.signaling],
        "fusion": {"mode": cfg.fusion_mode, "target_alpha": cfg.target_alpha, "target_beta": cfg.target_beta,
                   "threshold_up": cfg.fusion_up, "threshold_down": cfg.fusion_down,
                   "detection_threshold": cfg.detection_threshold},
    }
