"""Experiment configuration: parameter sets, flat-key files, resolution.

Configs are exchanged as flat JSON (or ``key=value`` lines) whose keys
mirror the experiment's symbol names (tau_mem, beta, gamma, v_p, ...).
Unknown keys are rejected so hyperparameter typos fail loudly. A resolved
config has every derived constant (weight scale, exploration noise
amplitude, per-set defaults) expanded, which is what run manifests echo
for bit-exact replay.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from neuroloop.network import LifParams, SensorParams
from neuroloop.noise import NoiseProfile, make_profile
from neuroloop.plasticity import LearningParams
from neuroloop.pong import EnvParams


class ConfigError(ValueError):
    """Invalid or unknown configuration input; maps to CLI exit code 1."""


# Hyperparameter sets obtained on three substrate instances.
PARAM_SETS = {
    1: dict(tau_mem=28.5, tau_ref=4.0, tau_syn=1.8, v_leak=0.62, v_reset=0.36,
            v_thresh=1.28, eta_plus=72.0, tau_plus=64.0),
    2: dict(tau_mem=18.4, tau_ref=14.3, tau_syn=2.4, v_leak=0.56, v_reset=0.36,
            v_thresh=1.31, eta_plus=114.0, tau_plus=80.0),
    3: dict(tau_mem=24.8, tau_ref=13.8, tau_syn=1.4, v_leak=0.87, v_reset=0.30,
            v_thresh=1.21, eta_plus=70.0, tau_plus=60.0),
}

# Exploration noise amplitudes calibrated per parameter set (spike-count
# std ~ 1 at the threshold weight; see calibrate.calibrate_sigma_i and
# scripts/calibrate_defaults.py).
SIGMA_I_DEFAULTS = {
    1: 0.2409,
    2: 0.4246,
    3: 0.3644,
}

_LIF_KEYS = ("tau_mem", "tau_ref", "tau_syn", "v_leak", "v_reset", "v_thresh", "c_mem")
_SENSOR_KEYS = ("eta_plus", "tau_plus", "eta_minus", "tau_minus")
_LEARN_KEYS = ("beta", "gamma", "update_mode")
_ENV_KEYS = ("L", "v_l1", "v_p", "r_b", "r_p")
_PROFILE_KEYS = ("cv_time_constants", "cv_sensor", "sigma_voltage_offsets", "sigma_adc_offset")
_SCALAR_KEYS = ("n_spikes", "t_isi", "t_emu", "w_mean", "w_sigma", "dt",
                "sigma_i", "weight_scale", "n_iterations",
                "seed_fp", "seed_temporal", "seed_env")
KNOWN_KEYS = frozenset(("param_set", "profile") + _LIF_KEYS + _SENSOR_KEYS
                       + _LEARN_KEYS + _ENV_KEYS + _PROFILE_KEYS + _SCALAR_KEYS)

_UPDATE_MODE_ALIASES = {"all": "all-synapses", "all-synapses": "all-synapses",
                        "active-row": "active-row"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one closed-loop experiment."""

    lif: LifParams = field(default_factory=LifParams)
    sensor: SensorParams = field(default_factory=SensorParams)
    learning: LearningParams = field(default_factory=LearningParams)
    env: EnvParams = field(default_factory=EnvParams)
    profile: NoiseProfile = field(default_factory=lambda: make_profile("calibrated"))
    seed_fp: int = 1
    seed_temporal: int = 2
    seed_env: int = 3
    n_iterations: int = 100_000
    n_spikes: int = 20
    t_isi: float = 10.0
    t_emu: float = 200.0
    w_mean: float = 14.0
    w_sigma: float = 2.0
    dt: float = 0.1
    sigma_i: float | None = None  # None: per-set default / calibration
    weight_scale: float | None = None  # None: bisection calibration

    def __post_init__(self):
        if self.n_iterations < 0:
            raise ConfigError("n_iterations must be >= 0")
        if self.n_spikes < 1 or self.t_isi <= 0 or self.t_emu <= 0 or self.dt <= 0:
            raise ConfigError("n_spikes, t_isi, t_emu and dt must be positive")
        if self.t_emu < (self.n_spikes - 1) * self.t_isi:
            raise ConfigError("t_emu must cover the full input spike train")
        for s in ("seed_fp", "seed_temporal", "seed_env"):
            if int(getattr(self, s)) < 0:
                raise ConfigError(f"{s} must be a non-negative integer")

    def matching_param_set(self) -> int | None:
        """Return the parameter-set id this config's LIF/sensor values equal, if any."""
        for set_id, vals in PARAM_SETS.items():
            if all(getattr(self.lif, k) == vals[k] for k in
                   ("tau_mem", "tau_ref", "tau_syn", "v_leak", "v_reset", "v_thresh")) \
                    and self.sensor.eta_plus == vals["eta_plus"] \
                    and self.sensor.tau_plus == vals["tau_plus"]:
                return set_id
        return None

    def resolved(self) -> "ExperimentConfig":
        """Expand derived constants (weight_scale, sigma_i) to concrete values."""
        from neuroloop.calibrate import calibrate_sigma_i, calibrate_weight_scale

        ws = self.weight_scale
        if ws is None:
            ws = calibrate_weight_scale(self.lif, self.sensor, dt=self.dt,
                                        n_spikes=self.n_spikes, t_isi=self.t_isi,
                                        t_emu=self.t_emu)
        si = self.sigma_i
        if si is None:
            set_id = self.matching_param_set()
            if set_id is not None and self.dt == 0.1:
                si = SIGMA_I_DEFAULTS[set_id]
            else:
                si = calibrate_sigma_i(self.lif, ws, sensor=self.sensor, dt=self.dt,
                                       n_spikes=self.n_spikes, t_isi=self.t_isi,
                                       t_emu=self.t_emu)
        return replace(self, weight_scale=float(ws), sigma_i=float(si))

    def to_flat(self) -> dict:
        """Flat key/value form (symbol-named keys) for files and manifests."""
        out: dict = {}
        for k in _LIF_KEYS:
            out[k] = getattr(self.lif, k)
        out["eta_plus"] = self.sensor.eta_plus
        out["tau_plus"] = self.sensor.tau_plus
        out["eta_minus"] = self.sensor.eta_minus_value
        out["tau_minus"] = self.sensor.tau_minus_value
        for k in _LEARN_KEYS:
            out[k] = getattr(self.learning, k)
        for k in _ENV_KEYS:
            out[k] = getattr(self.env, k)
        out["profile"] = self.profile.name
        for k in _PROFILE_KEYS:
            out[k] = getattr(self.profile, k)
        for k in _SCALAR_KEYS:
            out[k] = getattr(self, k)
        return out


def default_config(param_set: int = 1, **kwargs) -> ExperimentConfig:
    """The standard configuration (parameter set #1 unless told otherwise)."""
    vals = PARAM_SETS[param_set]
    lif = LifParams(tau_mem=vals["tau_mem"], tau_ref=vals["tau_ref"], tau_syn=vals["tau_syn"],
                    v_leak=vals["v_leak"], v_reset=vals["v_reset"], v_thresh=vals["v_thresh"])
    sensor = SensorParams(eta_plus=vals["eta_plus"], tau_plus=vals["tau_plus"])
    return ExperimentConfig(lif=lif, sensor=sensor, **kwargs)


def config_from_flat(flat: dict) -> ExperimentConfig:
    """Build a config from flat keys; unknown keys raise ConfigError."""
    flat = dict(flat)
    for key in flat:
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")

    base: dict = dict(PARAM_SETS[1])
    if "param_set" in flat:
        set_id = int(flat.pop("param_set"))
        if set_id not in PARAM_SETS:
            raise ConfigError(f"unknown parameter set {set_id}")
        base = dict(PARAM_SETS[set_id])

    def take(key, default):
        return flat.pop(key) if key in flat else default

    try:
        lif = LifParams(
            tau_mem=float(take("tau_mem", base["tau_mem"])),
            tau_ref=float(take("tau_ref", base["tau_ref"])),
            tau_syn=float(take("tau_syn", base["tau_syn"])),
            v_leak=float(take("v_leak", base["v_leak"])),
            v_reset=float(take("v_reset", base["v_reset"])),
            v_thresh=float(take("v_thresh", base["v_thresh"])),
            c_mem=float(take("c_mem", 1.0)),
        )
        eta_minus = take("eta_minus", None)
        tau_minus = take("tau_minus", None)
        sensor = SensorParams(
            eta_plus=float(take("eta_plus", base["eta_plus"])),
            tau_plus=float(take("tau_plus", base["tau_plus"])),
            eta_minus=None if eta_minus is None else float(eta_minus),
            tau_minus=None if tau_minus is None else float(tau_minus),
        )
        mode = str(take("update_mode", "all-synapses"))
        if mode not in _UPDATE_MODE_ALIASES:
            raise ConfigError(f"unknown update_mode {mode!r}")
        learning = LearningParams(beta=float(take("beta", 0.125)),
                                  gamma=float(take("gamma", 0.5)),
                                  update_mode=_UPDATE_MODE_ALIASES[mode])
        env = EnvParams(L=float(take("L", 1.0)), v_l1=float(take("v_l1", 0.025)),
                        v_p=float(take("v_p", 0.05)), r_b=float(take("r_b", 0.02)),
                        r_p=float(take("r_p", 0.20)))
        profile_name = str(take("profile", "calibrated"))
        overrides = {k: float(flat.pop(k)) for k in list(_PROFILE_KEYS) if k in flat}
        profile = make_profile(profile_name, **overrides)

        sigma_i = take("sigma_i", None)
        weight_scale = take("weight_scale", None)
        return ExperimentConfig(
            lif=lif, sensor=sensor, learning=learning, env=env, profile=profile,
            seed_fp=int(take("seed_fp", 1)),
            seed_temporal=int(take("seed_temporal", 2)),
            seed_env=int(take("seed_env", 3)),
            n_iterations=int(take("n_iterations", 100_000)),
            n_spikes=int(take("n_spikes", 20)),
            t_isi=float(take("t_isi", 10.0)),
            t_emu=float(take("t_emu", 200.0)),
            w_mean=float(take("w_mean", 14.0)),
            w_sigma=float(take("w_sigma", 2.0)),
            dt=float(take("dt", 0.1)),
            sigma_i=None if sigma_i is None else float(sigma_i),
            weight_scale=None if weight_scale is None else float(weight_scale),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config_file(path: str | Path) -> dict:
    """Read a flat config from JSON or ``key=value`` lines.

    A run manifest (with its resolved config under ``"config"``) is
    accepted in place of a plain config, enabling exact replay.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        if "config" in data and isinstance(data["config"], dict) and "tool" in data:
            data = data["config"]  # run manifest
        return data
    flat: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        flat[key.strip()] = _parse_scalar(value.strip())
    return flat
