"""Fixed-pattern and temporal noise model of the analog substrate.

A *virtual chip* is one draw of static per-neuron and per-synapse
parameter deviations (fixed-pattern noise), keyed by an integer seed.
The same seed always reproduces the same chip, and the underlying unit
normals are profile-independent: sampling the same seed under the
``calibrated`` and ``uncalibrated`` profiles yields the same chip with
narrower or wider spreads, which keeps paired comparisons meaningful.

Temporal variability is modeled downstream as additive Gaussian membrane
current noise; this module only carries its amplitude ``sigma_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from neuroloop.rng import keyed_stream

N_NEURONS = 32

PROFILE_NAMES = ("ideal", "calibrated", "uncalibrated")

# Stream ids for the per-quantity keyed draws.
_S_TAU_MEM = 0
_S_TAU_SYN = 1
_S_TAU_REF = 2
_S_V_LEAK = 3
_S_V_THRESH = 4
_S_V_RESET = 5
_S_ETA_PLUS = 6
_S_TAU_PLUS = 7
_S_ADC = 8


@dataclass(frozen=True)
class NoiseProfile:
    """Spread magnitudes of the fixed-pattern noise for one substrate state.

    ``cv_time_constants`` is the coefficient of variation of the
    multiplicative per-neuron factors on tau_mem/tau_syn/tau_ref,
    ``cv_sensor`` the CV of the per-synapse factors on the correlation
    sensor amplitude and time constant. Voltage offsets are additive (V),
    ADC offsets additive in digital units.
    """

    name: str
    cv_time_constants: float
    cv_sensor: float
    sigma_voltage_offsets: float
    sigma_adc_offset: float

    def __post_init__(self):
        if self.name not in PROFILE_NAMES:
            raise ValueError(f"unknown noise profile {self.name!r}, expected one of {PROFILE_NAMES}")
        for f in ("cv_time_constants", "cv_sensor", "sigma_voltage_offsets", "sigma_adc_offset"):
            if getattr(self, f) < 0:
                raise ValueError(f"{f} must be >= 0")
        if self.name == "ideal" and any(
            getattr(self, f) != 0.0
            for f in ("cv_time_constants", "cv_sensor", "sigma_voltage_offsets", "sigma_adc_offset")
        ):
            raise ValueError("ideal profile must have all spreads equal to zero")
        if self.name == "calibrated" and self.cv_time_constants > 0.05:
            raise ValueError("calibrated profile requires cv_time_constants <= 0.05")


_PROFILE_DEFAULTS = {
    "ideal": dict(cv_time_constants=0.0, cv_sensor=0.0, sigma_voltage_offsets=0.0, sigma_adc_offset=0.0),
    "calibrated": dict(cv_time_constants=0.05, cv_sensor=0.15, sigma_voltage_offsets=0.02, sigma_adc_offset=2.0),
    "uncalibrated": dict(cv_time_constants=0.20, cv_sensor=0.15, sigma_voltage_offsets=0.02, sigma_adc_offset=2.0),
}


def make_profile(name: str, **overrides: float) -> NoiseProfile:
    """Build a named profile with optional overrides of its spread values."""
    if name not in _PROFILE_DEFAULTS:
        raise ValueError(f"unknown noise profile {name!r}, expected one of {PROFILE_NAMES}")
    values = dict(_PROFILE_DEFAULTS[name])
    for key, val in overrides.items():
        if key not in values:
            raise ValueError(f"unknown noise profile field {key!r}")
        values[key] = float(val)
    return NoiseProfile(name=name, **values)


def _locked(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SubstrateNoise:
    """One sampled virtual chip: static parameter deviations plus sigma_i.

    Arrays are read-only; a SubstrateNoise is immutable after sampling and
    safe to share across parallel trials.
    """

    tau_mem_factor: np.ndarray  # (32,) multiplicative
    tau_syn_factor: np.ndarray  # (32,)
    tau_ref_factor: np.ndarray  # (32,)
    v_leak_offset: np.ndarray  # (32,) additive, V
    v_thresh_offset: np.ndarray  # (32,)
    v_reset_offset: np.ndarray  # (32,)
    eta_plus_factor: np.ndarray  # (32, 32) multiplicative, per synapse
    tau_plus_factor: np.ndarray  # (32, 32)
    adc_offset: np.ndarray  # (32, 32) additive, digital units
    sigma_i: float = 0.0
    seed_fp: int = 0
    profile_name: str = "ideal"

    def __post_init__(self):
        for name in ("tau_mem_factor", "tau_syn_factor", "tau_ref_factor",
                     "v_leak_offset", "v_thresh_offset", "v_reset_offset"):
            object.__setattr__(self, name, _locked(np.asarray(getattr(self, name)).reshape(N_NEURONS)))
        for name in ("eta_plus_factor", "tau_plus_factor", "adc_offset"):
            object.__setattr__(self, name, _locked(np.asarray(getattr(self, name)).reshape(N_NEURONS, N_NEURONS)))
        for name in ("tau_mem_factor", "tau_syn_factor", "tau_ref_factor",
                     "eta_plus_factor", "tau_plus_factor"):
            if not np.all(getattr(self, name) > 0):
                raise ValueError(f"{name} must be strictly positive")

    def with_sigma(self, sigma_i: float) -> "SubstrateNoise":
        return replace(self, sigma_i=float(sigma_i))

    def to_dict(self) -> dict:
        return {
            "seed_fp": self.seed_fp,
            "profile_name": self.profile_name,
            "sigma_i": self.sigma_i,
            "tau_mem_factor": self.tau_mem_factor.tolist(),
            "tau_syn_factor": self.tau_syn_factor.tolist(),
            "tau_ref_factor": self.tau_ref_factor.tolist(),
            "v_leak_offset": self.v_leak_offset.tolist(),
            "v_thresh_offset": self.v_thresh_offset.tolist(),
            "v_reset_offset": self.v_reset_offset.tolist(),
            "eta_plus_factor": self.eta_plus_factor.tolist(),
            "tau_plus_factor": self.tau_plus_factor.tolist(),
            "adc_offset": self.adc_offset.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SubstrateNoise":
        return cls(**{k: (np.array(v) if isinstance(v, list) else v) for k, v in d.items()})


def ideal_substrate(sigma_i: float = 0.0) -> SubstrateNoise:
    """All factors exactly one, all offsets exactly zero."""
    ones = np.ones(N_NEURONS)
    zeros = np.zeros(N_NEURONS)
    ones2 = np.ones((N_NEURONS, N_NEURONS))
    zeros2 = np.zeros((N_NEURONS, N_NEURONS))
    return SubstrateNoise(
        tau_mem_factor=ones, tau_syn_factor=ones, tau_ref_factor=ones,
        v_leak_offset=zeros, v_thresh_offset=zeros, v_reset_offset=zeros,
        eta_plus_factor=ones2, tau_plus_factor=ones2, adc_offset=zeros2,
        sigma_i=sigma_i, seed_fp=0, profile_name="ideal",
    )


def _lognormal_factors(z: np.ndarray, cv: float) -> np.ndarray:
    """Mean-1 lognormal factors from unit normals; cv=0 gives exactly 1."""
    if cv == 0.0:
        return np.ones_like(z)
    s = math.sqrt(math.log1p(cv * cv))
    return np.exp(s * z - 0.5 * s * s)


def sample_substrate(seed_fp: int, profile: NoiseProfile, sigma_i: float = 0.0) -> SubstrateNoise:
    """Sample one virtual chip as a deterministic function of (seed_fp, profile).

    The unit normals behind every quantity depend only on seed_fp, not on
    the profile; the profile merely scales the spreads. Per-quantity draws
    come from independent counter-based streams keyed by (seed_fp, stream).
    """

    def normals(stream: int, shape) -> np.ndarray:
        return keyed_stream(seed_fp, stream).standard_normal(shape)

    cv_tc = profile.cv_time_constants
    cv_sn = profile.cv_sensor
    sv = profile.sigma_voltage_offsets
    sa = profile.sigma_adc_offset
    return SubstrateNoise(
        tau_mem_factor=_lognormal_factors(normals(_S_TAU_MEM, N_NEURONS), cv_tc),
        tau_syn_factor=_lognormal_factors(normals(_S_TAU_SYN, N_NEURONS), cv_tc),
        tau_ref_factor=_lognormal_factors(normals(_S_TAU_REF, N_NEURONS), cv_tc),
        v_leak_offset=sv * normals(_S_V_LEAK, N_NEURONS),
        v_thresh_offset=sv * normals(_S_V_THRESH, N_NEURONS),
        v_reset_offset=sv * normals(_S_V_RESET, N_NEURONS),
        eta_plus_factor=_lognormal_factors(normals(_S_ETA_PLUS, (N_NEURONS, N_NEURONS)), cv_sn),
        tau_plus_factor=_lognormal_factors(normals(_S_TAU_PLUS, (N_NEURONS, N_NEURONS)), cv_sn),
        adc_offset=sa * normals(_S_ADC, (N_NEURONS, N_NEURONS)),
        sigma_i=float(sigma_i),
        seed_fp=int(seed_fp),
        profile_name=profile.name,
    )


def empirical_cv(x: np.ndarray) -> float:
    """Sample coefficient of variation (ddof=1), the estimator used throughout."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.std(x, ddof=1) / np.mean(x))


def _shrink_to_cv(factors: np.ndarray, residual_cv: float) -> np.ndarray:
    """Affine shrink toward 1 so the empirical CV becomes residual_cv.

    Rank order is preserved (the map is affine with positive slope);
    residual_cv = 0 maps every factor to exactly 1, residual_cv equal to
    the input CV is the identity.
    """
    cv_in = empirical_cv(factors)
    if cv_in == 0.0:
        if residual_cv > 0.0:
            raise ValueError("cannot raise CV above the input CV")
        return np.ones_like(factors)
    if not 0.0 <= residual_cv <= cv_in:
        raise ValueError(f"residual_cv must lie in [0, {cv_in:.6g}], got {residual_cv}")
    c = residual_cv / cv_in
    if c == 0.0:
        return np.ones_like(factors)
    m = float(np.mean(factors))
    center = 1.0 + c * (m - 1.0)
    return center * (1.0 + c * (factors / m - 1.0))


def apply_calibration(substrate: SubstrateNoise, residual_cv: float) -> SubstrateNoise:
    """Shrink the time-constant spreads to residual_cv; voltages stay uncalibrated.

    Models per-neuron calibration of tau_mem/tau_syn/tau_ref; voltage and
    sensor deviations are untouched.
    """
    return replace(
        substrate,
        tau_mem_factor=_shrink_to_cv(substrate.tau_mem_factor, residual_cv),
        tau_syn_factor=_shrink_to_cv(substrate.tau_syn_factor, residual_cv),
        tau_ref_factor=_shrink_to_cv(substrate.tau_ref_factor, residual_cv),
    )


def permute_neurons(substrate: SubstrateNoise, perm: np.ndarray) -> SubstrateNoise:
    """Reassign logical action units to physical neurons.

    Logical neuron n takes over the physical circuit perm[n]: per-neuron
    vectors and per-synapse columns are permuted, weights and everything
    held in logical coordinates stay put.
    """
    perm = np.asarray(perm, dtype=np.intp)
    if perm.shape != (N_NEURONS,) or not np.array_equal(np.sort(perm), np.arange(N_NEURONS)):
        raise ValueError("perm must be a permutation of 0..31")
    return replace(
        substrate,
        tau_mem_factor=substrate.tau_mem_factor[perm],
        tau_syn_factor=substrate.tau_syn_factor[perm],
        tau_ref_factor=substrate.tau_ref_factor[perm],
        v_leak_offset=substrate.v_leak_offset[perm],
        v_thresh_offset=substrate.v_thresh_offset[perm],
        v_reset_offset=substrate.v_reset_offset[perm],
        eta_plus_factor=substrate.eta_plus_factor[:, perm],
        tau_plus_factor=substrate.tau_plus_factor[:, perm],
        adc_offset=substrate.adc_offset[:, perm],
    )
