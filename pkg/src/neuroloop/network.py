"""LIF network core: 32 neurons, 32x32 synapse array, correlation sensors.

Membrane and synaptic-current dynamics follow the current-based LIF model
with exponential PSC kernels, integrated with exact exponential
propagators on a fixed step, so subthreshold trajectories are exact up to
floating-point rounding at every step boundary. Each synapse carries a
6-bit weight and an analog correlation sensor that accumulates
nearest-neighbor pre/post coincidences into non-decaying eligibility
traces (causal and anti-causal), read out and reset once per loop
iteration through an 8-bit ADC model.

Temporal variability enters as additive Gaussian membrane noise with a
per-step standard deviation of ``sigma_i * sqrt(dt_ref * dt) / c_mem``
(``dt_ref`` = 0.1 us), which makes the injected noise power independent
of the integration step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from neuroloop._kernel import emulate_window_kernel
from neuroloop.noise import N_NEURONS, SubstrateNoise, ideal_substrate

NOISE_DT_REF = 0.1  # us; reference step of the noise amplitude definition
COUNTER_MAX = 255  # 8-bit spike counter saturation
ADC_MAX = 255  # 8-bit trace digitization ceiling
WEIGHT_MAX = 63  # 6-bit synaptic weight ceiling


@dataclass(frozen=True)
class LifParams:
    """The six LIF constants (hardware time, us / V) plus the membrane capacitance.

    ``c_mem`` is a normalization constant of the simulator, not a measured
    hardware value; currents are expressed in units where c_mem = 1.
    """

    tau_mem: float = 28.5
    tau_syn: float = 1.8
    tau_ref: float = 4.0
    v_leak: float = 0.62
    v_thresh: float = 1.28
    v_reset: float = 0.36
    c_mem: float = 1.0

    def __post_init__(self):
        for name in ("tau_mem", "tau_syn", "tau_ref"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.c_mem <= 0:
            raise ValueError("c_mem must be > 0")
        if not self.v_reset <= self.v_leak < self.v_thresh:
            raise ValueError("LIF potentials must satisfy v_reset <= v_leak < v_thresh")
        if abs(self.tau_syn - self.tau_mem) < 1e-9 * self.tau_mem:
            raise ValueError("tau_syn == tau_mem is rejected (degenerate propagator)")


@dataclass(frozen=True)
class SensorParams:
    """Correlation sensor constants; the anti-causal pair defaults to the causal one."""

    eta_plus: float = 72.0
    tau_plus: float = 64.0
    eta_minus: float | None = None
    tau_minus: float | None = None

    def __post_init__(self):
        if self.eta_plus < 0 or self.tau_plus <= 0:
            raise ValueError("eta_plus must be >= 0 and tau_plus > 0")

    @property
    def eta_minus_value(self) -> float:
        return self.eta_plus if self.eta_minus is None else self.eta_minus

    @property
    def tau_minus_value(self) -> float:
        return self.tau_plus if self.tau_minus is None else self.tau_minus


@dataclass(frozen=True)
class SpikeTrain:
    """Strictly increasing spike times (us), relative to the window start."""

    times: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=np.float64)
        if t.ndim != 1:
            raise ValueError("spike train times must be one-dimensional")
        if t.size and (np.any(t < 0) or np.any(np.diff(t) <= 0)):
            raise ValueError("spike train times must be non-negative and strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "times", t)


def regular_train(n_spikes: int = 20, isi: float = 10.0) -> SpikeTrain:
    """The standard input stimulus: n_spikes spikes spaced isi apart, starting at 0."""
    return SpikeTrain(np.arange(n_spikes, dtype=np.float64) * isi)


class Network:
    """Single-owner sequential state machine for the emulated network.

    Row r of the synapse array fans one labeled input out to all 32
    neurons; column c feeds exactly neuron c. State arrays are exposed
    directly (``v``, ``i_syn``, ``spike_count``, ``weights``, ...);
    construction goes through :func:`build_network`.
    """

    def __init__(self, params: LifParams, weights: np.ndarray, substrate: SubstrateNoise,
                 dt: float, weight_scale: float, sensor: SensorParams):
        n = N_NEURONS
        self.n = n
        self.lif = params
        self.sensor = sensor
        self.substrate = substrate
        self.dt = float(dt)
        self.weight_scale = float(weight_scale)
        self.sigma_i = float(substrate.sigma_i)

        w = np.asarray(weights)
        if w.shape != (n, n):
            raise ValueError(f"weights must be {n}x{n}")
        if not np.issubdtype(w.dtype, np.integer) and not np.all(w == np.rint(w)):
            raise ValueError("weights must be integers")
        w = w.astype(np.int64)
        if w.min() < 0 or w.max() > WEIGHT_MAX:
            raise ValueError(f"weights must lie in [0, {WEIGHT_MAX}]")
        self.weights = w

        # Effective per-neuron parameters: nominal times substrate factors,
        # voltages plus substrate offsets. Fixed for the network's lifetime.
        self.tau_mem_eff = params.tau_mem * substrate.tau_mem_factor
        self.tau_syn_eff = params.tau_syn * substrate.tau_syn_factor
        self.tau_ref_eff = params.tau_ref * substrate.tau_ref_factor
        self.v_leak_eff = params.v_leak + substrate.v_leak_offset
        self.v_thresh_eff = params.v_thresh + substrate.v_thresh_offset
        self.v_reset_eff = params.v_reset + substrate.v_reset_offset

        if np.any(np.abs(self.tau_syn_eff - self.tau_mem_eff) < 1e-9 * self.tau_mem_eff):
            raise ValueError("effective tau_syn == tau_mem on some neuron (degenerate propagator)")
        if not np.all(self.v_reset_eff <= self.v_leak_eff):
            raise ValueError("effective v_reset > v_leak on some neuron")
        if not np.all(self.v_leak_eff < self.v_thresh_eff):
            raise ValueError("effective v_leak >= v_thresh on some neuron")
        if dt <= 0:
            raise ValueError("dt must be > 0")
        if dt > float(np.min(self.tau_syn_eff)) / 4.0:
            raise ValueError(
                f"dt={dt} too coarse: must be <= min effective tau_syn / 4 "
                f"= {float(np.min(self.tau_syn_eff)) / 4.0:.4g}"
            )

        self.ref_steps = np.rint(self.tau_ref_eff / dt).astype(np.int64)
        self.p_i, self.p_v, self.p_vi = self._propagators(dt)

        # Effective sensor constants per synapse.
        self.eta_p_eff = sensor.eta_plus * substrate.eta_plus_factor
        self.tau_p_eff = sensor.tau_plus * substrate.tau_plus_factor
        self.eta_m_eff = sensor.eta_minus_value * substrate.eta_plus_factor
        self.tau_m_eff = sensor.tau_minus_value * substrate.tau_plus_factor
        self.adc_offset_true = substrate.adc_offset.copy()
        self.adc_offset_est = np.rint(substrate.adc_offset).astype(np.int64)

        # Dynamic state. Time is tracked as an integer step count so that
        # every event time is the exact product step * dt on both the
        # kernel and the single-step path.
        self.v = self.v_leak_eff.copy()
        self.i_syn = np.zeros(n)
        self.refrac = np.zeros(n, dtype=np.int64)
        self.spike_count = np.zeros(n, dtype=np.int64)
        self._total_steps = 0

        # Sensor state: -1.0 marks "no event yet".
        self.acc_plus = np.zeros((n, n))
        self.acc_minus = np.zeros((n, n))
        self.last_pre = np.full(n, -1.0)
        self.last_post = np.full(n, -1.0)
        self.consumed = np.full((n, n), -1.0)

        self._out_steps = np.zeros(1024, dtype=np.int64)
        self._out_neurons = np.zeros(1024, dtype=np.int64)
        self._empty_noise = np.zeros((0, 0), dtype=np.float32)

    def _propagators(self, dt: float):
        """Exact one-step propagators for the (i_syn, v) linear system."""
        p_i = np.exp(-dt / self.tau_syn_eff)
        p_v = np.exp(-dt / self.tau_mem_eff)
        p_vi = (self.tau_mem_eff * self.tau_syn_eff
                / (self.lif.c_mem * (self.tau_syn_eff - self.tau_mem_eff))) * (p_i - p_v)
        return p_i, p_v, p_vi

    @property
    def noise_scale(self) -> float:
        """Per-step membrane noise std in volts for the build-time dt."""
        return self.sigma_i * math.sqrt(NOISE_DT_REF * self.dt) / self.lif.c_mem

    @property
    def t_now(self) -> float:
        return self._total_steps * self.dt

    @property
    def refrac_remaining(self) -> np.ndarray:
        return self.refrac * self.dt

    def reset_state(self):
        """Return all neurons to rest; sensors and weights are untouched."""
        self.v[:] = self.v_leak_eff
        self.i_syn[:] = 0.0
        self.refrac[:] = 0
        self.spike_count[:] = 0

    def clear_counters(self):
        self.spike_count[:] = 0

    def clear_sensors(self):
        self.acc_plus[:] = 0.0
        self.acc_minus[:] = 0.0
        self.last_pre[:] = -1.0
        self.last_post[:] = -1.0
        self.consumed[:] = -1.0

    def deliver_pre_spike(self, row: int, t: float):
        """Inject one labeled input event on a synapse row at time t.

        Every neuron receives a current step proportional to its column's
        weight; each sensor in the row pairs the event anti-causally with
        its column's most recent post spike.
        """
        if not 0 <= row < self.n:
            raise ValueError(f"row {row} out of range")
        self.i_syn += self.weight_scale * self.weights[row]
        for c in range(self.n):
            lp = self.last_post[c]
            if lp >= 0.0:
                self.acc_minus[row, c] += self.eta_m_eff[row, c] * math.exp(
                    -(t - lp) / self.tau_m_eff[row, c])
        self.last_pre[row] = t

    def record_post_spike(self, col: int, t: float):
        """Back-propagate a post spike of neuron ``col`` to its sensor column.

        Each sensor pairs the spike with its row's most recent pre event,
        unless that pre was already consumed by an earlier post
        (nearest-neighbor pairing with consumed causal partners).
        """
        if not 0 <= col < self.n:
            raise ValueError(f"column {col} out of range")
        for m in range(self.n):
            lpre = self.last_pre[m]
            if lpre >= 0.0 and lpre > self.consumed[m, col]:
                self.acc_plus[m, col] += self.eta_p_eff[m, col] * math.exp(
                    -(t - lpre) / self.tau_p_eff[m, col])
                self.consumed[m, col] = lpre
        self.last_post[col] = t

    def step(self, dt: float | None = None, noise: np.ndarray | None = None,
             rng: np.random.Generator | None = None) -> list[tuple[int, float]]:
        """Advance one step; returns (neuron, spike time) for threshold crossings.

        ``noise`` is a row of unit normals (scaled internally); with
        ``rng`` given instead, the row is drawn from it. This is the
        reference path; the window kernel performs identical arithmetic.
        """
        if dt is not None and dt != self.dt:
            raise ValueError("step dt must equal the build-time dt; rebuild to change it")
        dt = self.dt
        if noise is None and rng is not None and self.sigma_i != 0.0:
            noise = rng.standard_normal(self.n, dtype=np.float32)

        i0 = self.i_syn
        self.i_syn = i0 * self.p_i
        refr = self.refrac > 0
        vv = self.v_leak_eff + (self.v - self.v_leak_eff) * self.p_v + i0 * self.p_vi
        if noise is not None and self.noise_scale != 0.0:
            # float64 promotion first, matching the kernel's scalar arithmetic
            vv = vv + self.noise_scale * np.asarray(noise, dtype=np.float64)
        if not np.all(np.isfinite(vv)):
            raise FloatingPointError("non-finite membrane state (configuration error)")
        self.refrac[refr] -= 1
        self.v[refr] = self.v_reset_eff[refr]
        active = ~refr
        self.v[active] = vv[active]
        t_post = (self._total_steps + 1) * dt
        spikes = []
        for c in np.flatnonzero(active & (vv >= self.v_thresh_eff)):
            self.v[c] = self.v_reset_eff[c]
            self.refrac[c] = self.ref_steps[c]
            if self.spike_count[c] < COUNTER_MAX:
                self.spike_count[c] += 1
            self.record_post_spike(int(c), t_post)
            spikes.append((int(c), t_post))
        self._total_steps += 1
        return spikes

    def _train_steps(self, train: SpikeTrain, n_steps: int) -> np.ndarray:
        steps = np.rint(train.times / self.dt).astype(np.int64)
        if steps.size and (steps[0] < 0 or steps[-1] >= n_steps):
            raise ValueError("train times exceed the emulation window")
        if steps.size > 1 and np.any(np.diff(steps) <= 0):
            raise ValueError("train times must be at least one dt apart")
        return steps

    def emulate_window(self, row: int, train: SpikeTrain, t_emu: float,
                       rng: np.random.Generator | None = None,
                       noise: np.ndarray | None = None,
                       reset_counters: bool = True,
                       return_spikes: bool = False):
        """Deliver a spike train on one row and advance the network by t_emu.

        Spike counters are cleared at the window start (the per-iteration
        read semantics); sensor state is carried until explicitly read and
        reset. Returns the per-neuron spike counts; with
        ``return_spikes=True`` also the (neurons, window-relative times).
        """
        if not 0 <= row < self.n:
            raise ValueError(f"row {row} out of range")
        n_steps = int(round(t_emu / self.dt))
        if n_steps < 1:
            raise ValueError("t_emu must cover at least one step")
        pre_steps = self._train_steps(train, n_steps)
        if reset_counters:
            self.clear_counters()

        if noise is None:
            if rng is not None and self.sigma_i != 0.0:
                noise = rng.standard_normal((n_steps, self.n), dtype=np.float32)
            else:
                noise = self._empty_noise
        else:
            noise = np.asarray(noise, dtype=np.float32)
            if noise.shape != (n_steps, self.n):
                raise ValueError("noise must have shape (n_steps, 32)")

        cap = self.n * (n_steps // (int(self.ref_steps.min()) + 1) + 1)
        if self._out_steps.size < cap:
            self._out_steps = np.zeros(cap, dtype=np.int64)
            self._out_neurons = np.zeros(cap, dtype=np.int64)

        amp = self.weight_scale * self.weights[row].astype(np.float64)
        n_out = emulate_window_kernel(
            n_steps, self.dt, self._total_steps, pre_steps, row, amp,
            self.p_i, self.p_v, self.p_vi,
            self.v_leak_eff, self.v_thresh_eff, self.v_reset_eff, self.ref_steps,
            self.v, self.i_syn, self.refrac, self.spike_count,
            noise, self.noise_scale,
            self.eta_p_eff, self.tau_p_eff, self.eta_m_eff, self.tau_m_eff,
            self.acc_plus, self.acc_minus, self.last_pre, self.last_post, self.consumed,
            self._out_steps, self._out_neurons,
        )
        self._total_steps += n_steps
        if not np.all(np.isfinite(self.v)):
            raise FloatingPointError("non-finite membrane state (configuration error)")
        counts = self.spike_count.copy()
        if return_spikes:
            neurons = self._out_neurons[:n_out].copy()
            times = (self._out_steps[:n_out] + 1) * self.dt
            return counts, (neurons, times)
        return counts

    def read_and_reset_correlations(self) -> np.ndarray:
        """Digitize the causal traces to A+ in [0, 127] and clear all sensors.

        Pipeline per synapse: the analog trace plus the true ADC offset is
        digitized to 8 bit, the stored integer offset estimate subtracted,
        the result clamped and right-shifted by one bit.
        """
        digitized = np.clip(np.rint(self.acc_plus + self.adc_offset_true), 0, ADC_MAX)
        corrected = np.clip(digitized.astype(np.int64) - self.adc_offset_est, 0, ADC_MAX)
        a_plus = corrected >> 1
        self.clear_sensors()
        return a_plus


def build_network(params: LifParams, weights: np.ndarray, noise: SubstrateNoise,
                  dt: float = 0.1, *, weight_scale: float = 1.0,
                  sensor: SensorParams | None = None) -> Network:
    """Assemble a network at rest from nominal parameters and a sampled substrate."""
    return Network(params, weights, noise, dt, weight_scale, sensor or SensorParams())


def measure_spiking_threshold(params: LifParams, substrate: SubstrateNoise,
                              train: SpikeTrain, trials: int, *,
                              t_emu: float = 200.0, dt: float = 0.1,
                              weight_scale: float = 1.0,
                              sensor: SensorParams | None = None,
                              rng: np.random.Generator | None = None) -> np.ndarray:
    """Smallest weight per neuron that elicits >=1 output spike with P > 0.05.

    Each neuron is driven through a single synapse by ``train`` for
    ``trials`` repetitions per candidate weight; 64 marks neurons that
    never reach the criterion. With sigma_i = 0 the trials are identical,
    so a single repetition decides.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    net = build_network(params, np.zeros((N_NEURONS, N_NEURONS), dtype=np.int64),
                        substrate, dt, weight_scale=weight_scale, sensor=sensor)
    deterministic = substrate.sigma_i == 0.0
    if not deterministic and rng is None:
        raise ValueError("rng required when sigma_i > 0")
    thresholds = np.full(N_NEURONS, 64, dtype=np.int64)
    unresolved = np.ones(N_NEURONS, dtype=bool)
    for w in range(WEIGHT_MAX + 1):
        net.weights[0, :] = w
        reps = 1 if deterministic else trials
        hits = np.zeros(N_NEURONS, dtype=np.int64)
        for _ in range(reps):
            net.reset_state()
            counts = net.emulate_window(0, train, t_emu, rng=None if deterministic else rng)
            hits += counts >= 1
        if deterministic:
            hits *= trials
        found = unresolved & (hits > 0.05 * trials)
        thresholds[found] = w
        unresolved &= ~found
        if not unresolved.any():
            break
    return thresholds
