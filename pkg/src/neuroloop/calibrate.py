"""Operating-point calibration of the simulator's free constants.

The hardware's synaptic current gain is not a published quantity, so the
weight-to-current scale is fixed per parameter set by requiring that a
noise-free nominal neuron driven by the standard spike train through one
synapse has a spiking-threshold weight of 20 (mid-range of the 6-bit
scale). The exploration noise amplitude sigma_i is chosen so that the
spike-count standard deviation at that threshold weight is about one
spike, matching the visible trial-to-trial spread of the substrate.
"""

from __future__ import annotations

import numpy as np

from neuroloop.network import LifParams, SensorParams, build_network, regular_train
from neuroloop.noise import N_NEURONS, ideal_substrate
from neuroloop.rng import fast_stream

THRESHOLD_TARGET = 20  # calibrated spiking-threshold weight


def _spikes_once(lif: LifParams, sensor: SensorParams | None, dt: float,
                 train, t_emu: float, w: int, scale: float) -> bool:
    weights = np.zeros((N_NEURONS, N_NEURONS), dtype=np.int64)
    weights[0, 0] = w
    net = build_network(lif, weights, ideal_substrate(0.0), dt,
                        weight_scale=scale, sensor=sensor)
    return int(net.emulate_window(0, train, t_emu)[0]) >= 1


def calibrate_weight_scale(lif: LifParams, sensor: SensorParams | None = None,
                           dt: float = 0.1, n_spikes: int = 20, t_isi: float = 10.0,
                           t_emu: float = 200.0,
                           target_weight: int = THRESHOLD_TARGET) -> float:
    """Bisection over the weight-to-current scale.

    Locates the smallest scale at which weight ``target_weight`` elicits a
    spike and the smallest at which ``target_weight - 1`` does, and
    returns their midpoint, centering the deterministic threshold weight
    on the target.
    """
    if not 1 <= target_weight <= 63:
        raise ValueError("target_weight must lie in [1, 63]")
    train = regular_train(n_spikes, t_isi)

    def smallest_spiking_scale(w: int) -> float:
        spikes = lambda s: _spikes_once(lif, sensor, dt, train, t_emu, w, s)
        hi = 1.0
        while not spikes(hi):
            hi *= 2.0
            if hi > 1e12:
                raise RuntimeError("weight-scale bracketing failed (no spiking regime found)")
        lo = hi / 2.0
        while spikes(lo):
            hi = lo
            lo /= 2.0
            if lo < 1e-15:
                raise RuntimeError("weight-scale bracketing failed (always spiking)")
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if spikes(mid):
                hi = mid
            else:
                lo = mid
        return hi

    return 0.5 * (smallest_spiking_scale(target_weight)
                  + smallest_spiking_scale(target_weight - 1))


def spike_count_std(lif: LifParams, sigma_i: float, weight_scale: float,
                    sensor: SensorParams | None = None, dt: float = 0.1,
                    n_spikes: int = 20, t_isi: float = 10.0, t_emu: float = 200.0,
                    weight: int = THRESHOLD_TARGET, trials: int = 100,
                    seed: int = 0x5EED) -> float:
    """Trial-to-trial std of the output spike count at a fixed weight."""
    train = regular_train(n_spikes, t_isi)
    weights = np.zeros((N_NEURONS, N_NEURONS), dtype=np.int64)
    weights[0, 0] = weight
    net = build_network(lif, weights, ideal_substrate(sigma_i), dt,
                        weight_scale=weight_scale, sensor=sensor)
    rng = fast_stream(seed, 0)
    counts = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        net.reset_state()
        counts[t] = net.emulate_window(0, train, t_emu, rng=rng)[0]
    return float(np.std(counts, ddof=1))


def calibrate_sigma_i(lif: LifParams, weight_scale: float,
                      sensor: SensorParams | None = None, dt: float = 0.1,
                      n_spikes: int = 20, t_isi: float = 10.0, t_emu: float = 200.0,
                      target_std: float = 1.0, trials: int = 100,
                      seed: int = 0x5EED) -> float:
    """Exploration noise amplitude giving ~target_std spike-count spread.

    Uses common random numbers per candidate amplitude, a geometric scan
    for the crossing and a short log-space bisection to refine it.
    """
    std_at = lambda s: spike_count_std(lif, s, weight_scale, sensor=sensor, dt=dt,
                                       n_spikes=n_spikes, t_isi=t_isi, t_emu=t_emu,
                                       trials=trials, seed=seed)
    grid = np.geomspace(1e-3, 1.0, 13)
    stds = [std_at(s) for s in grid]
    above = [i for i, v in enumerate(stds) if v >= target_std]
    if not above:
        raise RuntimeError("sigma_i calibration failed: target spread not reached")
    i = above[0]
    if i == 0:
        return float(grid[0])
    lo, hi = grid[i - 1], grid[i]
    for _ in range(7):
        mid = float(np.sqrt(lo * hi))
        if std_at(mid) >= target_std:
            hi = mid
        else:
            lo = mid
    return float(np.sqrt(lo * hi))
