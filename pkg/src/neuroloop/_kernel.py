"""JIT-compiled inner loop of the network emulation.

One call advances the full 32-neuron network over an emulation window with
exact exponential propagators, delivering a spike train on one input row,
applying per-step membrane noise, and updating the synapse-local
correlation sensors event by event. The pure-numpy single-step path in
``network.py`` implements the identical arithmetic; the two are held
bit-equal by tests.
"""

from __future__ import annotations

import math

from numba import njit


@njit(cache=True)
def emulate_window_kernel(
    n_steps,
    dt,
    step0,          # global step count at the window start
    pre_steps,      # (n_pre,) int64, strictly increasing step indices
    row,            # input row receiving the train
    amp,            # (32,) current increment per pre spike (weight_scale * w[row, :])
    p_i,            # (32,) exp(-dt / tau_syn_eff)
    p_v,            # (32,) exp(-dt / tau_mem_eff)
    p_vi,           # (32,) current->voltage propagator entry
    v_leak,
    v_thresh,
    v_reset,
    ref_steps,      # (32,) int64 refractory step counts
    v,              # (32,) state, mutated
    i_syn,          # (32,) state, mutated
    refrac,         # (32,) int64 state, mutated
    counts,         # (32,) int64 spike counters, mutated, saturate at 255
    noise,          # (n_steps, 32) float32 unit normals, or (0, 0) for none
    noise_scale,    # volts per unit normal per step
    eta_p,          # (32, 32) effective causal sensor amplitude
    tau_p,          # (32, 32) effective causal sensor time constant
    eta_m,          # (32, 32) effective anti-causal amplitude
    tau_m,          # (32, 32) effective anti-causal time constant
    acc_plus,       # (32, 32) mutated
    acc_minus,      # (32, 32) mutated
    last_pre,       # (32,) per-row last pre time, -1 when none, mutated
    last_post,      # (32,) per-column last post time, -1 when none, mutated
    consumed,       # (32, 32) time of last causally consumed pre, -1 when none
    out_steps,      # (cap,) int64 scratch for emitted spike step indices
    out_neurons,    # (cap,) int64 scratch for emitted spike neuron indices
):
    n = v.shape[0]
    n_pre = pre_steps.shape[0]
    have_noise = noise.shape[0] == n_steps and noise_scale != 0.0
    pre_idx = 0
    n_out = 0
    for s in range(n_steps):
        while pre_idx < n_pre and pre_steps[pre_idx] == s:
            t_pre = (step0 + s) * dt
            for c in range(n):
                i_syn[c] += amp[c]
                lp = last_post[c]
                if lp >= 0.0:
                    acc_minus[row, c] += eta_m[row, c] * math.exp(-(t_pre - lp) / tau_m[row, c])
            last_pre[row] = t_pre
            pre_idx += 1
        for c in range(n):
            i0 = i_syn[c]
            i_syn[c] = i0 * p_i[c]
            if refrac[c] > 0:
                refrac[c] -= 1
                v[c] = v_reset[c]
            else:
                vv = v_leak[c] + (v[c] - v_leak[c]) * p_v[c] + i0 * p_vi[c]
                if have_noise:
                    vv = vv + noise_scale * noise[s, c]
                if vv >= v_thresh[c]:
                    t_post = (step0 + s + 1) * dt
                    v[c] = v_reset[c]
                    refrac[c] = ref_steps[c]
                    if counts[c] < 255:
                        counts[c] += 1
                    for m in range(n):
                        lpre = last_pre[m]
                        if lpre >= 0.0 and lpre > consumed[m, c]:
                            acc_plus[m, c] += eta_p[m, c] * math.exp(-(t_post - lpre) / tau_p[m, c])
                            consumed[m, c] = lpre
                    last_post[c] = t_post
                    out_steps[n_out] = s
                    out_neurons[n_out] = c
                    n_out += 1
                else:
                    v[c] = vv
    return n_out
