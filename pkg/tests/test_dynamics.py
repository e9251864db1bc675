import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from tbf import _kernels_py, kernels
from tbf.dynamics import (
    IDX,
    InitialState,
    NumericalInstabilityError,
    apply_ef_swap,
    coefficient_derivative,
    derive_params,
    generation_efficiency,
    integrate,
    normalize_measured_trace,
    rate_vector,
    run_timebin_protocol,
    temporal_modes,
    wavepacket_amplitude,
)
from tbf.pulses import CouplingPulseSpec, Grid, build_timebin_sequence, coupling_pulse, default_sequence_spec
from tbf.system import lossless
from tbf.waveform import SampledWaveform, zeros

MHZ = 2 * math.pi * 1e6


def only(name, value=1.0):
    c = np.zeros(10, complex)
    c[IDX[name]] = value
    return c


def decay_error(p, dt, window=1e-6):
    res = integrate(only("g1g1"), zeros(0.0, dt / 2, 3), p, window, dt=dt)
    kappa = derive_params(p).kappa
    exact = np.exp(-kappa * res.times)
    return np.max(np.abs(res.coefficient("g1g1").real - exact) / exact), res


# --- derivative -----------------------------------------------------------


def test_derivative_examples(params):
    d = derive_params(params)
    assert coefficient_derivative(only("g1g1"), 0.0, params)[IDX["g1g1"]] == pytest.approx(-d.kappa)
    de = coefficient_derivative(only("e0e0"), 0.0, params)
    assert de[IDX["g0g0"]] == pytest.approx(1 / params.t1_ge)
    assert de[IDX["e0e0"]] == pytest.approx(-1 / params.t1_ge)
    g = 1.3 * MHZ
    df = coefficient_derivative(only("f0f0"), g, params)
    # i g* (C_g1g1 - C_f0f0) with C_f0f0 = 1
    assert df[IDX["f0g1"]] == pytest.approx(-1j * g)
    gc = g * np.exp(0.4j)
    assert coefficient_derivative(only("f0f0"), gc, params)[IDX["f0g1"]] == pytest.approx(-1j * np.conj(gc))
    with pytest.raises(ValueError):
        coefficient_derivative(only("f0f0"), complex("nan"), params)


# --- analytic decay -------------------------------------------------------


def test_analytic_decay_at_100ns(params):
    _, res = decay_error(params, 0.1e-9)
    k = int(round(100e-9 / 0.1e-9))
    assert res.coefficient("g1g1")[k].real == pytest.approx(0.1292, abs=1e-4)
    assert res.coefficient("g1g1")[k].real == pytest.approx(math.exp(-derive_params(params).kappa * 1e-7), rel=1e-9)


def test_analytic_decay_error_and_rk4_order(params):
    dts = np.array([0.4e-9, 0.2e-9, 0.1e-9])
    errs = np.array([decay_error(params, dt)[0] for dt in dts])
    assert errs[-1] < 1e-6
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.2)


def test_dark_state_is_constant(params):
    res = integrate(InitialState(1.0), zeros(0.0, 0.05e-9, 3), params, 200e-9)
    np.testing.assert_allclose(res.coefficients, np.tile(only("g0g0"), (res.times.size, 1)), atol=1e-15)


def test_swap_examples_and_involution():
    assert apply_ef_swap(only("f0f0"))[IDX["e0e0"]] == 1
    rng = np.random.default_rng(3)
    c = rng.normal(size=10) + 1j * rng.normal(size=10)
    np.testing.assert_array_equal(apply_ef_swap(apply_ef_swap(c)), c)


# --- lossless oracles -----------------------------------------------------


def lossless_oracle(p, spec, times, c0, c2):
    """Amplitudes of a driven f0 <-> g1 pair with a leaky cavity (no-jump evolution)."""
    w, gmax, kappa = spec.width, spec.peak_geff, derive_params(p).kappa

    def g(t):
        return gmax * 0.5 * (1 - math.cos(2 * math.pi * t / w)) if t <= w else 0.0

    def rhs(t, y):
        af, ag = y[0] + 1j * y[1], y[2] + 1j * y[3]
        daf = -1j * g(t) * ag
        dag = -1j * g(t) * af - 0.5 * kappa * ag
        return [daf.real, daf.imag, dag.real, dag.imag]

    sol = solve_ivp(rhs, (times[0], times[-1]), [c2, 0, 0, 0], t_eval=times, method="DOP853", rtol=1e-11, atol=1e-13)
    return sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3]


def test_lossless_matches_amplitude_oracle(params):
    p = lossless(params)
    spec = CouplingPulseSpec()
    dt = 0.1e-9
    g = coupling_pulse(spec, Grid.spanning(0.0, 0.95e-6, dt / 2))
    c0 = c2 = 1 / math.sqrt(2)
    res = integrate(InitialState(c0, 0.0, c2), g, p, 0.95e-6, dt=dt)
    af, ag = lossless_oracle(p, spec, res.times, c0, c2)
    d = derive_params(p)
    assert np.max(np.abs(res.coefficient("f0f0").real - np.abs(af) ** 2)) < 1e-9
    assert np.max(np.abs(res.coefficient("g1g1").real - np.abs(ag) ** 2)) < 1e-9
    assert np.max(np.abs(res.coefficient("f0g1") - np.conj(af) * ag)) < 1e-9
    # the g0-g1 coherence rotates at the frame frequency in the literal frame
    lit = c0 * ag * np.exp(1j * (2 * d.delta + p.alpha) * res.times)
    assert np.max(np.abs(res.coefficient("g0g1") - lit)) < 1e-9


def test_lossless_full_transfer_efficiency(params):
    eff = generation_efficiency(lossless(params), CouplingPulseSpec(width=750e-9, chirp_coeff=-1.66 * MHZ))
    assert eff.eta_gen == pytest.approx(1.0, abs=1e-3)
    assert eff.P_e0_sc == pytest.approx(0.0, abs=1e-12)


def test_two_bin_lossless_budget(params):
    spec = default_sequence_spec(CouplingPulseSpec(width=750e-9), dt=0.1e-9)
    init = InitialState(1 / math.sqrt(2), 0.5, 0.5)
    res = run_timebin_protocol(init, build_timebin_sequence(spec), lossless(params), dt=0.1e-9)
    budget = abs(init.C_0) ** 2 * (abs(init.C_1) ** 2 + abs(init.C_2) ** 2)
    assert res.emitted_energy() == pytest.approx(budget, abs=1e-4)
    modes = temporal_modes(res)
    assert modes.overlap == pytest.approx(0.0, abs=1e-12)


def test_branching_at_equal_internal_loss(params):
    pw = CouplingPulseSpec(width=750e-9)
    p = dataclasses.replace(lossless(params), kappa_in=lossless(params).kappa_ex)
    eff = generation_efficiency(p, pw)
    res = eff.result
    c = res.coefficients[-1]
    integral = p.kappa_ex * np.trapezoid(np.abs(res.coefficient("g0g1")) ** 2, dx=res.times[1] - res.times[0])
    assert eff.emitted == pytest.approx(integral, rel=1e-12)
    left_cavity = 0.5 * (0.5 - c[IDX["f0f0"]].real - c[IDX["g1g1"]].real)
    assert eff.emitted / left_cavity == pytest.approx(0.5, abs=1e-3)
    base = generation_efficiency(params)
    branched = generation_efficiency(dataclasses.replace(params, kappa_in=params.kappa_ex))
    assert branched.eta_gen / base.eta_gen == pytest.approx(0.5, abs=0.1)


# --- protocol -------------------------------------------------------------


def test_two_lobe_trace(params):
    spec = default_sequence_spec(CouplingPulseSpec(chirp_coeff=-1.66 * MHZ), dt=0.1e-9)
    res = run_timebin_protocol(InitialState(1 / math.sqrt(2), 0.5, 0.5), build_timebin_sequence(spec), params)
    power = np.abs(res.f0t.samples) ** 2
    t = res.times
    early, late = power[t < res.swap_time], power[t >= spec.bin_separation]
    assert early.max() > 0.05 * power.max() and late.max() > 0.05 * power.max()
    # near-dark gap between the lobes
    gap = power[(t > 0.9e-6) & (t < res.swap_time)]
    assert gap.max() < 0.05 * power.max()
    np.testing.assert_allclose(wavepacket_amplitude(res).samples, res.f0t.samples)


def test_ground_state_emits_nothing(params):
    spec = default_sequence_spec(dt=0.1e-9)
    res = run_timebin_protocol(InitialState(1.0), build_timebin_sequence(spec), params)
    assert np.all(res.f0t.samples == 0)


def test_excitation_bookkeeping(params):
    p = lossless(params)
    spec = CouplingPulseSpec()
    g = coupling_pulse(spec, Grid.spanning(0.0, 0.95e-6, 0.05e-9))
    res = integrate(InitialState(0.6, 0.0, 0.8), g, p, 0.95e-6)
    pops = sum(res.populations[k] for k in ("P_g0", "P_e0", "P_f0", "P_g1"))
    emitted = p.kappa_ex * np.concatenate(
        [[0.0], np.cumsum(0.5 * (res.populations["P_g1"][1:] + res.populations["P_g1"][:-1]) * 1e-10)]
    )
    # g0 absorbs the emitted photon, so populations stay normalised
    np.testing.assert_allclose(pops, 1.0, atol=1e-10)
    np.testing.assert_allclose(res.populations["P_g0"] - 0.36, emitted, atol=1e-7)


def test_independent_conjugate_agrees(params):
    g = coupling_pulse(CouplingPulseSpec(chirp_coeff=-1.66 * MHZ), Grid.spanning(0.0, 300e-9, 0.05e-9))
    y0 = InitialState(math.sqrt(0.5), 0.0, math.sqrt(0.5)).coefficients()
    rates = rate_vector(params)
    args = (y0, g.samples[: 2 * 3000 + 1], np.zeros(6001), 0.0, 0.1e-9, 3000, rates, True)
    out = kernels.integrate_coefficients(*args, independent_conjugate=True)
    np.testing.assert_allclose(out[:, 10], np.conj(out[:, 7]), atol=1e-12)


def test_literal_frame_agrees_with_interaction(params):
    init = InitialState(math.sqrt(0.5), 0.0, math.sqrt(0.5))
    errs = []
    for dt in (0.002e-9, 0.001e-9):
        g = coupling_pulse(CouplingPulseSpec(), Grid.spanning(0.0, 20e-9, dt / 2))
        a = integrate(init, g, params, 20e-9, dt=dt, interaction=False)
        b = integrate(init, g, params, 20e-9, dt=dt, interaction=True)
        errs.append(np.max(np.abs(a.coefficients - b.coefficients)))
    # the literal build carries the fast frame phases, so it converges at fourth order
    assert errs[1] < 1e-5
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.15)
    with pytest.raises(NumericalInstabilityError, match="unstable"):
        integrate(init, g, params, 20e-9, dt=0.1e-9, interaction=False)


def test_backends_agree(params):
    g = coupling_pulse(CouplingPulseSpec(chirp_coeff=-1.66 * MHZ), Grid.spanning(0.0, 200e-9, 0.05e-9))
    y0 = InitialState(math.sqrt(0.5), 0.0, math.sqrt(0.5)).coefficients()
    args = (y0, g.samples[:4001], 0.1 * np.abs(g.samples[:4001]), 0.0, 0.1e-9, 2000, rate_vector(params), True)
    ref = _kernels_py.integrate_coefficients(*args)
    out = kernels.integrate_coefficients(*args)
    np.testing.assert_allclose(out, ref, rtol=0, atol=1e-13)


def test_backend_reported(params):
    res = integrate(InitialState(1.0), zeros(0.0, 0.05e-9, 3), params, 1e-9)
    assert res.info["backend"] == kernels.BACKEND in ("cython", "python")


def test_normalize_measured_trace():
    sim = SampledWaveform(0.0, 1e-9, np.linspace(0, 1, 50) + 0.2j)
    assert normalize_measured_trace(sim, sim) == pytest.approx(1.0)
    assert normalize_measured_trace(sim * 2, sim) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        normalize_measured_trace(zeros(0.0, 1e-9, 50), sim)


def test_efficiency_default_values(params):
    eff = generation_efficiency(params)
    assert 0.81 <= eff.eta_gen <= 0.85
    assert 0.01 <= eff.P_e0_sc <= 0.03


# --- properties -----------------------------------------------------------


@given(st.floats(0, 2 * math.pi))
def test_initial_phase_covariance(theta):
    from tbf.system import load_system_params

    p = load_system_params()
    g = coupling_pulse(CouplingPulseSpec(), Grid.spanning(0.0, 400e-9, 0.1e-9))
    a = integrate(InitialState(math.sqrt(0.5), 0.0, math.sqrt(0.5)), g, p, 400e-9, dt=0.2e-9)
    b = integrate(InitialState(math.sqrt(0.5), 0.0, math.sqrt(0.5) * np.exp(1j * theta)), g, p, 400e-9, dt=0.2e-9)
    np.testing.assert_allclose(b.f0t.samples, a.f0t.samples * np.exp(1j * theta), atol=1e-12)


@given(
    st.floats(0, 1),
    st.floats(0, 1),
    st.floats(0, 2 * math.pi),
    st.floats(0.2, 2.0),
)
def test_populations_stay_physical(x, y, phase, gscale):
    from tbf.system import load_system_params

    p = load_system_params()
    amps = np.array([x, y, 1.0]) / math.sqrt(x * x + y * y + 1.0)
    init = InitialState(amps[0], amps[1], amps[2] * np.exp(1j * phase))
    spec = CouplingPulseSpec(peak_geff=gscale * 1.3 * MHZ, width=300e-9)
    g = coupling_pulse(spec, Grid.spanning(0.0, 400e-9, 0.1e-9))
    res = integrate(init, g, p, 400e-9, dt=0.2e-9)  # raises on a breach
    pops = np.stack([res.populations[k] for k in ("P_g0", "P_e0", "P_f0", "P_g1")])
    assert pops.min() > -1e-10 and pops.sum(axis=0).max() < 1 + 1e-8
