"""Qubit-cavity emission dynamics.

Ten expectation values ``C[vj, wl] = <|vj><wl|>`` are integrated with
fixed-step RK4. Initial values follow from the amplitudes of the initial
state as ``C[vj, wl] = conj(a_vj) * a_wl``, so the emitted field
``f(0, t) = -i sqrt(kappa_ex) C[g0, g1]`` carries the phase of the f-level
amplitude relative to the ground-state amplitude.

By default the fast rotating-frame phases (2 delta + alpha, delta,
delta + alpha) are removed analytically before integration; the literal
build keeps them and needs a step well below 0.05 ns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tbf import kernels
from tbf.pulses import CouplingPulseSpec, Grid, TimebinSequence, coupling_pulse
from tbf.system import DerivedParams, SystemParams, derive_params
from tbf.waveform import SampledWaveform

COEFF_NAMES = ("g0f0", "g0g1", "e0f0", "e0g1", "g0e0", "f0f0", "g1g1", "f0g1", "g0g0", "e0e0")
IDX = {name: i for i, name in enumerate(COEFF_NAMES)}
POPULATIONS = ("g0g0", "e0e0", "f0f0", "g1g1")

POP_FLOOR = -1e-10
TOTAL_CEIL = 1.0 + 1e-8

DEFAULT_DT = 0.1e-9
DEFAULT_WINDOW = 0.95e-6


class NumericalInstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class InitialState:
    """Amplitudes of |g0>, |e0>, |f0> (cavity empty, line in vacuum)."""

    C_0: complex
    C_1: complex = 0.0
    C_2: complex = 0.0

    def __post_init__(self):
        norm = abs(self.C_0) ** 2 + abs(self.C_1) ** 2 + abs(self.C_2) ** 2
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"initial amplitudes not normalised (|C|^2 sum = {norm:.12g})")

    @classmethod
    def from_qubit(cls, alpha_q: complex, beta_q: complex) -> "InitialState":
        """State after mapping alpha|g> + beta|e> to alpha|e> + beta|f>."""
        return cls(0.0, alpha_q, beta_q)

    def coefficients(self) -> np.ndarray:
        a = {"g0": complex(self.C_0), "e0": complex(self.C_1), "f0": complex(self.C_2), "g1": 0j}
        c = np.empty(10, dtype=complex)
        for name, i in IDX.items():
            v, w = name[:2], name[2:]
            c[i] = a[v].conjugate() * a[w]
        return c


def initial_coefficients(init: InitialState) -> np.ndarray:
    return init.coefficients()


@dataclass(frozen=True)
class StarkInjection:
    """Optional f-level shift ``coeff * |g_eff(t) / reference|**2`` (rad/s)."""

    coeff: float
    reference: float

    def shift(self, g: np.ndarray) -> np.ndarray:
        if self.reference <= 0:
            raise ValueError("Stark reference amplitude must be positive")
        return self.coeff * np.abs(g / self.reference) ** 2


def rate_vector(p: SystemParams, d: DerivedParams | None = None) -> np.ndarray:
    d = d or derive_params(p)
    return np.array(
        [
            2 * d.delta + p.alpha,
            d.delta,
            d.delta + p.alpha,
            p.alpha,
            d.kappa,
            1.0 / p.t2_ef,
            1.0 / p.t2_ge,
            1.0 / p.t1_ef,
            1.0 / p.t1_ge,
            math.sqrt(1.0 / (p.t1_ge * p.t1_ef)),
        ]
    )


def coefficient_derivative(c, g_eff: complex, p: SystemParams, stark: float = 0.0) -> np.ndarray:
    """Right-hand side of the coefficient equations in the literal rotating frame."""
    if not np.isfinite(g_eff):
        raise ValueError("g_eff must be finite")
    return kernels.derivative(np.asarray(c, dtype=complex), g_eff, rate_vector(p), stark, 0.0, False)


def apply_ef_swap(c) -> np.ndarray:
    """Exchange the e0 and f0 labels in every coefficient (ideal pi_ef pulse)."""
    c = np.asarray(c, dtype=complex)
    out = c.copy()
    out[IDX["e0e0"]], out[IDX["f0f0"]] = c[IDX["f0f0"]], c[IDX["e0e0"]]
    out[IDX["g0e0"]], out[IDX["g0f0"]] = c[IDX["g0f0"]], c[IDX["g0e0"]]
    out[IDX["e0g1"]], out[IDX["f0g1"]] = c[IDX["f0g1"]], c[IDX["e0g1"]]
    out[IDX["e0f0"]] = np.conj(c[IDX["e0f0"]])
    return out


@dataclass(frozen=True, eq=False)
class DynamicsResult:
    times: np.ndarray
    coefficients: np.ndarray  # (n, 10), literal rotating frame
    f0t: SampledWaveform
    kappa_ex: float
    swap_time: float | None = None
    info: dict = field(default_factory=dict)

    def coefficient(self, name: str) -> np.ndarray:
        return self.coefficients[:, IDX[name]]

    @property
    def populations(self) -> dict:
        return {
            "P_g0": self.coefficient("g0g0").real,
            "P_e0": self.coefficient("e0e0").real,
            "P_f0": self.coefficient("f0f0").real,
            "P_g1": self.coefficient("g1g1").real,
        }

    @property
    def p_e0_end(self) -> float:
        """|e0> population at the last time point."""
        return float(self.coefficients[-1, IDX["e0e0"]].real)

    @property
    def P_e0_sc(self) -> float:
        return self.p_e0_end

    def emitted_energy(self) -> float:
        return self.f0t.energy()


def _half_step_samples(g_eff: SampledWaveform, t0: float, dt: float, n_steps: int) -> np.ndarray:
    t_half = t0 + 0.5 * dt * np.arange(2 * n_steps + 1)
    ratio = 0.5 * dt / g_eff.dt
    offset = (t0 - g_eff.t0) / g_eff.dt
    step = round(ratio)
    k0 = round(offset)
    # aligned grids: take samples directly instead of interpolating
    if (
        step >= 1
        and abs(ratio - step) < 1e-9
        and abs(offset - k0) < 1e-6
        and k0 >= 0
        and k0 + step * 2 * n_steps < len(g_eff)
    ):
        return np.asarray(g_eff.samples[k0 : k0 + step * 2 * n_steps + 1 : step], dtype=complex)
    return g_eff.at(t_half)


def check_trajectory(coeffs: np.ndarray, times: np.ndarray) -> None:
    if not np.all(np.isfinite(coeffs)):
        raise NumericalInstabilityError("non-finite coefficients; step size too large")
    pops = coeffs[:, [IDX[n] for n in POPULATIONS]].real
    worst = pops.min()
    if worst < POP_FLOOR:
        k = int(np.argmin(pops.min(axis=1)))
        raise NumericalInstabilityError(f"population {worst:.3g} < {POP_FLOOR:g} at t = {times[k]:.4g} s")
    total = pops.sum(axis=1)
    if total.max() > TOTAL_CEIL:
        k = int(np.argmax(total))
        raise NumericalInstabilityError(f"total population {total[k]:.12g} exceeds 1 at t = {times[k]:.4g} s")


def integrate(
    init,
    g_eff: SampledWaveform,
    p: SystemParams,
    window: float,
    dt: float = DEFAULT_DT,
    t0: float = 0.0,
    stark: StarkInjection | None = None,
    interaction: bool = True,
    check: bool = True,
) -> DynamicsResult:
    """Integrate from ``t0`` to ``t0 + window``.

    ``init`` is an :class:`InitialState` or a literal-frame coefficient
    vector. ``g_eff`` is read on the half-step grid and treated as zero
    outside its own window.
    """
    if not 0 < dt <= 1e-9:
        raise ValueError("dt must be in (0, 1 ns]")
    c0 = init.coefficients() if isinstance(init, InitialState) else np.asarray(init, dtype=complex)
    n_steps = int(round(window / dt))
    if n_steps < 1:
        raise ValueError("window shorter than one step")
    rates = rate_vector(p)
    if not interaction and dt > kernels.stability_limit(rates):
        raise NumericalInstabilityError(
            f"literal-frame RK4 unstable at dt = {dt:.3g} s (limit {kernels.stability_limit(rates):.3g} s)"
        )
    g_half = _half_step_samples(g_eff, t0, dt, n_steps)
    s_half = stark.shift(g_half) if stark is not None else np.zeros(g_half.size)
    times = t0 + dt * np.arange(n_steps + 1)
    if interaction:
        w = kernels.frame_frequencies(rates)
        x0 = c0 * np.exp(-1j * w * t0)
        x = kernels.integrate_coefficients(x0, g_half, s_half, t0, dt, n_steps, rates, True)
        with np.errstate(invalid="ignore", over="ignore"):
            coeffs = x * np.exp(1j * np.outer(times, w))
    else:
        coeffs = kernels.integrate_coefficients(c0, g_half, s_half, t0, dt, n_steps, rates, False)
    if check:
        check_trajectory(coeffs, times)
    f = -1j * math.sqrt(p.kappa_ex) * coeffs[:, IDX["g0g1"]]
    return DynamicsResult(
        times=times,
        coefficients=coeffs,
        f0t=SampledWaveform(t0, dt, f),
        kappa_ex=p.kappa_ex,
        info={"backend": kernels.BACKEND, "interaction": interaction, "dt": dt},
    )


def wavepacket_amplitude(result: DynamicsResult, kappa_ex: float | None = None) -> SampledWaveform:
    """Emitted amplitude ``-i sqrt(kappa_ex) C[g0, g1](t)`` at the cavity output."""
    k = result.kappa_ex if kappa_ex is None else kappa_ex
    t = result.times
    return SampledWaveform(t[0], t[1] - t[0] if t.size > 1 else 1.0, -1j * math.sqrt(k) * result.coefficient("g0g1"))


def run_timebin_protocol(
    init: InitialState,
    sequence: TimebinSequence,
    p: SystemParams,
    dt: float = DEFAULT_DT,
    stark: StarkInjection | None = None,
    interaction: bool = True,
) -> DynamicsResult:
    """Emit the first bin, swap e0 and f0 at the ``swap_ef`` marker, emit the second bin."""
    couplings = sorted((e for e in sequence.spec.pulses if e.kind == "coupling"), key=lambda e: e.start)
    t_start = couplings[0].start
    t_swap = sequence.swap_time
    t_end = couplings[1].start + sequence.spec.window
    g = sequence.channels["coupling"]
    first = integrate(init, g, p, t_swap - t_start, dt=dt, t0=t_start, stark=stark, interaction=interaction)
    c_swapped = apply_ef_swap(first.coefficients[-1])
    t_swap_grid = first.times[-1]
    second = integrate(
        c_swapped, g, p, t_end - t_swap_grid, dt=dt, t0=t_swap_grid, stark=stark, interaction=interaction
    )
    times = np.concatenate([first.times[:-1], second.times])
    coeffs = np.concatenate([first.coefficients[:-1], second.coefficients])
    f = -1j * math.sqrt(p.kappa_ex) * coeffs[:, IDX["g0g1"]]
    return DynamicsResult(
        times=times,
        coefficients=coeffs,
        f0t=SampledWaveform(times[0], dt, f),
        kappa_ex=p.kappa_ex,
        swap_time=float(t_swap_grid),
        info={**second.info, "pre_swap": first.coefficients[-1].copy()},
    )


@dataclass(frozen=True, eq=False)
class EfficiencyResult:
    eta_gen: float
    P_e0_sc: float
    p_e0_abs: float
    p_f0_left: float
    emitted: float
    result: DynamicsResult


def default_stark(pulse: CouplingPulseSpec) -> StarkInjection:
    """Stark shift that the pulse's own chirp cancels exactly."""
    return StarkInjection(coeff=-pulse.chirp_coeff, reference=pulse.peak_geff)


def generation_efficiency(
    p: SystemParams,
    pulse: CouplingPulseSpec | None = None,
    window: float = DEFAULT_WINDOW,
    dt: float = DEFAULT_DT,
    stark: StarkInjection | None | str = "auto",
    interaction: bool = True,
) -> EfficiencyResult:
    """Photon generation efficiency of a single bin.

    Starts from ``(|g0> + |f0>)/sqrt(2)``, emits one bin and returns
    ``eta = emitted / (|C_0|^2 |C_2|^2) / (1 - P_e0_sc)``, where the emitted
    energy is the trapezoidal integral of ``|f(0, t)|^2`` over the window and
    ``P_e0_sc`` is the |e0> population left at the window end per unit of
    initial |f0> population.

    ``stark="auto"`` injects the Stark shift that the pulse chirp cancels.
    """
    pulse = pulse or CouplingPulseSpec(chirp_coeff=-2 * math.pi * 1.66e6)
    if stark == "auto":
        stark = default_stark(pulse) if pulse.chirp_coeff else None
    c0 = c2 = 1 / math.sqrt(2)
    init = InitialState(c0, 0.0, c2)
    grid = Grid.spanning(0.0, window, dt / 2)
    g = coupling_pulse(pulse, grid, start=0.0)
    res = integrate(init, g, p, window, dt=dt, stark=stark, interaction=interaction)
    emitted = res.f0t.energy()
    p_e0 = res.p_e0_end
    p_sc = p_e0 / abs(c2) ** 2
    if p_sc >= 1:
        raise NumericalInstabilityError("leftover |e0> population >= 1")
    eta = emitted / (abs(c0) ** 2 * abs(c2) ** 2) / (1.0 - p_sc)
    return EfficiencyResult(
        eta_gen=float(eta),
        P_e0_sc=float(p_sc),
        p_e0_abs=float(p_e0),
        p_f0_left=float(res.coefficients[-1, IDX["f0f0"]].real),
        emitted=float(emitted),
        result=res,
    )


def normalize_measured_trace(measured: SampledWaveform, simulated: SampledWaveform) -> float:
    """Scale ``s`` with ``s**2 * energy(measured) == energy(simulated)``."""
    if not measured.same_grid(simulated):
        raise ValueError("traces must share a grid")
    e_m = measured.energy()
    if e_m <= 0:
        raise ValueError("measured trace has zero energy")
    return math.sqrt(simulated.energy() / e_m)


@dataclass(frozen=True, eq=False)
class TemporalModes:
    early: SampledWaveform
    late: SampledWaveform
    overlap: float


def temporal_modes(result: DynamicsResult, split: float | None = None) -> TemporalModes:
    """Matched-filter mode functions: the emitted amplitude split at the swap and normalised per bin."""
    split = result.swap_time if split is None else split
    if split is None:
        raise ValueError("no split time given and the result has no swap marker")
    f = result.f0t
    t = f.times
    early = np.where(t < split, f.samples, 0)
    late = np.where(t >= split, f.samples, 0)
    modes = []
    for s in (early, late):
        wf = f.with_samples(s)
        e = wf.energy()
        if e <= 0:
            raise ValueError("empty temporal bin")
        modes.append(wf * (1 / math.sqrt(e)))
    overlap = abs(np.trapezoid(np.conj(modes[0].samples) * modes[1].samples, dx=f.dt))
    if overlap > 1e-3:
        raise ValueError(f"temporal modes overlap ({overlap:.3g})")
    return TemporalModes(modes[0], modes[1], float(overlap))
