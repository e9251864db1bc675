"""Drive envelopes and the two-bin generation sequence.

Gaussian control pulses use ``sigma = width`` truncated at ``n_sigma`` widths
on each side. Coupling pulses are raised cosines ``[1 - cos(2 pi t / w)] / 2``
whose phase can be chirped to cancel a drive-induced Stark shift that is
quadratic in the normalised pulse amplitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from tbf.waveform import SampledWaveform

DEFAULT_PHASE_OFFSET = 0.74 * math.pi
DEFAULT_N_SIGMA = 3.0
MIN_SAMPLES_PER_PERIOD = 8


class PulseTruncationError(ValueError):
    pass


class UndersampledCarrierError(ValueError):
    pass


class SequenceOverlapError(ValueError):
    pass


class Grid(NamedTuple):
    t0: float
    dt: float
    n: int

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.n - 1)

    @classmethod
    def spanning(cls, t0: float, t1: float, dt: float) -> "Grid":
        n = int(math.ceil((t1 - t0) / dt - 1e-9)) + 1
        return cls(float(t0), float(dt), n)


def _as_grid(grid) -> Grid:
    if isinstance(grid, SampledWaveform):
        return Grid(grid.t0, grid.dt, len(grid))
    return Grid(*grid)


# --- envelopes ------------------------------------------------------------


def gaussian_envelope(
    width: float,
    amplitude: float,
    grid,
    center: float | None = None,
    n_sigma: float = DEFAULT_N_SIGMA,
    allow_truncation: bool = False,
) -> SampledWaveform:
    """Real Gaussian ``amplitude * exp(-(t - center)**2 / (2 width**2))``, zero beyond ``n_sigma`` widths."""
    if not width > 0:
        raise ValueError("width must be positive")
    g = _as_grid(grid)
    t = g.times
    if center is None:
        center = 0.5 * (g.t0 + g.t_end)
    tol = 1e-9 * width
    if not allow_truncation and (
        center - n_sigma * width < g.t0 - tol or center + n_sigma * width > g.t_end + tol
    ):
        raise PulseTruncationError(f"grid does not cover ±{n_sigma:g} widths around the pulse centre")
    x = (t - center) / width
    env = amplitude * np.exp(-0.5 * x**2)
    env[np.abs(x) > n_sigma + 1e-12] = 0.0
    return SampledWaveform(g.t0, g.dt, env)


def cosine_envelope(w: float, peak: float, grid, start: float = 0.0) -> SampledWaveform:
    """Raised-cosine pulse of width ``w`` starting at ``start``; zero outside ``[start, start + w]``."""
    if not w > 0:
        raise ValueError("width must be positive")
    g = _as_grid(grid)
    s = g.times - start
    inside = (s >= -1e-12 * w) & (s <= w * (1 + 1e-12))
    env = np.where(inside, peak * 0.5 * (1.0 - np.cos(2.0 * math.pi * s / w)), 0.0)
    return SampledWaveform(g.t0, g.dt, env)


# --- DRAG -----------------------------------------------------------------


@dataclass(frozen=True)
class DragSpec:
    """Gaussian control pulse with derivative correction.

    ``beta`` multiplies the envelope derivative taken with respect to time
    measured in ``time_unit`` seconds (1 ns, the synthesiser sample period),
    which keeps it dimensionless.
    """

    width: float
    amplitude: float
    drive_phase: float = 0.0
    beta: float = 0.0
    drive_freq: float = 0.0
    time_unit: float = 1e-9

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")


def envelope_derivative(env: SampledWaveform, time_unit: float = 1.0) -> np.ndarray:
    """Central differences inside, one-sided at both ends; per ``time_unit``."""
    x = np.real(env.samples)
    if x.size < 2:
        return np.zeros_like(x)
    return np.gradient(x, env.dt / time_unit, edge_order=1)


def apply_drag(env: SampledWaveform, spec: DragSpec, baseband: bool = False) -> SampledWaveform:
    """Add the derivative quadrature to a real envelope.

    With ``baseband=True`` the result is the I/Q envelope ``X + i beta dX/dt``.
    Otherwise the carrier-level real waveform
    ``X cos(w_d t + phi) + beta dX/dt sin(w_d t + phi)`` is returned, which
    requires at least 8 samples per carrier period.
    """
    if np.any(np.abs(np.imag(env.samples)) > 0):
        raise ValueError("DRAG expects a real envelope")
    x = np.real(env.samples)
    dx = envelope_derivative(env, spec.time_unit)
    if baseband:
        return env.with_samples(x + 1j * spec.beta * dx)
    if spec.drive_freq > 0 and 2 * math.pi / (spec.drive_freq * env.dt) < MIN_SAMPLES_PER_PERIOD:
        raise UndersampledCarrierError("carrier undersampled; use baseband=True")
    arg = spec.drive_freq * env.times + spec.drive_phase
    return env.with_samples(x * np.cos(arg) + spec.beta * dx * np.sin(arg))


def drag_pulse(spec: DragSpec, grid, center: float, n_sigma: float = DEFAULT_N_SIGMA, baseband: bool = True):
    env = gaussian_envelope(spec.width, spec.amplitude, grid, center=center, n_sigma=n_sigma, allow_truncation=True)
    out = apply_drag(env, spec, baseband=baseband)
    if baseband and spec.drive_phase:
        out = out * np.exp(1j * spec.drive_phase)
    return out


def pi_pulse_amplitude(width: float, n_sigma: float = DEFAULT_N_SIGMA) -> float:
    """Peak Rabi rate (rad/s) whose truncated Gaussian has area pi."""
    area = width * math.sqrt(2 * math.pi) * math.erf(n_sigma / math.sqrt(2))
    return math.pi / area


# --- chirp and Stark model ------------------------------------------------


def stark_shift_model(amplitude, c_ch: float):
    """Drive-induced transition shift ``c_ch * |amplitude|**2`` (rad/s)."""
    return c_ch * np.abs(amplitude) ** 2


def chirp_phase(a_p: SampledWaveform, c_ch: float) -> np.ndarray:
    """``-c_ch * integral_0^t |a_p|^2 dt'`` by the trapezoidal rule, zero at the first sample."""
    return -c_ch * cumulative_trapezoid(np.abs(a_p.samples) ** 2, dx=a_p.dt, initial=0.0)


def apply_chirp(a_p: SampledWaveform, c_ch: float) -> SampledWaveform:
    """Multiply ``a_p`` by the accumulated Stark-cancelling phase; magnitude is untouched."""
    if c_ch == 0:
        return a_p
    return a_p.with_samples(a_p.samples * np.exp(1j * chirp_phase(a_p, c_ch)))


# --- coupling pulses ------------------------------------------------------


@dataclass(frozen=True)
class CouplingPulseSpec:
    """Raised-cosine f0-g1 coupling pulse.

    ``peak_geff`` is the peak coupling rate (rad/s). ``chirp_coeff`` is in
    rad/s per unit squared of the amplitude normalised to its peak.
    ``phase_offset`` is applied to the second pulse of a time-bin sequence.
    """

    width: float = 540e-9
    peak_geff: float = 2 * math.pi * 1.3e6
    chirp_coeff: float = 0.0
    phase_offset: float = DEFAULT_PHASE_OFFSET

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")
        if not self.peak_geff >= 0:
            raise ValueError("peak_geff must be non-negative")


def coupling_pulse(spec: CouplingPulseSpec, grid, start: float = 0.0, extra_phase: float = 0.0) -> SampledWaveform:
    """Chirped cosine g_eff(t) (rad/s).

    The chirp integral starts at the pulse start, so the pulse phase is
    ``extra_phase`` when it switches on.
    """
    g = _as_grid(grid)
    env = cosine_envelope(spec.width, 1.0, g, start=start)
    phase = chirp_phase(env, spec.chirp_coeff) if spec.chirp_coeff else np.zeros(g.n)
    # restart the accumulated phase at this pulse's own start
    k0 = int(np.clip(np.searchsorted(g.times, start - 1e-12 * spec.width), 0, g.n - 1))
    phase = phase - phase[k0]
    return env.with_samples(spec.peak_geff * env.samples * np.exp(1j * (phase + extra_phase)))


# --- sequences ------------------------------------------------------------

CHANNEL_OF = {"coupling": "coupling", "pi_ge": "control", "pi_ef": "control", "jpa": "jpa"}


@dataclass(frozen=True)
class PulseEntry:
    """One pulse of a sequence.

    ``kind`` is ``coupling``, ``pi_ge``, ``pi_ef`` or ``jpa``. For ``jpa``
    entries ``spec`` is a dict with ``phase`` and ``duration``.
    """

    kind: str
    start: float
    spec: object

    @property
    def channel(self) -> str:
        return CHANNEL_OF[self.kind]

    @property
    def duration(self) -> float:
        if self.kind == "coupling":
            return self.spec.width
        if self.kind in ("pi_ge", "pi_ef"):
            return 2 * DEFAULT_N_SIGMA * self.spec.width
        return float(self.spec["duration"])

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class SequenceSpec:
    pulses: tuple[PulseEntry, ...]
    bin_separation: float
    window: float = 0.95e-6
    dt: float = 0.05e-9

    def check_overlaps(self) -> None:
        by_channel: dict[str, list[PulseEntry]] = {}
        for p in self.pulses:
            by_channel.setdefault(p.channel, []).append(p)
        for ch, items in by_channel.items():
            items = sorted(items, key=lambda p: p.start)
            for a, b in zip(items, items[1:]):
                if b.start < a.end - 1e-15:
                    raise SequenceOverlapError(
                        f"{a.kind} at {a.start:.3g} s overlaps {b.kind} at {b.start:.3g} s on channel {ch!r}"
                    )


@dataclass(frozen=True)
class Marker:
    time: float
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TimebinSequence:
    channels: dict
    markers: tuple[Marker, ...]
    spec: SequenceSpec

    def marker(self, kind: str) -> Marker:
        for m in self.markers:
            if m.kind == kind:
                return m
        raise KeyError(kind)

    @property
    def swap_time(self) -> float:
        return self.marker("swap_ef").time


def default_sequence_spec(
    coupling: CouplingPulseSpec | None = None,
    bin_separation: float = 0.95e-6,
    window: float = 0.95e-6,
    control_width: float = 15e-9,
    beta_ge: float = 0.92,
    beta_ef: float = 1.08,
    jpa_phases: tuple[float, float] = (0.0, 0.0),
    dt: float = 0.05e-9,
) -> SequenceSpec:
    """Preparation pulses before t = 0, coupling pulses at 0 and ``bin_separation``.

    The pi_ef swap sits just before the second coupling pulse.
    """
    coupling = coupling or CouplingPulseSpec()
    amp = pi_pulse_amplitude(control_width)
    ctrl = 2 * DEFAULT_N_SIGMA * control_width
    pi_ef = DragSpec(control_width, amp, beta=beta_ef)
    pi_ge = DragSpec(control_width, amp, beta=beta_ge)
    jpa_len = min(coupling.width + 100e-9, bin_separation)
    pulses = (
        PulseEntry("pi_ef", -2 * ctrl, pi_ef),
        PulseEntry("pi_ge", -ctrl, pi_ge),
        PulseEntry("coupling", 0.0, coupling),
        PulseEntry("jpa", 0.0, {"phase": jpa_phases[0], "duration": jpa_len, "mode": "E"}),
        PulseEntry("pi_ef", bin_separation - ctrl, pi_ef),
        PulseEntry("coupling", bin_separation, coupling),
        PulseEntry("jpa", bin_separation, {"phase": jpa_phases[1], "duration": jpa_len, "mode": "L"}),
    )
    return SequenceSpec(pulses=pulses, bin_separation=bin_separation, window=window, dt=dt)


def build_timebin_sequence(spec: SequenceSpec) -> TimebinSequence:
    """Sample every channel on one grid and emit swap / JPA markers.

    The second coupling pulse carries ``phase_offset`` relative to the first.
    The ``swap_ef`` marker sits at the centre of the pi_ef pulse that precedes
    the second coupling pulse; earlier control pulses are preparation.
    """
    spec.check_overlaps()
    couplings = sorted((p for p in spec.pulses if p.kind == "coupling"), key=lambda p: p.start)
    if len(couplings) != 2:
        raise ValueError("a time-bin sequence needs exactly two coupling pulses")
    first, second = couplings
    t_start = min(p.start for p in spec.pulses)
    t_stop = max(second.start + spec.window, max(p.end for p in spec.pulses))
    grid = Grid.spanning(t_start, t_stop, spec.dt)

    coupling = coupling_pulse(first.spec, grid, start=first.start)
    coupling = coupling + coupling_pulse(second.spec, grid, start=second.start, extra_phase=second.spec.phase_offset)

    control = SampledWaveform(grid.t0, grid.dt, np.zeros(grid.n, complex))
    markers = []
    for p in sorted(spec.pulses, key=lambda p: p.start):
        if p.kind in ("pi_ge", "pi_ef"):
            center = p.start + DEFAULT_N_SIGMA * p.spec.width
            control = control + drag_pulse(p.spec, grid, center)
            if p.kind == "pi_ef" and first.end <= p.start and p.end <= second.start + 1e-15:
                markers.append(Marker(center, "swap_ef"))
            else:
                markers.append(Marker(center, "prep_" + p.kind))
        elif p.kind == "jpa":
            markers.append(Marker(p.start, "jpa_" + p.spec.get("mode", "E"), {"phase": p.spec["phase"]}))
    if not any(m.kind == "swap_ef" for m in markers):
        raise ValueError("sequence has no pi_ef swap between the coupling pulses")
    return TimebinSequence(
        channels={"coupling": coupling, "control": control},
        markers=tuple(sorted(markers, key=lambda m: m.time)),
        spec=spec,
    )
