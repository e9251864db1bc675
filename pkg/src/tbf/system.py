"""Device parameters, unit conversion and derived frequencies.

Config files carry frequencies in Hz and times in seconds. Everything inside
the package is angular (rad/s) and seconds; :func:`load_system_params` and
:func:`dump_system_params` are the only places that multiply or divide by 2*pi.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from tbf.waveform import SampledWaveform

TWO_PI = 2.0 * math.pi

# Relative tolerance for omega_ef == omega_ge + alpha after loading.
EF_CONSISTENCY_RTOL = 1e-6


class ConfigError(ValueError):
    """Raised for malformed or physically inconsistent configuration."""


class PhaseCoherenceError(ValueError):
    """Raised when LO frequencies do not satisfy the repetition-rate condition."""


@dataclass(frozen=True)
class SystemParams:
    """Measured qubit-cavity parameters in angular units.

    ``omega_ef`` defaults to ``omega_ge + alpha``. Infinite T1/T2 values are
    allowed and switch the corresponding decoherence channel off.
    """

    omega_c: float
    omega_c_g: float
    omega_ge: float
    alpha: float
    g: float
    kappa_ex: float
    kappa_in: float
    t1_ge: float
    t2_ge: float
    t1_ef: float
    t2_ef: float
    omega_ef: float = field(default=math.nan)
    g_eff_max: float = math.nan

    def __post_init__(self):
        if math.isnan(self.omega_ef):
            object.__setattr__(self, "omega_ef", self.omega_ge + self.alpha)
        _validate(self)


def _validate(p: SystemParams) -> None:
    if not p.kappa_ex > 0:
        raise ConfigError("kappa_ex must be positive")
    if not p.kappa_in >= 0:
        raise ConfigError("kappa_in must be non-negative")
    for name in ("t1_ge", "t2_ge", "t1_ef", "t2_ef"):
        if not getattr(p, name) > 0:
            raise ConfigError(f"{name} must be positive")
    if p.t2_ge > 2 * p.t1_ge or p.t2_ef > 2 * p.t1_ef:
        raise ConfigError("coherence exceeds 2·T1")
    if not p.alpha < 0:
        raise ConfigError("alpha must be negative for a transmon")
    if abs(p.omega_ef - (p.omega_ge + p.alpha)) > EF_CONSISTENCY_RTOL * abs(p.omega_ge):
        raise ConfigError("omega_ef inconsistent with omega_ge + alpha")


@dataclass(frozen=True)
class DerivedParams:
    kappa: float
    delta: float
    omega_f0g1: float


def derive_params(p: SystemParams) -> DerivedParams:
    """Total cavity linewidth, qubit-cavity detuning and f0-g1 transition frequency."""
    return DerivedParams(
        kappa=p.kappa_ex + p.kappa_in,
        delta=p.omega_ge - p.omega_c,
        omega_f0g1=2.0 * p.omega_ge + p.alpha - p.omega_c,
    )


def lossless(p: SystemParams) -> SystemParams:
    """Copy of ``p`` with T1, T2 infinite and no internal cavity loss."""
    from dataclasses import replace

    inf = math.inf
    return replace(p, kappa_in=0.0, t1_ge=inf, t2_ge=inf, t1_ef=inf, t2_ef=inf)


# --- config files ---------------------------------------------------------

# key in file -> (field name, scale applied on load)
_SYSTEM_KEYS = {
    "omega_c_hz": ("omega_c", TWO_PI),
    "omega_c_g_hz": ("omega_c_g", TWO_PI),
    "omega_ge_hz": ("omega_ge", TWO_PI),
    "omega_ef_hz": ("omega_ef", TWO_PI),
    "alpha_hz": ("alpha", TWO_PI),
    "g_hz": ("g", TWO_PI),
    "kappa_ex_hz": ("kappa_ex", TWO_PI),
    "kappa_in_hz": ("kappa_in", TWO_PI),
    "g_eff_max_hz": ("g_eff_max", TWO_PI),
    "t1_ge_s": ("t1_ge", 1.0),
    "t2_ge_s": ("t2_ge", 1.0),
    "t1_ef_s": ("t1_ef", 1.0),
    "t2_ef_s": ("t2_ef", 1.0),
}
_OPTIONAL_SYSTEM_KEYS = {"omega_ef_hz", "g_eff_max_hz"}

_LO_KEYS = {
    "omega_c_lo_hz": "omega_c_lo",
    "omega_geef_lo_hz": "omega_geef_lo",
    "omega_f0g1_lo_hz": "omega_f0g1_lo",
    "omega_rep_hz": "omega_rep",
}

DEFAULT_CONFIG_NAME = "default_system.ini"


def default_config_path() -> Path:
    return Path(str(resources.files("tbf") / "data" / DEFAULT_CONFIG_NAME))


def read_config(source: str | Path | None = None) -> configparser.ConfigParser:
    """Parse an INI document given as a path, raw text, or ``None`` for the shipped default."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case-sensitive
    if source is None:
        source = default_config_path()
    try:
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "=" not in source):
            path = Path(source)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            cp.read_string(path.read_text(), source=str(path))
        else:
            cp.read_string(source)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    return cp


def _float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None


def _reject_unknown(cp, section: str, allowed) -> None:
    unknown = set(cp[section]) - set(allowed)
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(unknown))}")


def load_system_params(source: str | Path | configparser.ConfigParser | None = None) -> SystemParams:
    """Load and validate the ``[system]`` section of a config document."""
    cp = source if isinstance(source, configparser.ConfigParser) else read_config(source)
    if "system" not in cp:
        raise ConfigError("missing [system] section")
    sec = cp["system"]
    _reject_unknown(cp, "system", _SYSTEM_KEYS)
    kwargs = {}
    for key, (name, scale) in _SYSTEM_KEYS.items():
        if key not in sec:
            if key in _OPTIONAL_SYSTEM_KEYS:
                continue
            raise ConfigError(f"[system] missing key: {key}")
        kwargs[name] = _float("system", key, sec[key]) * scale
    return SystemParams(**kwargs)


def dump_system_params(p: SystemParams) -> str:
    """Render ``p`` as a ``[system]`` INI section (Hz / seconds)."""
    lines = ["[system]"]
    for key, (name, scale) in _SYSTEM_KEYS.items():
        value = getattr(p, name)
        if math.isnan(value):
            continue
        lines.append(f"{key} = {value / scale!r}")
    return "\n".join(lines) + "\n"


# --- LO matching ----------------------------------------------------------

DEFAULT_LO_TOL = 1e-6


@dataclass(frozen=True)
class LoFrequencies:
    omega_c_lo: float
    omega_geef_lo: float
    omega_f0g1_lo: float
    omega_rep: float

    def __post_init__(self):
        for name in ("omega_c_lo", "omega_geef_lo", "omega_f0g1_lo", "omega_rep"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")


def load_lo_frequencies(source: str | Path | configparser.ConfigParser | None = None) -> LoFrequencies:
    cp = source if isinstance(source, configparser.ConfigParser) else read_config(source)
    if "lo" not in cp:
        raise ConfigError("missing [lo] section")
    _reject_unknown(cp, "lo", _LO_KEYS)
    kwargs = {}
    for key, name in _LO_KEYS.items():
        if key not in cp["lo"]:
            raise ConfigError(f"[lo] missing key: {key}")
        kwargs[name] = _float("lo", key, cp["lo"][key]) * TWO_PI
    return LoFrequencies(**kwargs)


def validate_lo_matching(lo: LoFrequencies, tol: float = DEFAULT_LO_TOL) -> int:
    """Return the integer N_r with 2*w_geef - w_c - w_f0g1 = N_r * w_rep.

    Raises :class:`PhaseCoherenceError` when the residual exceeds
    ``tol * omega_rep``.
    """
    # work in units of omega_rep to keep the residual well-conditioned
    combo = (2.0 * lo.omega_geef_lo - lo.omega_c_lo - lo.omega_f0g1_lo) / lo.omega_rep
    n_r = round(combo)
    if abs(combo - n_r) > tol:
        raise PhaseCoherenceError(
            f"phase coherence condition violated: residual {combo - n_r:+.3g} repetition periods"
        )
    return int(n_r)


# --- effective coupling ---------------------------------------------------


def coupling_prefactor(p: SystemParams) -> float:
    """Real factor mapping the cavity drive amplitude to the f0-g1 coupling rate."""
    denom = 4.0 * (p.omega_c - p.omega_ge) ** 3
    if denom == 0.0:
        raise ZeroDivisionError("omega_c == omega_ge: effective coupling is singular")
    return math.sqrt(2.0) * p.alpha * p.g**2 / denom


def effective_coupling(p: SystemParams, drive: SampledWaveform) -> SampledWaveform:
    """Pointwise f0-g1 coupling g_eff(t) for a cavity drive Omega(t) (rad/s).

    The prefactor is negative for a transmon, so the coupling phase equals the
    drive phase plus pi.
    """
    return drive.with_samples(coupling_prefactor(p) * np.asarray(drive.samples, dtype=complex))


def drive_for_coupling(p: SystemParams, g_eff: SampledWaveform) -> SampledWaveform:
    """Inverse of :func:`effective_coupling`."""
    return g_eff.with_samples(np.asarray(g_eff.samples, dtype=complex) / coupling_prefactor(p))
