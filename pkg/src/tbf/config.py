"""Experiment-level configuration: pulse, run and tomography sections."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace
from pathlib import Path

from tbf.pulses import CouplingPulseSpec
from tbf.system import (
    TWO_PI,
    ConfigError,
    LoFrequencies,
    SystemParams,
    load_lo_frequencies,
    load_system_params,
    read_config,
    default_config_path,
    validate_lo_matching,
)

FULL_SCALE_SAMPLES = 10_000
FULL_SCALE_BOOTSTRAP = 250

_PULSE_KEYS = {
    "coupling_width_s": 1.0,
    "peak_geff_hz": TWO_PI,
    "chirp_coeff_hz": TWO_PI,
    "stark_coeff_hz": TWO_PI,
    "phase_offset_rad": 1.0,
    "bin_separation_s": 1.0,
    "window_s": 1.0,
    "dt_s": 1.0,
}
_TOMO_INT = {"n_phases", "samples_two_mode", "samples_single_mode", "cutoff", "bootstrap_two_mode", "bootstrap_single_mode"}
_TOMO_FLOAT = {"eta_meas"}


@dataclass(frozen=True)
class PulseConfig:
    coupling: CouplingPulseSpec
    stark_coeff: float
    bin_separation: float
    window: float
    dt: float


@dataclass(frozen=True)
class TomographyConfig:
    n_phases: int = 12
    samples_two_mode: int = 1000
    samples_single_mode: int = 10_000
    eta_meas: float = 1.0
    cutoff: int = 3
    bootstrap_two_mode: int = 10
    bootstrap_single_mode: int = 50

    def paper_scale(self) -> "TomographyConfig":
        return replace(
            self,
            samples_two_mode=FULL_SCALE_SAMPLES,
            samples_single_mode=FULL_SCALE_SAMPLES,
            bootstrap_two_mode=FULL_SCALE_BOOTSTRAP,
            bootstrap_single_mode=FULL_SCALE_BOOTSTRAP,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemParams
    lo: LoFrequencies
    n_r: int
    pulse: PulseConfig
    tomography: TomographyConfig
    seed: int
    source_text: str


def _section(cp, name):
    return cp[name] if name in cp else {}


def _num(section, key, raw, kind=float):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a valid {kind.__name__}: {raw!r}") from None


def load_pulse_config(cp: configparser.ConfigParser) -> PulseConfig:
    sec = _section(cp, "pulse")
    unknown = set(sec) - set(_PULSE_KEYS)
    if unknown:
        raise ConfigError(f"[pulse] unknown key(s): {', '.join(sorted(unknown))}")
    base = CouplingPulseSpec()
    v = {k: _num("pulse", k, sec[k]) * s for k, s in _PULSE_KEYS.items() if k in sec}
    coupling = CouplingPulseSpec(
        width=v.get("coupling_width_s", base.width),
        peak_geff=v.get("peak_geff_hz", base.peak_geff),
        chirp_coeff=v.get("chirp_coeff_hz", base.chirp_coeff),
        phase_offset=v.get("phase_offset_rad", base.phase_offset),
    )
    out = PulseConfig(
        coupling=coupling,
        stark_coeff=v.get("stark_coeff_hz", -coupling.chirp_coeff),
        bin_separation=v.get("bin_separation_s", 0.95e-6),
        window=v.get("window_s", 0.95e-6),
        dt=v.get("dt_s", 0.1e-9),
    )
    for name in ("bin_separation", "window", "dt"):
        if not getattr(out, name) > 0:
            raise ConfigError(f"[pulse] {name} must be positive")
    if coupling.width > out.bin_separation:
        raise ConfigError("[pulse] coupling pulse longer than the bin separation")
    return out


def load_tomography_config(cp: configparser.ConfigParser) -> TomographyConfig:
    sec = _section(cp, "tomography")
    unknown = set(sec) - _TOMO_INT - _TOMO_FLOAT
    if unknown:
        raise ConfigError(f"[tomography] unknown key(s): {', '.join(sorted(unknown))}")
    kw = {k: _num("tomography", k, sec[k], int) for k in _TOMO_INT if k in sec}
    kw.update({k: _num("tomography", k, sec[k]) for k in _TOMO_FLOAT if k in sec})
    t = TomographyConfig(**kw)
    if not 0 < t.eta_meas <= 1:
        raise ConfigError("[tomography] eta_meas must lie in (0, 1]")
    if t.cutoff < 1 or t.n_phases < 1 or t.samples_two_mode < 1 or t.samples_single_mode < 1:
        raise ConfigError("[tomography] counts must be positive")
    return t


def resolve_seed(cp: configparser.ConfigParser, override: int | None = None) -> int:
    """Command-line value, then ``TBF_SEED``, then ``[run] seed``, then 0."""
    if override is not None:
        return int(override)
    env = os.environ.get("TBF_SEED")
    if env not in (None, ""):
        return _num("env", "TBF_SEED", env, int)
    sec = _section(cp, "run")
    unknown = set(sec) - {"seed"}
    if unknown:
        raise ConfigError(f"[run] unknown key(s): {', '.join(sorted(unknown))}")
    return _num("run", "seed", sec["seed"], int) if "seed" in sec else 0


def load_experiment_config(source: str | Path | None = None, seed: int | None = None) -> ExperimentConfig:
    cp = read_config(source)
    if source is None:
        text = default_config_path().read_text()
    elif isinstance(source, Path) or "\n" not in str(source):
        text = Path(source).read_text()
    else:
        text = str(source)
    lo = load_lo_frequencies(cp)
    return ExperimentConfig(
        system=load_system_params(cp),
        lo=lo,
        n_r=validate_lo_matching(lo),
        pulse=load_pulse_config(cp),
        tomography=load_tomography_config(cp),
        seed=resolve_seed(cp, seed),
        source_text=text,
    )
