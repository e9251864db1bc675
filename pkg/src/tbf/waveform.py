"""Complex envelopes sampled on a uniform time grid."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SampledWaveform:
    """Samples ``samples[k]`` taken at ``t0 + k * dt``.

    Units depend on the role: rad/s for drives and couplings, dimensionless for
    normalised envelopes.
    """

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("waveform needs at least one sample")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.samples.size - 1)

    def with_samples(self, samples) -> "SampledWaveform":
        samples = np.asarray(samples, dtype=complex)
        if samples.shape != self.samples.shape:
            raise GridMismatchError("sample count changed")
        return SampledWaveform(self.t0, self.dt, samples)

    def same_grid(self, other: "SampledWaveform") -> bool:
        return self.t0 == other.t0 and self.dt == other.dt and len(self) == len(other)

    def _check(self, other):
        if not self.same_grid(other):
            raise GridMismatchError("waveforms live on different grids")

    def __add__(self, other):
        if isinstance(other, SampledWaveform):
            self._check(other)
            return self.with_samples(self.samples + other.samples)
        return self.with_samples(self.samples + other)

    def __sub__(self, other):
        if isinstance(other, SampledWaveform):
            self._check(other)
            return self.with_samples(self.samples - other.samples)
        return self.with_samples(self.samples - other)

    def __mul__(self, other):
        if isinstance(other, SampledWaveform):
            self._check(other)
            return self.with_samples(self.samples * other.samples)
        return self.with_samples(self.samples * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_samples(-self.samples)

    def energy(self) -> float:
        """Trapezoidal integral of ``|samples|**2`` over the grid."""
        return float(np.trapezoid(np.abs(self.samples) ** 2, dx=self.dt))

    def at(self, t) -> np.ndarray:
        """Linear interpolation; zero outside the sampled window."""
        t = np.asarray(t, dtype=float)
        x = (t - self.t0) / self.dt
        n = self.samples.size
        out = np.zeros(t.shape, dtype=complex)
        inside = (x >= -1e-9) & (x <= n - 1 + 1e-9)
        xi = np.clip(x[inside], 0, n - 1)
        k = np.minimum(np.floor(xi).astype(int), n - 2) if n > 1 else np.zeros(xi.shape, int)
        frac = xi - k
        if n == 1:
            out[inside] = self.samples[0]
        else:
            out[inside] = self.samples[k] * (1 - frac) + self.samples[k + 1] * frac
        return out


def zeros(t0: float, dt: float, n: int) -> SampledWaveform:
    return SampledWaveform(t0, dt, np.zeros(n, dtype=complex))


def time_grid(t0: float, t1: float, dt: float) -> tuple[float, float, int]:
    """(t0, dt, n) for a grid that starts at t0 and reaches at least t1."""
    n = int(np.ceil((t1 - t0) / dt - 1e-9)) + 1
    return t0, dt, n


# --- export ---------------------------------------------------------------

_FMT = "{:.17g}"


def save_waveform(wf: SampledWaveform, path: str | Path, spec: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>`` as CSV (t_s, re, im) and ``<path>.json`` carrying the grid and ``spec``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "re", "im"])
        for t, s in zip(wf.times, wf.samples):
            w.writerow([_FMT.format(t), _FMT.format(s.real), _FMT.format(s.imag)])
    side = path.with_name(path.name + ".json")
    meta = {"t0": _FMT.format(wf.t0), "dt": _FMT.format(wf.dt), "n": len(wf), "spec": spec or {}}
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, side


def load_waveform(path: str | Path) -> tuple[SampledWaveform, dict]:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    samples = np.array([complex(float(r[1]), float(r[2])) for r in rows])
    wf = SampledWaveform(float(meta["t0"]), float(meta["dt"]), samples)
    if len(wf) != meta["n"]:
        raise ValueError("sidecar sample count does not match CSV")
    return wf, meta["spec"]
