"""Measurement settings and quadrature datasets."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TWO_PI = 2 * np.pi
MODE_LABELS = ("E", "L")


def default_edges(n_bins: int = 50, q_max: float = 5.0) -> np.ndarray:
    """Finite bin edges; the two half-lines outside them are overflow bins."""
    return np.linspace(-q_max, q_max, n_bins + 1)


def phase_grid(n: int = 12) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


@dataclass(frozen=True)
class MeasurementSettings:
    """Quadrature phases per setting, shot budget, efficiency and binning.

    ``phases`` has shape ``(n_settings, n_modes)``.
    """

    phases: np.ndarray
    samples: int = 10_000
    eta: float = 1.0
    edges: np.ndarray = field(default_factory=default_edges)
    seed: int = 0

    def __post_init__(self):
        ph = np.atleast_2d(np.asarray(self.phases, dtype=float))
        if ph.ndim != 2 or ph.shape[1] not in (1, 2):
            raise ValueError("phases must have shape (n_settings, 1 or 2)")
        if np.any(ph < 0) or np.any(ph >= TWO_PI):
            raise ValueError("phases must lie in [0, 2 pi)")
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if not 0 < self.eta <= 1:
            raise ValueError(f"invalid measurement efficiency {self.eta}")
        if int(self.samples) < 1:
            raise ValueError("samples per setting must be positive")
        ph.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "samples", int(self.samples))

    @classmethod
    def grid(cls, n_phases: int = 12, modes: int = 1, **kw) -> "MeasurementSettings":
        """All ``n_phases ** modes`` phase combinations, first mode slowest."""
        g = phase_grid(n_phases)
        mesh = np.meshgrid(*([g] * modes), indexing="ij")
        return cls(np.stack([m.ravel() for m in mesh], axis=1), **kw)

    @property
    def n_settings(self) -> int:
        return self.phases.shape[0]

    @property
    def modes(self) -> int:
        return self.phases.shape[1]

    @property
    def n_bins(self) -> int:
        return self.edges.size + 1

    def replace(self, **kw) -> "MeasurementSettings":
        d = dict(phases=self.phases, samples=self.samples, eta=self.eta, edges=self.edges, seed=self.seed)
        d.update(kw)
        return MeasurementSettings(**d)


def bin_index(q: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """0 for q < edges[0], len(edges) for q >= edges[-1]."""
    return np.searchsorted(edges, q, side="right")


@dataclass
class QuadratureDataset:
    """Sampled quadratures, ``samples[s, shot, mode]`` at ``phases[s, mode]``."""

    phases: np.ndarray
    samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phases = np.atleast_2d(np.asarray(self.phases, dtype=float))
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim == 2:
            self.samples = self.samples[..., None]
        if self.samples.shape[0] != self.phases.shape[0] or self.samples.shape[2] != self.phases.shape[1]:
            raise ValueError("samples and phases disagree on settings or modes")

    @property
    def n_settings(self) -> int:
        return self.phases.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def modes(self) -> int:
        return self.phases.shape[1]

    def counts(self, edges) -> np.ndarray:
        """Histogram per setting, shape ``(S, B ** modes)``; joint bin ``b_E * B + b_L``."""
        edges = np.asarray(edges)
        nb = edges.size + 1
        idx = bin_index(self.samples, edges)
        flat = idx[..., 0]
        for k in range(1, self.modes):
            flat = flat * nb + idx[..., k]
        size = nb**self.modes
        return np.stack([np.bincount(row, minlength=size) for row in flat])

    def resample(self, rng: np.random.Generator) -> "QuadratureDataset":
        """Shots drawn with replacement within every setting."""
        s, n = self.samples.shape[:2]
        pick = rng.integers(0, n, size=(s, n))
        return QuadratureDataset(self.phases, np.take_along_axis(self.samples, pick[..., None], axis=1), dict(self.metadata))

    def pooled(self, mode: int = 0) -> np.ndarray:
        return self.samples[..., mode].ravel()

    # -- io
    def save(self, path) -> Path:
        """CSV of shots plus a JSON header sidecar (``<path>.json``)."""
        path = Path(path)
        names = MODE_LABELS[: self.modes]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["setting_index"] + [f"phi_{m}" for m in names] + [f"q_{m}" for m in names])
            for s in range(self.n_settings):
                ph = [repr(float(x)) for x in self.phases[s]]
                for row in self.samples[s]:
                    w.writerow([s] + ph + [repr(float(x)) for x in row])
        header = dict(self.metadata, n_settings=self.n_settings, n_samples=self.n_samples, modes=self.modes)
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(header, indent=1, default=str) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "QuadratureDataset":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        k, s_n, n = meta["modes"], meta["n_settings"], meta["n_samples"]
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        raw = raw.reshape(s_n, n, 1 + 2 * k)
        phases = raw[:, 0, 1 : 1 + k]
        samples = raw[:, :, 1 + k :]
        for key in ("n_settings", "n_samples", "modes"):
            meta.pop(key)
        return cls(phases, samples, meta)
