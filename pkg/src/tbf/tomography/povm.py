"""Binned quadrature POVMs in the truncated Fock basis."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from ..fock import hermite_functions
from .settings import MeasurementSettings


@lru_cache(maxsize=32)
def _bin_integrals_cached(edges: tuple, d: int) -> np.ndarray:
    lims = (-np.inf,) + edges + (np.inf,)
    out = np.empty((len(lims) - 1, d, d))
    for b in range(len(lims) - 1):
        lo, hi = lims[b], lims[b + 1]
        for n in range(d):
            for m in range(n + 1):
                f = lambda q, n=n, m=m: float(np.prod(hermite_functions(max(n, m), q)[[n, m]]))
                val = quad(f, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
                out[b, n, m] = out[b, m, n] = val
    out.setflags(write=False)
    return out


def bin_integrals(edges, d: int) -> np.ndarray:
    """``G[b, n, m] = int_bin psi_n psi_m dq`` for all bins including the two overflow bins."""
    return _bin_integrals_cached(tuple(float(e) for e in edges), int(d))


def phase_factors(phi, d: int) -> np.ndarray:
    """``exp(i (n - m) phi)``; shape ``phi.shape + (d, d)``."""
    n = np.arange(d)
    return np.exp(1j * np.multiply.outer(np.asarray(phi, float), n[:, None] - n[None, :]))


@dataclass(frozen=True)
class PovmSet:
    """Separable binned POVM.

    ``factors[k][s, b]`` is the single-mode operator of mode ``k`` for bin ``b``
    at setting ``s``; the joint element is the tensor product over modes.
    """

    phases: np.ndarray
    edges: np.ndarray
    cutoff: int
    factors: tuple

    @property
    def modes(self) -> int:
        return self.phases.shape[1]

    @property
    def n_settings(self) -> int:
        return self.phases.shape[0]

    @property
    def n_bins(self) -> int:
        return self.edges.size + 1

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.modes

    def element(self, setting: int, bins) -> np.ndarray:
        bins = np.atleast_1d(bins)
        op = np.ones((1, 1), dtype=complex)
        for k, b in enumerate(bins):
            op = np.kron(op, self.factors[k][setting, b])
        return op

    def completeness_residual(self) -> float:
        """Max deviation of the per-setting bin sum (overflow included) from identity."""
        d = self.cutoff + 1
        worst = 0.0
        for f in self.factors:
            tot = f.sum(axis=1)
            worst = max(worst, float(np.max(np.abs(tot - np.eye(d)))))
        return worst

    def truncation_residual(self) -> float:
        """Deviation from identity using only the finite bins (mass outside the edges)."""
        d = self.cutoff + 1
        worst = 0.0
        for f in self.factors:
            tot = f[:, 1:-1].sum(axis=1)
            worst = max(worst, float(np.max(np.abs(tot - np.eye(d)))))
        return worst


def build_povm(settings: MeasurementSettings, cutoff: int = 3) -> PovmSet:
    d = cutoff + 1
    g = bin_integrals(settings.edges, d)
    factors = []
    for k in range(settings.modes):
        ph = phase_factors(settings.phases[:, k], d)  # (S, d, d)
        f = g[None, :, :, :] * ph[:, None, :, :]
        f.setflags(write=False)
        factors.append(f)
    return PovmSet(settings.phases, settings.edges, cutoff, tuple(factors))
