"""Iterative maximum-likelihood reconstruction on binned quadrature data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from ..fock import FockState
from .povm import PovmSet, bin_integrals, phase_factors
from .settings import QuadratureDataset

P_FLOOR = 1e-12
MONOTONE_TOL = 1e-9


class MonotonicityError(RuntimeError):
    pass


@dataclass
class MleResult:
    state: FockState
    iterations: int
    loglik: float
    trace: list = field(default_factory=list)
    floored_bins: int = 0
    converged: bool = False
    dilutions: int = 0

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "loglik_per_sample": self.loglik,
            "loglik_trace": self.trace,
            "floored_bins": self.floored_bins,
            "converged": self.converged,
            "dilutions": self.dilutions,
        }


class _Model:
    """Probabilities and R-operator restricted to occupied bins.

    The late-mode POVM factors are real bin integrals times a per-setting
    phase, so joint-bin contractions reduce to gathers against the real
    integral table plus one sparse product.
    """

    def __init__(self, povm: PovmSet, counts: np.ndarray):
        self.k = povm.modes
        self.d = povm.cutoff + 1
        self.S, self.B = povm.n_settings, povm.n_bins
        d2 = self.d * self.d
        self.A = np.ascontiguousarray(povm.factors[0]).reshape(self.S * self.B, d2)  # [(s,a), (n,p)]
        counts = np.asarray(counts)
        if self.k == 1:
            flat = counts.reshape(-1)
            self.occ = np.flatnonzero(flat)
            self.f = flat[self.occ].astype(float)
            self.A_occ = self.A[self.occ]
        elif self.k == 2:
            self.G = np.ascontiguousarray(bin_integrals(povm.edges, self.d).reshape(self.B, d2))
            ph = phase_factors(povm.phases[:, 1], self.d)
            self.ph = ph.reshape(self.S, d2)  # [s, (m,q)]
            self.ph_t = ph.transpose(0, 2, 1).reshape(self.S, d2)  # [s, (q,m)]
            c2 = counts.reshape(self.S * self.B, self.B)
            rows, cols = np.nonzero(c2)  # row-major, i.e. CSR order
            self.rows, self.cols = rows, cols
            self.f = c2[rows, cols].astype(float)
            self.indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=self.S * self.B))])
            self.G_occ = self.G[cols]
        else:
            raise NotImplementedError("MLE supports one or two modes")
        self.total = self.f.sum()

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        """Model probabilities of the occupied bins."""
        d = self.d
        if self.k == 1:
            # tr[A rho] = sum_{n,p} A_np rho_pn
            return np.real(self.A_occ @ rho.T.ravel())
        r = rho.reshape(d, d, d, d)
        m = r.transpose(2, 0, 1, 3).reshape(d * d, d * d)  # [(n,p), (q,m)]
        x = (self.A @ m).reshape(self.S, self.B, d * d) * self.ph_t[:, None, :]
        x = np.ascontiguousarray(x.real).reshape(self.S * self.B, d * d)
        return np.einsum("ik,ik->i", x[self.rows], self.G_occ)

    def r_operator(self, w: np.ndarray) -> np.ndarray:
        d = self.d
        if self.k == 1:
            return (w @ self.A_occ).reshape(d, d)
        wm = csr_matrix((w, self.cols, self.indptr), shape=(self.S * self.B, self.B))
        y = np.asarray(wm @ self.G).reshape(self.S, self.B, d * d)
        y = (y * self.ph[:, None, :]).reshape(self.S * self.B, d * d)  # [(s,a), (m,q)]
        r4 = (self.A.T @ y).reshape(d, d, d, d)  # [n, p, m, q]
        return r4.transpose(0, 2, 1, 3).reshape(d * d, d * d)

    def loglik(self, p: np.ndarray) -> tuple[float, int]:
        floored = int(np.count_nonzero(p < P_FLOOR))
        return float(self.f @ np.log(np.maximum(p, P_FLOOR)) / self.total), floored


def _normalise(m: np.ndarray) -> np.ndarray:
    m = 0.5 * (m + m.conj().T)
    return m / np.real(np.trace(m))


def mle_from_counts(
    counts: np.ndarray,
    povm: PovmSet,
    max_iter: int = 2000,
    tol: float = 1e-10,
    rho0: np.ndarray | None = None,
    check: bool = True,
) -> MleResult:
    """RrhoR iteration on histogram ``counts`` of shape ``(S, B ** modes)``.

    Every accepted step is checked not to lower the per-sample likelihood; if
    the plain step would, the diluted map ``(1 + eps R) rho (1 + eps R)`` with
    halving ``eps`` is used instead, which is monotone for small ``eps``.
    """
    model = _Model(povm, np.asarray(counts))
    if model.total <= 0:
        raise ValueError("no counts to reconstruct from")
    dim = povm.dim
    rho = np.eye(dim, dtype=complex) / dim if rho0 is None else _normalise(np.asarray(rho0, dtype=complex))
    p = model.probabilities(rho)
    ll, floored = model.loglik(p)
    trace = [ll]
    eye = np.eye(dim)
    dilutions = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = model.f / np.maximum(p, P_FLOOR) / model.total
        r = model.r_operator(w)
        new = _normalise(r @ rho @ r)
        p_new = model.probabilities(new)
        ll_new, fl_new = model.loglik(p_new)
        eps = 1.0
        while ll_new < ll - MONOTONE_TOL and eps > 1e-8:
            dilutions += 1
            g = eye + eps * r
            new = _normalise(g @ rho @ g)
            p_new = model.probabilities(new)
            ll_new, fl_new = model.loglik(p_new)
            eps *= 0.5
        if check and ll_new < ll - MONOTONE_TOL:
            raise MonotonicityError(f"log-likelihood fell from {ll} to {ll_new} at iteration {it}")
        gain = ll_new - ll
        rho, p, ll, floored = new, p_new, ll_new, fl_new
        trace.append(ll)
        if gain < tol:
            converged = True
            break
    state = FockState._wrap(rho, (povm.cutoff + 1,) * povm.modes, validate=check)
    return MleResult(state, it, ll, trace, floored, converged, dilutions)


def mle_reconstruct(data: QuadratureDataset, povm: PovmSet, config: dict | None = None, rho0=None) -> MleResult:
    """Reconstruct the measured (lossy) state from a quadrature dataset.

    ``config`` may set ``max_iter`` and ``tol``.
    """
    cfg = {"max_iter": 2000, "tol": 1e-10}
    cfg.update(config or {})
    if data.phases.shape != povm.phases.shape or not np.allclose(data.phases, povm.phases):
        raise ValueError("dataset settings do not match the POVM")
    counts = data.counts(povm.edges)
    if counts.sum() == 0:
        raise ValueError("dataset holds no samples")
    return mle_from_counts(counts, povm, cfg["max_iter"], cfg["tol"], rho0=rho0)
