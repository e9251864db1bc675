"""Phase-selective quadrature sampling from exact marginals."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..fock import FockState, hermite_functions, loss_channel
from .settings import TWO_PI, MeasurementSettings, QuadratureDataset

TABLE_POINTS = 4096
DRIFT_MODES = ("none", "per-shot-uniform")


def _q_range(d: int) -> float:
    return float(np.sqrt(2 * d + 1) + 6.0)


def _inverse_cdf(q: np.ndarray, density: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = cumulative_trapezoid(np.clip(density, 0, None), q, initial=0.0)
    cdf /= cdf[-1]
    return np.interp(u, cdf, q)


@lru_cache(maxsize=16)
def _fock_tables(d: int, points: int = TABLE_POINTS):
    """Grid and per-level CDFs of ``|psi_n|^2`` for the rejection proposal."""
    L = _q_range(d)
    q = np.linspace(-L, L, points)
    psi2 = hermite_functions(d - 1, q) ** 2
    cdfs = cumulative_trapezoid(psi2, q, initial=0.0, axis=1)
    cdfs /= cdfs[:, -1:]
    return q, cdfs


def _table_sample(rho: np.ndarray, phi: float, u: np.ndarray, points: int = TABLE_POINTS) -> np.ndarray:
    """Inverse-CDF draw from the single-mode marginal of ``rho`` at ``phi``."""
    d = rho.shape[0]
    L = _q_range(d)
    q = np.linspace(-L, L, points)
    psi = hermite_functions(d - 1, q)
    n = np.arange(d)
    ph = np.exp(1j * (n[None, :] - n[:, None]) * phi)
    dens = np.real(np.einsum("nm,nq,mq->q", rho * ph, psi, psi))
    return _inverse_cdf(q, dens, u)


def _rejection_sample(sigma: np.ndarray, phi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per shot from ``w^dag sigma w / tr sigma`` with ``w_n = psi_n(q) e^{i n phi}``.

    ``sigma`` is ``(d, d)`` or per-shot ``(N, d, d)``. The proposal mixes the
    Fock densities ``|psi_n|^2`` with equal weight; since ``w^dag sigma w <=
    tr(sigma) |w|^2`` the acceptance ratio is at most one.
    """
    phi = np.asarray(phi, dtype=float)
    n_shots = phi.size
    d = sigma.shape[-1]
    shared = sigma.ndim == 2
    tr = np.real(np.trace(sigma, axis1=-2, axis2=-1))
    grid, cdfs = _fock_tables(d)
    out = np.empty(n_shots)
    todo = np.arange(n_shots)
    levels = np.arange(d)
    while todo.size:
        comp = rng.integers(0, d, size=todo.size)
        u = rng.random(todo.size)
        q = np.empty(todo.size)
        for k in range(d):
            sel = comp == k
            if np.any(sel):
                q[sel] = np.interp(u[sel], cdfs[k], grid)
        psi = hermite_functions(d - 1, q).T  # (n, d)
        w = psi * np.exp(1j * np.outer(phi[todo], levels))
        if shared:
            num = np.real(np.einsum("in,nm,im->i", w.conj(), sigma, w))
            den = tr * np.sum(psi**2, axis=1)
        else:
            s = sigma[todo]
            num = np.real(np.einsum("in,inm,im->i", w.conj(), s, w))
            den = tr[todo] * np.sum(psi**2, axis=1)
        accept = rng.random(todo.size) * den <= num
        out[todo[accept]] = q[accept]
        todo = todo[~accept]
    return out


def _conditional(r: np.ndarray, q_e: np.ndarray, phi_e: np.ndarray) -> np.ndarray:
    """Unnormalised late-mode state after observing ``q_e`` on the early mode, per shot."""
    d = r.shape[0]
    u = hermite_functions(d - 1, q_e).T * np.exp(1j * np.outer(phi_e, np.arange(d)))
    return np.einsum("in,nmpq,ip->imq", u.conj(), r, u, optimize=True)


def sample_setting(rho: FockState, phases, n: int, rng: np.random.Generator, drift: str = "none") -> np.ndarray:
    """``n`` shots at one setting; returns shape ``(n, modes)``."""
    phases = np.atleast_1d(np.asarray(phases, float))
    if drift not in DRIFT_MODES:
        raise ValueError(f"unknown drift mode {drift!r}")
    if drift == "per-shot-uniform":
        theta = rng.uniform(0, TWO_PI, n)
        # exp(i theta n) before the measurement at phi equals measuring at phi - theta
        eff = phases[None, :] - theta[:, None]
    else:
        eff = np.broadcast_to(phases, (n, phases.size))
    if rho.modes == 1:
        m = rho.matrix
        if drift == "none":
            return _table_sample(m, phases[0], rng.random(n))[:, None]
        return _rejection_sample(m, eff[:, 0], rng)[:, None]
    if rho.modes != 2:
        raise NotImplementedError("sampling is implemented for one and two modes")
    rho_e = rho.reduced(0).matrix
    if drift == "none":
        q_e = _table_sample(rho_e, phases[0], rng.random(n))
    else:
        q_e = _rejection_sample(rho_e, eff[:, 0], rng)
    sigma = _conditional(rho.tensor(), q_e, eff[:, 0])
    q_l = _rejection_sample(sigma, eff[:, 1], rng)
    return np.stack([q_e, q_l], axis=1)


def sample_quadratures(state: FockState, settings: MeasurementSettings, drift: str = "none", label: str | None = None) -> QuadratureDataset:
    """Apply measurement loss, then draw ``settings.samples`` shots per setting.

    Setting ``s`` uses the generator seeded with ``(settings.seed, s)`` so the
    result does not depend on evaluation order.
    """
    if not 0 < settings.eta <= 1:
        raise ValueError(f"invalid measurement efficiency {settings.eta}")
    if state.modes != settings.modes:
        raise ValueError(f"state has {state.modes} mode(s), settings have {settings.modes}")
    rho = loss_channel(state, settings.eta) if settings.eta < 1 else state
    out = np.empty((settings.n_settings, settings.samples, settings.modes))
    for s in range(settings.n_settings):
        rng = np.random.default_rng([settings.seed, s])
        out[s] = sample_setting(rho, settings.phases[s], settings.samples, rng, drift)
    meta = {"seed": settings.seed, "eta": settings.eta, "drift": drift, "state": label or repr(state)}
    return QuadratureDataset(settings.phases, out, meta)
