"""Truncated photon-number states of one or more temporal modes.

Multi-mode basis order is row-major: ``|00>, |01>, ..., |0n>, |10>, ...`` with
the first index the early (E) mode and the second the late (L) mode.

Quadratures follow ``q_phi = (a e^{-i phi} + a^dag e^{i phi}) / sqrt(2)``,
i.e. ``[q, p] = i`` and vacuum variance 1/2.
"""

from __future__ import annotations

import json
import math
import warnings
from pathlib import Path

import numpy as np
from scipy.special import comb, eval_genlaguerre, gammaln

DEFAULT_CUTOFF = 3

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-9


class StateError(ValueError):
    pass


class FockState:
    """Density matrix over ``len(dims)`` modes, each truncated at ``dims[i] - 1`` photons."""

    n_modes: int | None = None

    def __init__(self, matrix, dims=None, validate: bool = True):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateError("density matrix must be square")
        if dims is None:
            k = self.n_modes or 1
            d = round(m.shape[0] ** (1 / k))
            dims = (d,) * k
        dims = tuple(int(d) for d in dims)
        if self.n_modes is not None and len(dims) != self.n_modes:
            raise StateError(f"{type(self).__name__} needs {self.n_modes} mode(s)")
        if math.prod(dims) != m.shape[0]:
            raise StateError(f"dims {dims} do not match matrix size {m.shape[0]}")
        self.matrix = m
        self.dims = dims
        self.matrix.setflags(write=False)
        if validate:
            self.validate()

    # -- construction helpers
    @classmethod
    def _wrap(cls, matrix, dims, validate=False):
        if len(dims) == 1:
            return FockDensityMatrix(matrix, dims, validate=validate)
        if len(dims) == 2:
            return TwoModeDensityMatrix(matrix, dims, validate=validate)
        return FockState(matrix, dims, validate=validate)

    def like(self, matrix, validate=False):
        return self._wrap(matrix, self.dims, validate)

    # -- properties
    @property
    def cutoff(self) -> int:
        return self.dims[0] - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def modes(self) -> int:
        return len(self.dims)

    def tensor(self) -> np.ndarray:
        return self.matrix.reshape(self.dims + self.dims)

    def validate(self, herm_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, psd_tol=PSD_TOL) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T), initial=0) > herm_tol:
            raise StateError("density matrix not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1) > trace_tol:
            raise StateError(f"trace {tr.real:.12g} != 1")
        lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if lam.min() < -psd_tol:
            raise StateError(f"negative eigenvalue {lam.min():.3g}")

    def photon_numbers(self) -> np.ndarray:
        """Per-basis-state photon counts, shape ``(dim, modes)``."""
        grids = np.meshgrid(*[np.arange(d) for d in self.dims], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).reshape(self.dims)

    def reduced(self, mode: int) -> "FockDensityMatrix":
        t = self.tensor()
        k = self.modes
        letters = "abcdefghij"
        row = list(letters[:k])
        col = list(letters[:k])
        col[mode] = "z"
        sub = "".join(row) + "".join(col) + "->" + row[mode] + "z"
        return FockDensityMatrix(np.einsum(sub, t), (self.dims[mode],), validate=False)

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.dims})"


class FockDensityMatrix(FockState):
    n_modes = 1


class TwoModeDensityMatrix(FockState):
    n_modes = 2


def as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, FockState) else np.asarray(rho, dtype=complex)


# --- states ---------------------------------------------------------------


def pure_state(amplitudes, dims=None) -> FockState:
    """``|psi><psi|`` from Fock amplitudes.

    A 1-D array is a single mode; an ``(n, m)`` array holds two-mode
    coefficients ``C[n, m]`` of ``|n>_E |m>_L``. Amplitudes off unit norm by
    more than 1e-8 are renormalised with a warning.
    """
    a = np.asarray(amplitudes, dtype=complex)
    if dims is None:
        dims = a.shape
    v = a.ravel()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise StateError("all-zero amplitude vector")
    if abs(norm - 1) > 1e-8:
        warnings.warn(f"amplitudes renormalised (norm {norm:.6g})", stacklevel=2)
    v = v / norm
    return FockState._wrap(np.outer(v, v.conj()), tuple(dims), validate=True)


def fock(n: int, cutoff: int = DEFAULT_CUTOFF) -> FockDensityMatrix:
    v = np.zeros(cutoff + 1)
    v[n] = 1
    return pure_state(v)


def single_rail_amplitudes(alpha_q: complex, beta_q: complex, cutoff: int = DEFAULT_CUTOFF) -> np.ndarray:
    """alpha|0> + beta|1> on one mode."""
    v = np.zeros(cutoff + 1, dtype=complex)
    v[0], v[1] = alpha_q, beta_q
    return v


def timebin_amplitudes(alpha_q: complex, beta_q: complex, cutoff: int = DEFAULT_CUTOFF) -> np.ndarray:
    """Two-mode coefficients for alpha|01> + beta|10>, i.e. alpha|L> + beta|E>."""
    c = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    c[0, 1], c[1, 0] = alpha_q, beta_q
    return c


# --- channels -------------------------------------------------------------


def loss_kraus(eta: float, d: int) -> list[np.ndarray]:
    """Kraus operators of the pure-loss channel with transmissivity ``eta``."""
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    ops = []
    for k in range(d):
        e = np.zeros((d, d))
        for n in range(k, d):
            e[n - k, n] = math.sqrt(comb(n, k, exact=True) * eta ** (n - k) * (1 - eta) ** k)
        ops.append(e)
    return ops


def _apply_local(t: np.ndarray, ops, mode: int, k: int) -> np.ndarray:
    """Sum_j E_j rho E_j^dag on one mode of a (dims + dims) tensor."""
    out = np.zeros_like(t)
    for e in ops:
        x = np.moveaxis(np.tensordot(e, t, axes=([1], [mode])), 0, mode)
        x = np.moveaxis(np.tensordot(x, e.conj(), axes=([k + mode], [1])), -1, k + mode)
        out += x
    return out


def loss_channel(rho: FockState, eta) -> FockState:
    """Independent pure loss on every mode; ``eta`` is a scalar or one value per mode."""
    etas = np.broadcast_to(np.asarray(eta, dtype=float), (rho.modes,))
    t = rho.tensor()
    for mode, e in enumerate(etas):
        if e == 1:
            continue
        t = _apply_local(t, loss_kraus(float(e), rho.dims[mode]), mode, rho.modes)
    return rho.like(t.reshape(rho.dim, rho.dim))


def phase_drift_channel(rho: FockState, modes=None, thetas=None, weights=None) -> FockState:
    """Average over a common phase ``exp(i theta n)`` applied to every listed mode.

    With ``thetas=None`` theta is uniform on [0, 2 pi) and only coherences
    between equal total photon numbers (over ``modes``) survive. Otherwise
    ``thetas`` / ``weights`` give a discrete distribution.
    """
    modes = range(rho.modes) if modes is None else list(modes)
    n_tot = rho.photon_numbers()[:, list(modes)].sum(axis=1)
    diff = n_tot[:, None] - n_tot[None, :]
    if thetas is None:
        factor = (diff == 0).astype(float)
    else:
        th = np.atleast_1d(np.asarray(thetas, dtype=float))
        w = np.full(th.size, 1 / th.size) if weights is None else np.asarray(weights, float) / np.sum(weights)
        factor = np.tensordot(w, np.exp(1j * th[:, None, None] * diff[None]), axes=1)
    return rho.like(rho.matrix * factor)


def rotate(rho: FockState, theta, modes=None) -> FockState:
    """Apply ``exp(i theta n)`` on the listed modes (same theta on each)."""
    modes = range(rho.modes) if modes is None else list(modes)
    n_tot = rho.photon_numbers()[:, list(modes)].sum(axis=1)
    ph = np.exp(1j * theta * n_tot)
    return rho.like(ph[:, None] * rho.matrix * ph.conj()[None, :])


# --- quadratures ----------------------------------------------------------


def hermite_functions(n_max: int, q) -> np.ndarray:
    """Oscillator eigenfunctions ``psi_0 .. psi_n_max`` at ``q``; shape ``(n_max + 1,) + q.shape``.

    Upward recurrence, stable for large n.
    """
    q = np.asarray(q, dtype=float)
    out = np.empty((n_max + 1,) + q.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * q**2)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * q * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * q * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def quadrature_marginal(rho, phi: float, q) -> np.ndarray:
    """Probability density of ``q_phi`` for a single-mode state."""
    m = as_matrix(rho)
    d = m.shape[0]
    if isinstance(rho, FockState) and rho.modes != 1:
        raise StateError("quadrature_marginal needs a single-mode state; use joint_marginal")
    psi = hermite_functions(d - 1, q)
    n = np.arange(d)
    ph = np.exp(1j * (n[None, :] - n[:, None]) * phi)  # e^{i(m-n)phi}
    dens = np.einsum("nm,n...,m...->...", m * ph, psi, psi)
    return np.real(dens)


def joint_marginal(rho2: FockState, phi_e: float, phi_l: float, q_e, q_l) -> np.ndarray:
    """Joint density of ``(q_E, q_L)`` on the outer grid ``q_e x q_l``."""
    if rho2.modes != 2:
        raise StateError("joint_marginal needs a two-mode state")
    de, dl = rho2.dims
    a = hermite_functions(de - 1, q_e).T * np.exp(1j * np.arange(de) * phi_e)  # <n|q_phi>
    b = hermite_functions(dl - 1, q_l).T * np.exp(1j * np.arange(dl) * phi_l)
    t = rho2.tensor()  # [n, m, n', m']
    dens = np.einsum("in,jm,nmpq,ip,jq->ij", a.conj(), b.conj(), t, a, b, optimize=True)
    return np.real(dens)


# --- Wigner function ------------------------------------------------------


def wigner(rho, q, p) -> np.ndarray:
    """Wigner function ``W[i, j] = W(q[i], p[j])`` normalised over dq dp."""
    m = as_matrix(rho)
    if isinstance(rho, FockState) and rho.modes != 1:
        raise StateError("wigner is single-mode")
    Q, P = np.meshgrid(np.asarray(q, float), np.asarray(p, float), indexing="ij")
    r2 = Q**2 + P**2
    z = math.sqrt(2.0) * (Q - 1j * P)
    gauss = np.exp(-r2) / math.pi
    d = m.shape[0]
    w = np.zeros(Q.shape, dtype=complex)
    for a in range(d):
        for b in range(a + 1):
            # |a><b| with a >= b
            k = a - b
            coef = (-1) ** b * math.exp(0.5 * (gammaln(b + 1) - gammaln(a + 1)))
            term = coef * z**k * eval_genlaguerre(b, k, 2 * r2) * gauss
            w += m[a, b] * term
            if a != b:
                w += m[b, a] * np.conj(term)
    return np.real(w)


# --- figures of merit -----------------------------------------------------


def fidelity(rho, target) -> float:
    """``<psi_t| rho |psi_t>`` for a pure target amplitude vector."""
    m = as_matrix(rho)
    v = np.asarray(target, dtype=complex).ravel()
    if v.size != m.shape[0]:
        raise StateError(f"target dimension {v.size} != state dimension {m.shape[0]}")
    v = v / np.linalg.norm(v)
    return float(np.real(v.conj() @ m @ v))


def single_photon_indices(dims) -> tuple[int, int]:
    """Flat indices of |01> (L) and |10> (E)."""
    _, dl = dims
    return 1, dl


def project_single_photon_subspace(rho2: FockState) -> np.ndarray:
    """Renormalised 2x2 block on {|L>, |E>} = {|01>, |10>}."""
    if rho2.modes != 2:
        raise StateError("projection needs a two-mode state")
    idx = list(single_photon_indices(rho2.dims))
    block = rho2.matrix[np.ix_(idx, idx)]
    tr = np.real(np.trace(block))
    if tr <= 0:
        raise StateError("no valid time-bin events (zero single-photon population)")
    return block / tr


# --- JSON -----------------------------------------------------------------


def to_json_dict(rho: FockState) -> dict:
    return {
        "cutoff": rho.cutoff,
        "modes": rho.modes,
        "basis": "row-major photon numbers, first index = earliest mode",
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in rho.matrix],
    }


def from_json_dict(d: dict) -> FockState:
    m = np.array([[complex(re, im) for re, im in row] for row in d["entries"]])
    modes = int(d.get("modes", 1))
    dims = (int(d["cutoff"]) + 1,) * modes
    return FockState._wrap(m, dims, validate=True)


def save_state(rho: FockState, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_json_dict(rho), indent=1) + "\n")
    return path


def load_state(path) -> FockState:
    return from_json_dict(json.loads(Path(path).read_text()))
