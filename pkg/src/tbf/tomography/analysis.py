"""Marginal population fits, bootstrap statistics and the cardinal-state suite."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import fock
from .mle import mle_from_counts
from .povm import bin_integrals, build_povm
from .sampling import sample_quadratures
from .settings import MeasurementSettings, QuadratureDataset, bin_index, default_edges

SQ2 = np.sqrt(0.5)
CARDINAL_STATES = {
    "0": (1.0, 0.0),
    "1": (0.0, 1.0),
    "+": (SQ2, SQ2),
    "-": (SQ2, -SQ2),
    "+i": (SQ2, 1j * SQ2),
    "-i": (SQ2, -1j * SQ2),
}
KINDS = ("transmon-sim", "single-rail", "time-bin")
DRIFTS = ("none", "uniform", "per-shot-uniform")


# --- bootstrap ------------------------------------------------------------


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    lower3: float
    upper3: float


@dataclass
class BootstrapResult:
    """Resampled estimator values, one column per named quantity."""

    n_resamples: int
    names: list
    values: np.ndarray
    estimate: dict = field(default_factory=dict)

    @property
    def mean(self) -> dict:
        return dict(zip(self.names, self.values.mean(axis=0)))

    @property
    def std(self) -> dict:
        return dict(zip(self.names, self.values.std(axis=0, ddof=1)))

    def __getitem__(self, name) -> Summary:
        j = self.names.index(name)
        col = self.values[:, j]
        m, s = float(col.mean()), float(col.std(ddof=1))
        return Summary(m, s, m - 3 * s, m + 3 * s)

    def percentile(self, name, level: float = 0.95) -> tuple[float, float]:
        col = self.values[:, self.names.index(name)]
        a = 100 * (1 - level) / 2
        lo, hi = np.percentile(col, [a, 100 - a])
        return float(lo), float(hi)


def _as_dict(v) -> dict:
    if isinstance(v, dict):
        return {str(k): float(x) for k, x in v.items()}
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.size == 1:
        return {"value": float(arr[0])}
    return {str(i): float(x) for i, x in enumerate(arr)}


def _resample(data, rng):
    if isinstance(data, QuadratureDataset):
        return data.resample(rng)
    arr = np.asarray(data)
    return arr[rng.integers(0, arr.shape[0], size=arr.shape[0])]


def bootstrap(data, estimator: Callable, n_resamples: int = 250, seed: int = 0) -> BootstrapResult:
    """Re-run ``estimator`` on shot resamples (with replacement, per setting).

    ``data`` is a ``QuadratureDataset`` or an array resampled along axis 0.
    ``estimator`` may return a scalar, a 1-D array or a dict of scalars.
    """
    if n_resamples < 2:
        raise ValueError("need at least two bootstrap resamples")
    full = _as_dict(estimator(data))
    names = list(full)
    rng = np.random.default_rng(seed)
    vals = np.empty((n_resamples, len(names)))
    for i in range(n_resamples):
        est = _as_dict(estimator(_resample(data, rng)))
        vals[i] = [est[k] for k in names]
    return BootstrapResult(n_resamples, names, vals, full)


# --- marginal population fit ----------------------------------------------


@dataclass
class PopulationFit:
    probabilities: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    std: np.ndarray
    n_samples: int
    iterations: int


def _em_populations(counts: np.ndarray, g: np.ndarray, p0=None, tol=1e-12, max_iter=100_000):
    """EM for a histogram modelled as ``sum_n P_n g[n, bin]``; stays on the simplex."""
    n_tot = counts.sum()
    keep = counts > 0
    f, gk = counts[keep].astype(float), g[:, keep]
    p = np.full(g.shape[0], 1 / g.shape[0]) if p0 is None else np.array(p0, float)
    it = 0
    for it in range(1, max_iter + 1):
        model = p @ gk
        new = p * (gk @ (f / model)) / n_tot
        done = np.max(np.abs(new - p)) < tol
        p = new
        if done:
            break
    return p / p.sum(), it


def fit_marginal_photon_populations(
    samples, max_n: int = 1, edges=None, n_boot: int = 250, seed: int = 0, level: float = 0.95
) -> PopulationFit:
    """Fit photon-number populations to phase-averaged quadrature samples.

    The histogram is modelled as ``sum_n P_n |psi_n(q)|^2`` integrated over
    bins; the fit is maximum likelihood over the simplex (EM). Intervals are
    bootstrap percentiles at ``level``.
    """
    q = np.asarray(samples, dtype=float).ravel()
    if q.size < 1000:
        raise ValueError("need at least 1000 samples for a population fit")
    edges = default_edges() if edges is None else np.asarray(edges)
    g = np.einsum("bnn->nb", bin_integrals(edges, max_n + 1))
    nb = edges.size + 1
    counts = np.bincount(bin_index(q, edges), minlength=nb)
    if np.count_nonzero(counts) < 2:
        raise ValueError("degenerate histogram: all samples fall in one bin")
    p, iters = _em_populations(counts, g)

    def est(x):
        c = np.bincount(bin_index(x, edges), minlength=nb)
        return _em_populations(c, g, p0=p, tol=1e-10)[0]

    if n_boot >= 2:
        bs = bootstrap(q, est, n_boot, seed)
        a = 100 * (1 - level) / 2
        lo, hi = np.percentile(bs.values, [a, 100 - a], axis=0)
        sd = bs.values.std(axis=0, ddof=1)
    else:
        lo = hi = sd = np.full_like(p, np.nan)
    return PopulationFit(p, lo, hi, sd, q.size, iters)


# --- cardinal states ------------------------------------------------------


@dataclass(frozen=True)
class ChannelStack:
    """Loss per mode (transmissivity) followed by a common phase drift.

    ``drift='uniform'`` averages the state analytically, ``'per-shot-uniform'``
    draws a fresh phase for every shot inside the sampler.
    """

    loss: float | tuple = 1.0
    drift: str = "none"

    def __post_init__(self):
        if self.drift not in DRIFTS:
            raise ValueError(f"unknown drift {self.drift!r}; choose from {DRIFTS}")

    def apply(self, state: fock.FockState) -> fock.FockState:
        out = fock.loss_channel(state, self.loss)
        if self.drift == "uniform":
            out = fock.phase_drift_channel(out)
        return out

    @property
    def sampler_drift(self) -> str:
        return "per-shot-uniform" if self.drift == "per-shot-uniform" else "none"


def encode(kind: str, alpha_q: complex, beta_q: complex, cutoff: int = fock.DEFAULT_CUTOFF) -> np.ndarray:
    """Fock amplitudes of the qubit ``alpha|g> + beta|e>`` in the given encoding."""
    if kind == "time-bin":
        return fock.timebin_amplitudes(alpha_q, beta_q, cutoff)
    if kind in ("single-rail", "transmon-sim"):
        return fock.single_rail_amplitudes(alpha_q, beta_q, cutoff)
    raise ValueError(f"unknown qubit kind {kind!r}; choose from {KINDS}")


def qubit_fidelity(kind: str, rho: fock.FockState, alpha_q, beta_q, loss_correct: bool = True) -> float:
    """Fidelity to the encoded target; time-bin states optionally projected first."""
    if kind == "time-bin" and loss_correct:
        block = fock.project_single_photon_subspace(rho)
        v = np.array([alpha_q, beta_q], dtype=complex)  # {|L>, |E>}
        return float(np.real(v.conj() @ block @ v))
    return fock.fidelity(rho, encode(kind, alpha_q, beta_q, rho.cutoff))


def fidelity_estimator(kind, povm, alpha_q, beta_q, loss_correct=True, mle_config=None, rho0=None):
    """Dataset -> reconstructed-state fidelity; resamples warm-start from ``rho0``."""
    cfg = {"max_iter": 2000, "tol": 1e-10}
    cfg.update(mle_config or {})

    def est(data: QuadratureDataset) -> float:
        res = mle_from_counts(data.counts(povm.edges), povm, cfg["max_iter"], cfg["tol"], rho0=rho0)
        return qubit_fidelity(kind, res.state, alpha_q, beta_q, loss_correct)

    return est


@dataclass
class CardinalRow:
    label: str
    fidelity: float
    std: float
    lower3: float
    upper3: float
    state: fock.FockState | None = None


@dataclass
class SuiteResult:
    kind: str
    rows: list

    @property
    def average(self) -> float:
        return float(np.mean([r.fidelity for r in self.rows]))

    @property
    def average_std(self) -> float:
        # rows are independent datasets
        return float(np.sqrt(np.sum([r.std**2 for r in self.rows])) / len(self.rows))


def derived_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def prepare_and_measure(
    kind: str,
    label: str,
    channels: ChannelStack = ChannelStack(),
    settings: MeasurementSettings | None = None,
    cutoff: int = fock.DEFAULT_CUTOFF,
    loss_correct: bool = True,
    n_boot: int = 0,
    mle_config: dict | None = None,
) -> CardinalRow:
    """One cardinal state through channels, sampling, MLE and (optionally) bootstrap."""
    alpha_q, beta_q = CARDINAL_STATES[label]
    target = fock.pure_state(encode(kind, alpha_q, beta_q, cutoff))
    rho = channels.apply(target)
    if kind == "transmon-sim":
        f = qubit_fidelity(kind, rho, alpha_q, beta_q)
        return CardinalRow(label, f, 0.0, f, f, rho)
    modes = 2 if kind == "time-bin" else 1
    settings = settings or MeasurementSettings.grid(12, modes)
    if settings.modes != modes:
        raise ValueError(f"{kind} needs {modes}-mode settings")
    povm = build_povm(settings, cutoff)
    data = sample_quadratures(rho, settings, drift=channels.sampler_drift, label=f"{kind}:{label}")
    cfg = {"max_iter": 2000, "tol": 1e-10}
    cfg.update(mle_config or {})
    res = mle_from_counts(data.counts(povm.edges), povm, cfg["max_iter"], cfg["tol"])
    f = qubit_fidelity(kind, res.state, alpha_q, beta_q, loss_correct)
    if n_boot >= 2:
        est = fidelity_estimator(kind, povm, alpha_q, beta_q, loss_correct, cfg, rho0=res.state.matrix)
        bs = bootstrap(data, est, n_boot, seed=derived_seed(settings.seed, 0xB5))
        s = bs["value"].std
    else:
        s = 0.0
    return CardinalRow(label, f, s, f - 3 * s, f + 3 * s, res.state)


def cardinal_state_suite(
    kind: str,
    channels: ChannelStack = ChannelStack(),
    settings: MeasurementSettings | None = None,
    cutoff: int = fock.DEFAULT_CUTOFF,
    loss_correct: bool = True,
    n_boot: int = 0,
    labels=tuple(CARDINAL_STATES),
    mle_config: dict | None = None,
) -> SuiteResult:
    """Six cardinal states (or ``labels``) with per-state and average fidelity."""
    if kind not in KINDS:
        raise ValueError(f"unknown qubit kind {kind!r}; choose from {KINDS}")
    rows = []
    for i, label in enumerate(labels):
        st = None
        if settings is not None:
            st = settings.replace(seed=derived_seed(settings.seed, i))
        elif kind != "transmon-sim":
            st = MeasurementSettings.grid(12, 2 if kind == "time-bin" else 1, seed=derived_seed(0, i))
        rows.append(prepare_and_measure(kind, label, channels, st, cutoff, loss_correct, n_boot, mle_config))
    return SuiteResult(kind, rows)
