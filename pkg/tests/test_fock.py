import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad, simpson
from scipy.linalg import expm

from tbf import fock
from tbf.fock import StateError

from .conftest import random_density

SQ2 = math.sqrt(0.5)
PSI_TB = fock.timebin_amplitudes(SQ2, SQ2)


def test_pure_state_examples():
    rho = fock.fock(1)
    np.testing.assert_allclose(rho.matrix, np.diag([0, 1, 0, 0]))
    assert isinstance(rho, fock.FockDensityMatrix)
    tb = fock.pure_state(PSI_TB)
    assert isinstance(tb, fock.TwoModeDensityMatrix)
    i, j = fock.single_photon_indices(tb.dims)
    block = tb.matrix[np.ix_([i, j], [i, j])]
    np.testing.assert_allclose(np.abs(block), 0.5)
    assert np.isclose(np.abs(tb.matrix).sum(), 2.0)


def test_pure_state_renormalises_with_warning():
    with pytest.warns(UserWarning, match="renormalised"):
        rho = fock.pure_state([1.0, 1.0, 0, 0])
    assert np.trace(rho.matrix).real == pytest.approx(1.0)
    with pytest.raises(StateError):
        fock.pure_state(np.zeros(4))


@pytest.mark.parametrize(
    "matrix, msg",
    [
        (np.array([[1, 0.1], [0.2, 0]]), "Hermitian"),
        (np.diag([0.6, 0.6]), "trace"),
        (np.array([[0.5, 0.6], [0.6, 0.5]]), "negative eigenvalue"),
    ],
)
def test_invalid_density_matrices(matrix, msg):
    with pytest.raises(StateError, match=msg):
        fock.FockState(matrix)


def test_state_is_read_only():
    rho = fock.fock(1)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1


# --- loss -----------------------------------------------------------------


def test_loss_examples():
    rho = fock.fock(1)
    np.testing.assert_array_equal(fock.loss_channel(rho, 1.0).matrix, rho.matrix)
    out = fock.loss_channel(rho, 0.556).matrix
    np.testing.assert_allclose(out, np.diag([0.444, 0.556, 0, 0]), atol=1e-15)


def _beamsplitter_loss(psi, eta, d=3):
    """Mix every mode with its own vacuum ancilla on a beamsplitter and trace the ancillas."""
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    eye = np.eye(d)
    theta = math.acos(math.sqrt(eta))
    # ordering: E, L, ancilla_E, ancilla_L
    def on(m, op):
        mats = [eye] * 4
        mats[m] = op
        out = mats[0]
        for x in mats[1:]:
            out = np.kron(out, x)
        return out

    u = np.eye(d**4, dtype=complex)
    for m in (0, 1):
        gen = on(m, a).conj().T @ on(m + 2, a) - on(m, a) @ on(m + 2, a).conj().T
        u = expm(theta * gen) @ u
    vac = np.zeros(d * d)
    vac[0] = 1
    full = u @ np.kron(psi.ravel(), vac)
    t = np.outer(full, full.conj()).reshape((d,) * 8)
    return np.einsum("abijcdij->abcd", t).reshape(d * d, d * d)


def test_loss_matches_beamsplitter_oracle():
    psi = fock.timebin_amplitudes(SQ2, SQ2, cutoff=2)
    ref = _beamsplitter_loss(psi, 0.5)
    out = fock.loss_channel(fock.pure_state(psi), 0.5).matrix
    np.testing.assert_allclose(out, ref, atol=1e-12)
    expected = 0.5 * fock.pure_state(psi).matrix
    expected[0, 0] += 0.5
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_loss_fidelity_closed_form():
    for eta in (0.2, 0.5, 0.9):
        rho = fock.loss_channel(fock.pure_state(PSI_TB), eta)
        assert fock.fidelity(rho, PSI_TB) == pytest.approx(eta)
        np.testing.assert_allclose(fock.project_single_photon_subspace(rho), [[0.5, 0.5], [0.5, 0.5]])


def test_loss_rejects_bad_eta():
    with pytest.raises(ValueError):
        fock.loss_kraus(1.2, 3)


# --- drift ----------------------------------------------------------------


def test_drift_examples():
    sr = fock.pure_state(fock.single_rail_amplitudes(SQ2, SQ2))
    out = fock.phase_drift_channel(sr)
    np.testing.assert_allclose(out.matrix, np.diag([0.5, 0.5, 0, 0]))
    assert fock.fidelity(out, fock.single_rail_amplitudes(SQ2, SQ2)) == pytest.approx(0.5)
    tb = fock.pure_state(PSI_TB)
    np.testing.assert_allclose(fock.phase_drift_channel(tb).matrix, tb.matrix)
    m = np.zeros((4, 4), complex)
    m[0, 0] = m[2, 2] = 0.5
    m[2, 0] = m[0, 2] = 0.5
    assert fock.phase_drift_channel(fock.FockState(m)).matrix[2, 0] == 0


def test_discrete_drift_matches_rotation_average():
    rng = np.random.default_rng(5)
    rho = fock.FockState(random_density(16, rng), (4, 4))
    th = rng.uniform(0, 2 * np.pi, 7)
    avg = sum(fock.rotate(rho, t).matrix for t in th) / th.size
    np.testing.assert_allclose(fock.phase_drift_channel(rho, thetas=th).matrix, avg, atol=1e-14)


# --- quadratures ----------------------------------------------------------


def test_vacuum_and_single_photon_marginals():
    q = np.linspace(-4, 4, 81)
    vac = fock.fock(0)
    for phi in (0.0, 1.0, 2.5):
        np.testing.assert_allclose(fock.quadrature_marginal(vac, phi, q), np.exp(-(q**2)) / math.sqrt(math.pi))
    one = fock.quadrature_marginal(fock.fock(1), 0.3, q)
    np.testing.assert_allclose(one, 2 / math.sqrt(math.pi) * q**2 * np.exp(-(q**2)), atol=1e-15)
    assert one[40] == 0


def test_marginal_normalised_and_rotates():
    rng = np.random.default_rng(2)
    rho = fock.FockState(random_density(4, rng))
    total, _ = quad(lambda x: fock.quadrature_marginal(rho, 0.7, np.array([x]))[0], -12, 12, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-9)
    q = np.linspace(-3, 3, 31)
    # phase-space rotation: measuring phi on e^{i t n} rho e^{-i t n} equals phi - t on rho
    np.testing.assert_allclose(
        fock.quadrature_marginal(fock.rotate(rho, 0.4), 1.1, q), fock.quadrature_marginal(rho, 0.7, q), atol=1e-13
    )


def test_mean_quadrature_of_coherent_superposition():
    rho = fock.pure_state(fock.single_rail_amplitudes(SQ2, SQ2))
    q = np.linspace(-9, 9, 4001)
    for phi in (0.0, np.pi / 2, np.pi):
        mean = simpson(q * fock.quadrature_marginal(rho, phi, q), x=q)
        # <q_phi> = sqrt(2) Re(rho_10 e^{-i phi})
        assert mean == pytest.approx(math.sqrt(2) * 0.5 * math.cos(phi), abs=1e-10)


def test_joint_marginal_product_and_vacuum():
    rng = np.random.default_rng(1)
    a, b = random_density(4, rng), random_density(4, rng)
    prod = fock.FockState(np.kron(a, b), (4, 4))
    q = np.linspace(-3, 3, 13)
    joint = fock.joint_marginal(prod, 0.2, 1.3, q, q)
    np.testing.assert_allclose(
        joint, np.outer(fock.quadrature_marginal(a, 0.2, q), fock.quadrature_marginal(b, 1.3, q)), atol=1e-14
    )
    vac = fock.pure_state(np.eye(4)[0][:, None] * np.eye(4)[0][None, :])
    g = np.exp(-(q**2)) / math.sqrt(math.pi)
    np.testing.assert_allclose(fock.joint_marginal(vac, 0.0, 0.0, q, q), np.outer(g, g), atol=1e-15)


def test_joint_covariance_flips_with_sign():
    q = np.linspace(-7, 7, 281)
    for sign in (1, -1):
        rho = fock.pure_state(fock.timebin_amplitudes(SQ2, sign * SQ2))
        j = fock.joint_marginal(rho, 0.0, 0.0, q, q)
        cov = simpson(simpson(j * np.outer(q, q), x=q, axis=1), x=q)
        # <q_E q_L> = Re(rho_{01,10}) for a single photon shared by the two modes
        assert cov == pytest.approx(sign * 0.5, abs=1e-8)


# --- Wigner ---------------------------------------------------------------


def _parity_wigner(rho, q, p):
    """W(x) = (1/pi) Tr[D(-x) rho D(x) P] by brute force on a padded space."""
    d = rho.shape[0]
    big = d + 40
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    m = np.zeros((big, big), complex)
    m[:d, :d] = rho
    parity = np.diag((-1.0) ** np.arange(big))
    alpha = (q + 1j * p) / math.sqrt(2)
    disp = expm(alpha * a.conj().T - np.conj(alpha) * a)
    return float(np.real(np.trace(disp.conj().T @ m @ disp @ parity)) / math.pi)


def test_wigner_examples():
    z = np.array([0.0])
    assert fock.wigner(fock.fock(0), z, z)[0, 0] == pytest.approx(1 / math.pi)
    assert fock.wigner(fock.fock(1), z, z)[0, 0] == pytest.approx(-1 / math.pi)
    lossy = fock.loss_channel(fock.fock(1), 0.556)
    w00 = fock.wigner(lossy, z, z)[0, 0]
    assert w00 == pytest.approx((1 - 2 * 0.556) / math.pi, abs=1e-15)
    assert w00 == pytest.approx(-0.0357, abs=1e-4)


def test_wigner_matches_parity_oracle():
    rng = np.random.default_rng(9)
    rho = random_density(4, rng)
    pts = [(0.3, -0.7), (-1.2, 0.4), (1.5, 1.5), (0.0, 2.0)]
    for q, p in pts:
        w = fock.wigner(fock.FockState(rho), np.array([q]), np.array([p]))[0, 0]
        assert w == pytest.approx(_parity_wigner(rho, q, p), abs=1e-10)


def test_wigner_marginal_is_quadrature_density():
    rng = np.random.default_rng(4)
    rho = fock.FockState(random_density(4, rng))
    q = np.linspace(-3, 3, 7)
    p = np.linspace(-9, 9, 1801)
    w = fock.wigner(rho, q, p)
    np.testing.assert_allclose(simpson(w, x=p, axis=1), fock.quadrature_marginal(rho, 0.0, q), atol=1e-9)


# --- fidelity and projection ----------------------------------------------


def test_fidelity_examples():
    assert fock.fidelity(fock.pure_state(PSI_TB), PSI_TB) == pytest.approx(1.0)
    m = np.zeros((16, 16))
    i, j = fock.single_photon_indices((4, 4))
    m[i, i] = m[j, j] = 0.5
    mixed = fock.FockState(m, (4, 4))
    for a, b in ((1, 0), (SQ2, SQ2), (SQ2, 1j * SQ2)):
        assert fock.fidelity(mixed, fock.timebin_amplitudes(a, b)) == pytest.approx(0.5)
    with pytest.raises(StateError):
        fock.fidelity(mixed, [1, 0])


def test_projection_examples():
    rho = fock.loss_channel(fock.pure_state(PSI_TB), 0.5)
    block = fock.project_single_photon_subspace(rho)
    np.testing.assert_allclose(block, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
    with pytest.raises(StateError, match="no valid time-bin events"):
        fock.project_single_photon_subspace(fock.pure_state(np.eye(4)[0][:, None] * np.eye(4)[0][None, :]))
    psi = fock.timebin_amplitudes(0.6, 0.8j)
    block = fock.project_single_photon_subspace(fock.pure_state(psi))
    np.testing.assert_allclose(block, np.outer([0.6, 0.8j], np.conj([0.6, 0.8j])), atol=1e-15)


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    rho = fock.FockState(random_density(16, rng), (4, 4))
    back = fock.load_state(fock.save_state(rho, tmp_path / "rho.json"))
    np.testing.assert_array_equal(back.matrix, rho.matrix)
    assert back.dims == rho.dims
    d = fock.to_json_dict(fock.pure_state(fock.timebin_amplitudes(0, 1)))
    # |10> (E) sits at row-major index d_L
    assert d["entries"][4][4] == [1.0, 0.0]


# --- properties -----------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)
etas = st.floats(0, 1)


@given(seeds, etas, etas)
def test_loss_preserves_trace_and_positivity(seed, e1, e2):
    rho = fock.FockState(random_density(16, np.random.default_rng(seed)), (4, 4))
    out = fock.loss_channel(rho, (e1, e2))
    assert abs(np.trace(out.matrix) - 1) < 1e-10
    assert np.linalg.eigvalsh(out.matrix).min() > -1e-12
    out.validate()


@given(seeds, etas, etas)
def test_loss_semigroup(seed, e1, e2):
    rho = fock.FockState(random_density(4, np.random.default_rng(seed)))
    a = fock.loss_channel(fock.loss_channel(rho, e1), e2).matrix
    np.testing.assert_allclose(a, fock.loss_channel(rho, e1 * e2).matrix, atol=1e-12)


@given(seeds)
def test_drift_idempotent_and_trace_preserving(seed):
    rho = fock.FockState(random_density(16, np.random.default_rng(seed)), (4, 4))
    once = fock.phase_drift_channel(rho)
    np.testing.assert_allclose(fock.phase_drift_channel(once).matrix, once.matrix)
    assert abs(np.trace(once.matrix) - 1) < 1e-10
    once.validate()


@given(seeds, st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_marginal_nonnegative(seed, phi, theta):
    rho = fock.FockState(random_density(4, np.random.default_rng(seed)))
    q = np.linspace(-6, 6, 121)
    assert fock.quadrature_marginal(fock.rotate(rho, theta), phi, q).min() > -1e-14


@given(seeds)
def test_populations_sum_to_one(seed):
    rho = fock.FockState(random_density(16, np.random.default_rng(seed)), (4, 4))
    assert rho.populations().sum() == pytest.approx(1.0)
    np.testing.assert_allclose(rho.reduced(0).populations(), rho.populations().reshape(4, 4).sum(1))
