import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longmix import (
    CholeskyPair,
    DataError,
    Dataset,
    DegenerateComponentError,
    InvalidRequestError,
    ModelConstraint,
    ModelParams,
    cholesky_from_omega,
    component_covariance,
    count_free_parameters,
    count_gmm_parameters,
    log_component_density,
    omega_from_cholesky,
)
from longmix.core import gaussian_logpdf, modified_cholesky_triangle
from longmix.simulation import SIM1_LAMBDA

from oracles import dense_cov, dense_logpdf, dense_omega, random_params, random_spd, random_unit_lower


def test_dataset_validation():
    ds = Dataset(np.ones((3, 2)))
    assert (ds.n, ds.p) == (3, 2)
    with pytest.raises(DataError):
        Dataset(np.ones((3, 1)))
    with pytest.raises(DataError):
        Dataset(np.array([[1.0, np.nan]]))
    with pytest.raises(DataError):
        Dataset(np.ones((0, 3)))
    with pytest.raises(ValueError):
        ds.x[0, 0] = 5.0


def test_constraint_codes_are_a_bijection():
    flags = {(c.t_shared, c.d_shared, c.d_isotropic) for c in ModelConstraint}
    assert len(flags) == 8
    for c in ModelConstraint:
        assert ModelConstraint.from_flags(c.t_shared, c.d_shared, c.d_isotropic) is c
        assert ModelConstraint.parse(c.value.lower()) is c
    assert ModelConstraint.EVI.t_shared and not ModelConstraint.EVI.d_shared and ModelConstraint.EVI.d_isotropic
    with pytest.raises(InvalidRequestError):
        ModelConstraint.parse("XYZ")


def test_cholesky_pair_rejects_bad_input():
    with pytest.raises(InvalidRequestError):
        CholeskyPair(np.array([[1.0, 0.2], [0.0, 1.0]]), np.ones(2))
    with pytest.raises(InvalidRequestError):
        CholeskyPair(np.eye(2) * 2, np.ones(2))
    with pytest.raises(InvalidRequestError):
        CholeskyPair(np.eye(2), np.array([1.0, -1.0]))
    # tiny positive variances are floored, not rejected
    assert CholeskyPair(np.eye(2), np.array([1.0, 0.0])).d[1] == 1e-10


def test_model_params_invariants():
    rng = np.random.default_rng(0)
    par = random_params(rng, 3, 5, 2)
    with pytest.raises(InvalidRequestError):
        par.replace(pi=np.array([0.5, 0.5, 0.1]))
    with pytest.raises(InvalidRequestError):
        par.replace(psi=-par.psi)
    with pytest.raises(InvalidRequestError):
        par.replace(constraint="EEA")
    with pytest.raises(InvalidRequestError):
        ModelParams(par.pi, par.xi, par.t, par.d, par.lam[:2], par.psi[:2])  # q = p
    assert par == par.replace()
    assert par.covariances().shape == (3, 5, 5)


def test_omega_identity_and_diagonal():
    assert np.allclose(omega_from_cholesky(CholeskyPair(np.eye(3), np.ones(3))), np.eye(3))
    d = np.array([0.5, 2.0, 7.0])
    assert np.allclose(omega_from_cholesky(CholeskyPair(np.eye(3), d)), np.diag(d))


def test_omega_two_by_two_against_dense_inverse():
    t = np.array([[1.0, 0.0], [-0.5, 1.0]])
    om = omega_from_cholesky(CholeskyPair(t, np.ones(2)))
    assert np.allclose(om, np.linalg.inv(t.T @ t), atol=1e-14)
    assert np.allclose(om, om.T, atol=1e-12)


def test_cholesky_from_omega_examples():
    pair = cholesky_from_omega(np.eye(2))
    assert np.array_equal(pair.t, np.eye(2)) and np.allclose(pair.d, 1.0)
    pair = cholesky_from_omega(np.diag([4.0, 9.0]))
    assert np.array_equal(pair.t, np.eye(2)) and np.allclose(pair.d, [4.0, 9.0])


def test_cholesky_from_omega_matches_standard_cholesky():
    rng = np.random.default_rng(1)
    om = random_spd(rng, 3)
    low = np.linalg.cholesky(om)
    inv = np.linalg.inv(low)
    t_ref = inv / np.diag(inv)[:, None]
    pair = cholesky_from_omega(om)
    assert np.allclose(pair.t, t_ref, atol=1e-10)
    assert np.allclose(pair.d, np.diag(low) ** 2, rtol=1e-10)


def test_cholesky_from_omega_rejects_non_spd():
    with pytest.raises(InvalidRequestError):
        cholesky_from_omega(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(InvalidRequestError):
        cholesky_from_omega(np.array([[1.0, 0.5], [0.0, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_round_trip_property(q, seed):
    om = random_spd(np.random.default_rng(seed), q, jitter=0.1)
    back = omega_from_cholesky(cholesky_from_omega(om))
    assert np.linalg.norm(back - om) <= 1e-10 * np.linalg.norm(om)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_precision_determinant_property(q, seed):
    rng = np.random.default_rng(seed)
    t = random_unit_lower(rng, q)
    d = rng.uniform(0.1, 5.0, size=q)
    _, logdet = np.linalg.slogdet(t.T @ np.diag(1 / d) @ t)
    assert abs(logdet + np.log(d).sum()) <= 1e-10 * max(1.0, abs(np.log(d).sum()))


def test_modified_cholesky_diagonalizes():
    s = random_spd(np.random.default_rng(2), 4)
    t = modified_cholesky_triangle(s)
    m = t @ s @ t.T
    assert np.abs(m - np.diag(np.diag(m))).max() < 1e-10


def test_component_covariance_examples():
    rng = np.random.default_rng(3)
    par = random_params(rng, 2, 4, 2)
    zero = par.replace(lam=np.zeros((4, 2)))
    assert np.allclose(component_covariance(zero, 0), np.diag(par.psi))
    # rank-one structure
    p = 5
    one = ModelParams([1.0], [[0.0]], [[[1.0]]], [[2.5]], np.ones((p, 1)), np.full(p, 0.3))
    assert np.allclose(component_covariance(one, 0), 2.5 * np.ones((p, p)) + 0.3 * np.eye(p))


def test_component_covariance_simulation_parameters():
    par = ModelParams(np.full(4, 0.25), np.zeros((4, 3)), np.broadcast_to(np.eye(3), (4, 3, 3)),
                      np.full((4, 3), 0.7), SIM1_LAMBDA, np.full(11, 0.25))
    naive = np.zeros((11, 11))
    om = dense_omega(par.t[0], par.d[0])
    for i in range(11):
        for j in range(11):
            naive[i, j] = sum(SIM1_LAMBDA[i, a] * om[a, b] * SIM1_LAMBDA[j, b] for a in range(3) for b in range(3))
    naive += 0.25 * np.eye(11)
    assert np.abs(component_covariance(par, 2) - naive).max() < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_covariance_eigenvalues_bounded_by_psi(seed):
    par = random_params(np.random.default_rng(seed), 2, 6, 3)
    ev = np.linalg.eigvalsh(component_covariance(par, 1))
    assert ev.min() >= par.psi.min() - 1e-10


def test_log_density_reductions():
    assert np.isclose(gaussian_logpdf(np.zeros(2), np.zeros(2), np.eye(2)), -np.log(2 * np.pi))
    v, m, x = 2.3, 0.4, -1.1
    got = gaussian_logpdf(np.array([x]), np.array([m]), np.array([[v]]))
    assert np.isclose(got, -0.5 * np.log(2 * np.pi * v) - (x - m) ** 2 / (2 * v))


def test_log_density_matches_dense_oracle():
    rng = np.random.default_rng(4)
    for _ in range(100):
        par = random_params(rng, 2, 5, 2)
        x = rng.normal(size=5) * 3
        got = log_component_density(x, par, 1)
        ref = dense_logpdf(x, par.lam @ par.xi[1], dense_cov(par, 1))
        assert abs(got - ref) <= 1e-10 * max(1.0, abs(ref))


def test_log_density_degenerate_component():
    with pytest.raises(DegenerateComponentError) as err:
        gaussian_logpdf(np.zeros(2), np.zeros(2), np.array([[1.0, 1.0], [1.0, 1.0]]), g=3)
    assert err.value.g == 3


def test_parameter_counts():
    assert count_free_parameters(4, 11, 3, "VVA") == 74
    assert count_free_parameters(3, 30, 7, "VVA") == 298
    assert count_free_parameters(10, 7, 5, "VVA") == 226
    assert count_free_parameters(1, 2, 1, "EEI") == 5
    assert count_gmm_parameters(4, 11) == 311
    assert count_gmm_parameters(1, 1) == 2
    # covariance-only part of the full mixture: G [p(p-1)/2] + G p = 465 G
    assert count_gmm_parameters(3, 30) - (3 - 1) - 3 * 30 == 465 * 3


def test_parameter_count_table_rows():
    g, p, q = 5, 12, 4
    base = (g - 1) + g * q + (p * q - q * q) + p
    tri = q * (q - 1) // 2
    expected = {
        "EEA": tri + q, "VVA": g * tri + g * q, "VEA": g * tri + q, "EVA": tri + g * q,
        "VVI": g * tri + g, "VEI": g * tri + 1, "EVI": tri + g, "EEI": tri + 1,
    }
    for code, omega_part in expected.items():
        assert count_free_parameters(g, p, q, code) == base + omega_part


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(2, 40), st.data())
def test_parameter_count_ordering(g, p, data):
    q = data.draw(st.integers(1, p - 1))
    counts = {c: count_free_parameters(g, p, q, c) for c in ModelConstraint}
    assert all(counts[ModelConstraint.EEI] <= v <= counts[ModelConstraint.VVA] for v in counts.values())


def test_parameter_count_rejects_bad_dimensions():
    with pytest.raises(InvalidRequestError):
        count_free_parameters(2, 5, 5)
    with pytest.raises(InvalidRequestError):
        count_gmm_parameters(0, 3)
