import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from nodalcount import ensemble as en

from conftest import rand_sphere_points


# --- sphere moments -------------------------------------------------------

def test_odd_moment_is_zero():
    assert en.sphere_moment([1, 0], 1) == 0.0
    assert en.sphere_moment([3, 2, 1], 2) == 0.0


def test_x2_moment_on_s2():
    # x^2+y^2+z^2 integrates to the full area 4*pi, split three ways
    assert en.sphere_moment([2, 0, 0], 2) == pytest.approx(4 * np.pi / 3, rel=1e-14)


def test_moment_22_vs_circle_quadrature():
    oracle, _ = quad(lambda t: np.cos(t) ** 2 * np.sin(t) ** 2, 0, 2 * np.pi,
                     epsabs=1e-13)
    assert en.sphere_moment([2, 2], 1) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(np.pi / 4, abs=1e-12)


def test_random_even_moments_vs_s2_quadrature(rng):
    for _ in range(4):
        beta = rng.integers(0, 3, size=3)
        alpha = 2 * beta

        def integrand(phi, th):
            x = np.sin(phi) * np.cos(th)
            y = np.sin(phi) * np.sin(th)
            z = np.cos(phi)
            return x ** alpha[0] * y ** alpha[1] * z ** alpha[2] * np.sin(phi)

        oracle, err = dblquad(integrand, 0, 2 * np.pi, 0, np.pi, epsabs=1e-11)
        assert en.sphere_moment(alpha, 2) == pytest.approx(oracle, abs=max(1e-9, 10 * err))


def test_moment_input_validation():
    with pytest.raises(ValueError):
        en.sphere_moment([-2, 0], 1)
    with pytest.raises(ValueError):
        en.sphere_moment([2, 0, 0], 1)


# --- Gram matrices --------------------------------------------------------

def test_gram_n1_m1_is_diagonal():
    spec = en.EnsembleSpec(1, 1)
    G = en.gram_matrix(spec)
    oracle, _ = quad(lambda t: np.cos(t) ** 2, 0, 2 * np.pi, epsabs=1e-13)
    assert G[0, 0] == pytest.approx(oracle, abs=1e-12)
    assert G[1, 1] == pytest.approx(oracle, abs=1e-12)
    assert G[0, 1] == 0.0


def test_gram_symmetric_and_pd_across_specs():
    for N, m in [(1, 7), (1, 20), (2, 6), (2, 12), (2, 20), (3, 5), (3, 12), (3, 20)]:
        G = en.gram_matrix(en.EnsembleSpec(N, m))
        assert np.array_equal(G, G.T)
        f = en.whitening(G)
        assert f.pivot_ratio > 0  # factorization succeeded with positive pivots


def test_gram_mixed_parity_entry_zero():
    spec = en.EnsembleSpec(2, 2)
    alphas = np.asarray(en.multi_indices(spec))
    G = en.gram_matrix(spec)
    i = int(np.nonzero((alphas == [1, 1, 0]).all(axis=1))[0][0])
    j = int(np.nonzero((alphas == [1, 0, 1]).all(axis=1))[0][0])
    assert G[i, j] == 0.0


def test_multi_index_order_and_count():
    spec = en.EnsembleSpec(2, 2)
    alphas = np.asarray(en.multi_indices(spec))
    assert spec.basis_size == 6 == len(alphas)
    as_tuples = [tuple(a) for a in alphas]
    assert as_tuples == sorted(as_tuples)
    assert (alphas.sum(axis=1) == 2).all()


# --- whitening ------------------------------------------------------------

def test_whitening_identity_gram():
    f = en.whitening(np.eye(4))
    assert np.allclose(f.transform, np.eye(4))


def test_whitening_scalar_case():
    f = en.whitening(np.array([[4.0]]))
    assert f.transform[0, 0] == pytest.approx(0.5)


def test_whitening_residual_tight_n1_m3():
    spec = en.EnsembleSpec(1, 3)
    G = en.gram_matrix(spec)
    f = en.whitening(G, spec)
    res = np.abs(f.transform.T @ G @ f.transform - np.eye(spec.basis_size)).max()
    assert res < 1e-10


def test_whitening_residual_sweep():
    for N, m in [(1, 12), (2, 10), (2, 20), (3, 8)]:
        spec = en.EnsembleSpec(N, m)
        G = en.gram_matrix(spec)
        f = en.whitening(G, spec)
        res = np.abs(f.transform.T @ G @ f.transform - np.eye(spec.basis_size)).max()
        assert res < 1e-8


def test_whitening_rejects_indefinite():
    with pytest.raises(en.ConditioningError):
        en.whitening(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_whitening_conditioning_cap():
    # the monomial basis is numerically degenerate at high degree
    with pytest.raises(en.ConditioningError):
        en.whitening_for(en.EnsembleSpec(1, 70))


# --- sampling -------------------------------------------------------------

@pytest.fixture(scope="module")
def factor_n1_m2():
    return en.whitening_for(en.EnsembleSpec(1, 2))


def test_sampling_deterministic(factor_n1_m2):
    a = en.sample_polynomial_tuple(factor_n1_m2, 2, np.random.default_rng(7))
    b = en.sample_polynomial_tuple(factor_n1_m2, 2, np.random.default_rng(7))
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.coeffs, pb.coeffs)


def test_sampled_l2_norm_expectation(factor_n1_m2):
    spec = factor_n1_m2.spec
    G = en.gram_matrix(spec)
    rng = np.random.default_rng(11)
    n_draws = 10_000
    norms = np.empty(n_draws)
    for i in range(n_draws):
        (p,) = en.sample_polynomial_tuple(factor_n1_m2, 1, rng)
        norms[i] = p.coeffs @ G @ p.coeffs
    d = spec.basis_size
    se = np.sqrt(2.0 * d / n_draws)
    assert abs(norms.mean() - d) < 3 * se


def test_sampled_pointwise_covariance_matches_exact(factor_n1_m2, rng):
    spec = factor_n1_m2.spec
    xs = rand_sphere_points(rng, 1, 5)
    ys = rand_sphere_points(rng, 1, 5)
    gen = np.random.default_rng(23)
    n_draws = 10_000
    prods = np.empty((n_draws, 5))
    for i in range(n_draws):
        (p,) = en.sample_polynomial_tuple(factor_n1_m2, 1, gen)
        prods[i] = p.values(xs) * p.values(ys)
    exact = np.array([en.covariance_exact(spec, xs[k], ys[k]) for k in range(5)])
    se = prods.std(axis=0, ddof=1) / np.sqrt(n_draws)
    assert (np.abs(prods.mean(axis=0) - exact) < 3 * se).all()


def test_coefficient_covariance_matches_whitening(factor_n1_m2):
    T = factor_n1_m2.transform
    target = T @ T.T
    gen = np.random.default_rng(31)
    n_draws = 20_000
    d = factor_n1_m2.spec.basis_size
    coeffs = np.empty((n_draws, d))
    for i in range(n_draws):
        (p,) = en.sample_polynomial_tuple(factor_n1_m2, 1, gen)
        coeffs[i] = p.coeffs
    prods = coeffs[:, :, None] * coeffs[:, None, :]
    emp = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / np.sqrt(n_draws)
    assert (np.abs(emp - target) < 5 * se).all()


def test_tuple_entries_independent(factor_n1_m2):
    gen = np.random.default_rng(41)
    n_draws = 5000
    prods = []
    x = np.array([0.6, 0.8])
    for _ in range(n_draws):
        p1, p2 = en.sample_polynomial_tuple(factor_n1_m2, 2, gen)
        prods.append(en.evaluate(p1, x) * en.evaluate(p2, x))
    prods = np.asarray(prods)
    se = prods.std(ddof=1) / np.sqrt(n_draws)
    assert abs(prods.mean()) < 4 * se


def test_parity_identity_exact(rng):
    for N, m in [(1, 3), (2, 4), (2, 7)]:
        factor = en.whitening_for(en.EnsembleSpec(N, m))
        (p,) = en.sample_polynomial_tuple(factor, 1, np.random.default_rng(5))
        xs = rand_sphere_points(rng, N, 100)
        diff = p.values(-xs) - (-1.0) ** m * p.values(xs)
        assert np.abs(diff).max() < 1e-12


def test_evaluate_basics():
    spec = en.EnsembleSpec(1, 2)
    alphas = np.asarray(en.multi_indices(spec))
    coeffs = np.zeros(spec.basis_size)
    coeffs[int(np.nonzero((alphas == [2, 0]).all(axis=1))[0][0])] = 1.0
    p = en.HomogeneousPolynomial(spec, coeffs)
    assert en.evaluate(p, np.array([1.0, 0.0])) == 1.0
    coeffs2 = np.zeros(spec.basis_size)
    coeffs2[int(np.nonzero((alphas == [1, 1]).all(axis=1))[0][0])] = 1.0
    p2 = en.HomogeneousPolynomial(spec, coeffs2)
    assert en.evaluate(p2, np.array([1.0, 0.0])) == 0.0


# --- exact covariance -----------------------------------------------------

def test_covariance_diagonal_positive(rng):
    for N, m in [(1, 4), (2, 5), (3, 6)]:
        spec = en.EnsembleSpec(N, m)
        xs = rand_sphere_points(rng, N, 10)
        for x in xs:
            assert en.covariance_exact(spec, x, x) > 0


def test_covariance_parity(rng):
    for m in (3, 4):
        spec = en.EnsembleSpec(2, m)
        x = rand_sphere_points(rng, 2, 1)[0]
        y = rand_sphere_points(rng, 2, 1)[0]
        k1 = en.covariance_exact(spec, x, -y)
        k2 = en.covariance_exact(spec, x, y)
        assert k1 == pytest.approx((-1.0) ** m * k2, rel=1e-12, abs=1e-12)


def test_covariance_zonality_through_factor_route():
    # rotation invariance of the whitened-monomial sum, which does not see
    # the angle explicitly (N=2, m=3)
    spec = en.EnsembleSpec(2, 3)
    factor = en.whitening_for(spec)
    x1 = np.array([1.0, 0.0, 0.0])
    y1 = np.array([0.6, 0.8, 0.0])
    rot = np.linalg.qr(np.random.default_rng(3).standard_normal((3, 3)))[0]
    if np.linalg.det(rot) < 0:
        rot[:, 0] = -rot[:, 0]
    x2, y2 = rot @ x1, rot @ y1
    k1 = en.covariance_from_factor(factor, x1, y1)
    k2 = en.covariance_from_factor(factor, x2, y2)
    assert k1 == pytest.approx(k2, abs=1e-10)


def test_covariance_exact_agrees_with_factor_route(rng):
    # dual route: stable zonal closed form vs explicit orthonormal-basis sum
    for N, m in [(1, 6), (1, 12), (2, 5), (2, 12), (3, 4), (3, 9)]:
        spec = en.EnsembleSpec(N, m)
        factor = en.whitening_for(spec)
        X = rand_sphere_points(rng, N, 6)
        Y = rand_sphere_points(rng, N, 6)
        kz = en.covariance_exact(spec, X, Y)
        kf = en.covariance_from_factor(factor, X, Y)
        scale = en.covariance_exact(spec, X[0], X[0])
        assert np.abs(kz - kf).max() < 1e-9 * scale


def test_covariance_diag_equals_dimension_over_area(rng):
    spec = en.EnsembleSpec(2, 8)
    x = rand_sphere_points(rng, 2, 1)[0]
    expected = spec.basis_size / en.sphere_area(2)
    assert en.covariance_exact(spec, x, x) == pytest.approx(expected, rel=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        en.EnsembleSpec(0, 3)
    with pytest.raises(ValueError):
        en.EnsembleSpec(2, 0)
    with pytest.raises(ValueError):
        en.EnsembleSpec(2, 3, codim=3)
