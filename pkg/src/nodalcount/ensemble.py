"""Gaussian ensembles of real homogeneous polynomials on the round sphere.

Degree-m homogeneous polynomials in N+1 variables carry the L2 inner product
of their restrictions to S^N. Whitening the monomial Gram matrix gives an
orthonormal basis; independent standard-normal coefficients in any such basis
define the ensemble (unit-variance convention, recorded in every manifest).
The covariance kernel E[P(x)P(y)] is basis independent and equals the
reproducing kernel of the restricted polynomial space, which decomposes over
spherical-harmonic degrees m, m-2, ... and has a stable zonal closed form;
``covariance_exact`` uses that form, ``covariance_from_factor`` the whitened
monomial sum, and the two are cross-checked in the tests.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import gammaln

from . import kernels


class ConditioningError(np.linalg.LinAlgError):
    """Monomial Gram factorization is outside the supported conditioning range."""


@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters of one polynomial ensemble.

    ambient_dim N: sphere S^N sits in R^{N+1}; degree m; codim r tuples of
    polynomials cut codimension-r intersections in a variety of dimension
    variety_dim n (an equatorial S^n inside S^N).
    """

    ambient_dim: int
    degree: int
    codim: int = 1
    variety_dim: int | None = None

    def __post_init__(self):
        n = self.ambient_dim if self.variety_dim is None else self.variety_dim
        object.__setattr__(self, "variety_dim", n)
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be >= 1")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if not (1 <= self.codim <= n <= self.ambient_dim):
            raise ValueError("need 1 <= codim <= variety_dim <= ambient_dim")

    @property
    def basis_size(self) -> int:
        return comb(self.ambient_dim + self.degree, self.degree)


@lru_cache(maxsize=None)
def _multi_indices_cached(ambient_dim, degree):
    """All exponent vectors of length N+1 summing to m, ascending lex order."""
    nvar = ambient_dim + 1

    def gen(prefix, remaining, slots):
        if slots == 1:
            yield prefix + (remaining,)
            return
        for e in range(remaining + 1):
            yield from gen(prefix + (e,), remaining - e, slots - 1)

    idx = sorted(gen((), degree, nvar))
    arr = np.array(idx, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def multi_indices(spec_or_dim, degree=None):
    if isinstance(spec_or_dim, EnsembleSpec):
        return _multi_indices_cached(spec_or_dim.ambient_dim, spec_or_dim.degree)
    return _multi_indices_cached(int(spec_or_dim), int(degree))


def sphere_moment(alpha, ambient_dim) -> float:
    """Integral of x^alpha over S^N with the round (unnormalized) measure.

    Zero when any exponent is odd; for alpha = 2*beta the closed form is
    2 * prod Gamma(beta_i + 1/2) / Gamma(|beta| + (N+1)/2).
    """
    alpha = np.asarray(alpha, dtype=np.int64)
    if alpha.ndim != 1 or len(alpha) != ambient_dim + 1:
        raise ValueError(f"alpha must have {ambient_dim + 1} entries")
    if (alpha < 0).any():
        raise ValueError("exponents must be nonnegative")
    if (alpha % 2 != 0).any():
        return 0.0
    beta = alpha / 2.0
    lg = np.log(2.0) + gammaln(beta + 0.5).sum() - gammaln(beta.sum() + (ambient_dim + 1) / 2.0)
    return float(np.exp(lg))


def sphere_area(ambient_dim) -> float:
    return sphere_moment(np.zeros(ambient_dim + 1, dtype=np.int64), ambient_dim)


def gram_matrix(spec: EnsembleSpec) -> np.ndarray:
    """Monomial Gram matrix: entry (a,b) = sphere_moment(alpha_a + alpha_b)."""
    alphas = multi_indices(spec)
    d = len(alphas)
    N = spec.ambient_dim
    G = np.zeros((d, d))
    chunk = max(1, 2_000_000 // max(d, 1))
    for lo in range(0, d, chunk):
        S = alphas[lo:lo + chunk, None, :] + alphas[None, :, :]
        even = (S % 2 == 0).all(axis=2)
        beta = (S // 2).astype(np.float64)
        lg = np.log(2.0) + gammaln(beta + 0.5).sum(axis=2) - gammaln(beta.sum(axis=2) + (N + 1) / 2.0)
        G[lo:lo + chunk] = np.where(even, np.exp(lg), 0.0)
    return G


@dataclass(frozen=True)
class WhiteningFactor:
    """Transform T with T^t G T = I for the monomial Gram G.

    Columns of ``transform`` are monomial coefficient vectors of an
    L2-orthonormal basis; standard-normal coordinates map through T to
    monomial coefficients with covariance T T^t = G^{-1}.
    """

    spec: EnsembleSpec
    transform: np.ndarray
    pivot_ratio: float
    # diagonal pre-scaling and scaled Cholesky factor, kept for stable solves
    col_scale: np.ndarray = None
    chol_lower: np.ndarray = None


PIVOT_RATIO_LIMIT = 1e12


def whitening(gram: np.ndarray, spec: EnsembleSpec | None = None) -> WhiteningFactor:
    """Factor the Gram matrix so that T^t G T = I.

    The Gram is first scaled to unit diagonal (the raw entries span a huge
    dynamic range at high degree), then Cholesky-factored. A pivot ratio
    beyond PIVOT_RATIO_LIMIT, or a LAPACK non-PD report, raises
    ConditioningError: the monomial basis is genuinely too collinear at that
    degree for float64 whitening.
    """
    G = np.asarray(gram, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("gram must be square")
    if not np.allclose(G, G.T, rtol=0, atol=1e-12 * max(1.0, np.abs(G).max())):
        raise ValueError("gram must be symmetric")
    diag = np.diag(G)
    if (diag <= 0).any():
        raise ConditioningError("gram has non-positive diagonal")
    s = np.sqrt(diag)
    Gh = G / np.outer(s, s)
    try:
        L = np.linalg.cholesky(Gh)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(
            f"monomial Gram of size {G.shape[0]} is not positive definite in "
            f"float64; degree is beyond the supported conditioning cap"
        ) from exc
    piv = np.diag(L)
    ratio = float(piv.max() / piv.min())
    if ratio > PIVOT_RATIO_LIMIT:
        raise ConditioningError(
            f"Cholesky pivot ratio {ratio:.3e} exceeds {PIVOT_RATIO_LIMIT:.0e}"
        )
    # T = D L^{-T} with D = diag(1/s):  T^t G T = L^{-1} Gh L^{-T} = I
    from scipy.linalg import solve_triangular

    Linv_t = solve_triangular(L, np.eye(len(L)), lower=True).T
    T = Linv_t / s[:, None]
    return WhiteningFactor(spec=spec, transform=T, pivot_ratio=ratio,
                           col_scale=1.0 / s, chol_lower=L)


def whitening_for(spec: EnsembleSpec) -> WhiteningFactor:
    return whitening(gram_matrix(spec), spec)


@dataclass(frozen=True)
class HomogeneousPolynomial:
    """Coefficient vector over the lexicographic monomial basis."""

    spec: EnsembleSpec
    coeffs: np.ndarray

    def __post_init__(self):
        if len(self.coeffs) != self.spec.basis_size:
            raise ValueError("coefficient length does not match basis size")

    def values(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return kernels.eval_monomials(pts, multi_indices(self.spec), self.coeffs)

    def __call__(self, points):
        return self.values(points)


def evaluate(poly: HomogeneousPolynomial, x) -> float:
    """Value at a single unit vector x on S^N."""
    x = np.asarray(x, dtype=np.float64)
    return float(poly.values(x[None, :])[0])


def sample_polynomial_tuple(factor: WhiteningFactor, r: int, rng) -> tuple:
    """r independent ensemble draws; deterministic in the rng state."""
    d = factor.transform.shape[0]
    out = []
    for _ in range(r):
        z = rng.standard_normal(d)
        out.append(HomogeneousPolynomial(spec=factor.spec, coeffs=factor.transform @ z))
    return tuple(out)


# ---------------------------------------------------------------------------
# exact covariance kernel
# ---------------------------------------------------------------------------


def _harmonic_dim(ambient_dim, k):
    """dim of degree-k spherical harmonics on S^N (N+1 ambient variables)."""
    if k < 2:
        return 1 if k == 0 else ambient_dim + 1
    return comb(ambient_dim + k, k) - comb(ambient_dim + k - 2, k - 2)


def _zonal_value(ambient_dim, k, ct):
    """Reproducing kernel of the degree-k harmonics at cos(angle) = ct."""
    from scipy.special import eval_gegenbauer, eval_legendre

    area = sphere_area(ambient_dim)
    if ambient_dim == 1:
        if k == 0:
            return np.full_like(ct, 1.0 / (2 * np.pi))
        return np.cos(k * np.arccos(np.clip(ct, -1.0, 1.0))) / np.pi
    lam = (ambient_dim - 1) / 2.0
    if ambient_dim == 2:
        ratio = eval_legendre(k, ct)
    else:
        # C_k^lam(1) = binom(k + 2 lam - 1, k)
        log_at_one = gammaln(k + 2 * lam) - gammaln(k + 1) - gammaln(2 * lam)
        ratio = eval_gegenbauer(k, lam, ct) / np.exp(log_at_one)
    return _harmonic_dim(ambient_dim, k) / area * ratio


def covariance_exact(spec: EnsembleSpec, x, y) -> float | np.ndarray:
    """E[P(x)P(y)] for the ensemble, via the zonal harmonic decomposition.

    Equals sum_i Q_i(x) Q_i(y) for any L2-orthonormal basis {Q_i}; the zonal
    form is numerically exact at every degree, unlike the whitened monomial
    sum (see covariance_from_factor).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scalar = x.ndim == 1 and y.ndim == 1
    X = np.atleast_2d(x)
    Y = np.atleast_2d(y)
    ct = np.clip(X @ Y.T, -1.0, 1.0)
    out = np.zeros_like(ct)
    m = spec.degree
    for k in range(m % 2, m + 1, 2):
        out += _zonal_value(spec.ambient_dim, k, ct)
    return float(out[0, 0]) if scalar else out


def covariance_from_factor(factor: WhiteningFactor, x, y) -> float | np.ndarray:
    """E[P(x)P(y)] as the explicit orthonormal-basis sum through the factor.

    Accuracy degrades with the Gram condition number; used as the dual route
    against covariance_exact and for zonality checks.
    """
    from scipy.linalg import solve_triangular

    spec = factor.spec
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scalar = x.ndim == 1 and y.ndim == 1
    X = np.atleast_2d(x)
    Y = np.atleast_2d(y)
    alphas = multi_indices(spec)
    Vx = kernels.monomial_matrix(X, alphas, column_scale=factor.col_scale)
    Vy = kernels.monomial_matrix(Y, alphas, column_scale=factor.col_scale)
    Wx = solve_triangular(factor.chol_lower, Vx.T, lower=True)
    Wy = solve_triangular(factor.chol_lower, Vy.T, lower=True)
    out = Wx.T @ Wy
    return float(out[0, 0]) if scalar else out
