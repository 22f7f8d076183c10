"""Approximating smooth targets by finite spans of limit-kernel translates.

Two constructive halves: a mollified monomial g_t(x) = x^k * I_t(x) with
I_t(x) = integral of phi_t(xi) cos<xi, x> d xi -> 1 as t -> 0 (phi_t a
ball-supported bump at scale t), and a ridge-regularized least-squares fit of
any target against translates K_v of the limit kernel on a grid of centers.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernel import LimitKernelSpec, limit_kernel_radial


def bump_profile(xi):
    """Smooth even bump exp(-1/(1-|xi|^2)) supported in the unit ball."""
    xi = np.asarray(xi, dtype=np.float64)
    r2 = (xi * xi).sum(axis=-1)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@lru_cache(maxsize=8)
def _bump_norm_constant(dim, nquad=160):
    """Unit-integral normalization, computed once at high quadrature order."""
    nodes, weights = np.polynomial.legendre.leggauss(nquad)
    grids = np.meshgrid(*([nodes] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = weights
    for _ in range(dim - 1):
        w = np.multiply.outer(w, weights)
    total = float((bump_profile(pts) * w.ravel()).sum())
    return 1.0 / total


@dataclass(frozen=True)
class Mollifier:
    """phi_t(xi) = t^-dim * phi(xi/t); unit integral, support in the t-ball."""

    scale: float
    dim: int

    def __post_init__(self):
        if not (0 < self.scale <= 1.0):
            raise ValueError("scale must lie in (0, 1]")

    def __call__(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        c = _bump_norm_constant(self.dim)
        return c / self.scale ** self.dim * bump_profile(xi / self.scale)

    def cosine_integral(self, points, nquad=48):
        """I_t(x) = integral phi_t(xi) cos<xi, x_embedded> d xi by tensor
        Gauss-Legendre over the support cube [-t, t]^dim."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        nodes, weights = np.polynomial.legendre.leggauss(nquad)
        nodes = nodes * self.scale
        weights = weights * self.scale
        grids = np.meshgrid(*([nodes] * self.dim), indexing="ij")
        xi = np.stack([g.ravel() for g in grids], axis=1)
        w = weights
        for _ in range(self.dim - 1):
            w = np.multiply.outer(w, weights)
        density = self(xi) * w.ravel()
        n = pts.shape[1]
        args = pts @ xi[:, :n].T
        return np.cos(args) @ density


def mollifier_approximant(k_multi, t, points, dim=None, nquad=48):
    """x^k * I_t(x): the mollified monomial, evaluated at points in R^n.

    ``k_multi`` is the exponent vector over the n evaluation variables; the
    mollifier lives on R^dim (dim >= n, default n).
    """
    k_multi = np.asarray(k_multi, dtype=np.int64)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = pts.shape[1]
    if len(k_multi) != n:
        raise ValueError("exponent vector length must match point dimension")
    if (k_multi < 0).any():
        raise ValueError("exponents must be nonnegative")
    moll = Mollifier(scale=float(t), dim=int(dim or n))
    mono = np.prod(pts ** k_multi[None, :], axis=1)
    return mono * moll.cosine_integral(pts, nquad=nquad)


@dataclass(frozen=True)
class KernelTranslate:
    """x -> K(x, center) for the limit kernel."""

    center: np.ndarray
    spec: LimitKernelSpec

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d = np.linalg.norm(pts - np.asarray(self.center)[None, :], axis=1)
        return limit_kernel_radial(self.spec.freq_dim, d)


@dataclass
class FitResult:
    coeffs: np.ndarray
    centers: np.ndarray
    ridge: float
    sup_residual: float
    audit_points: np.ndarray

    def predict(self, points, spec: LimitKernelSpec):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        D = np.linalg.norm(pts[:, None, :] - self.centers[None, :, :], axis=2)
        A = limit_kernel_radial(spec.freq_dim, D.ravel()).reshape(D.shape)
        return A @ self.coeffs


RIDGE_LADDER_STEPS = 6


def fit_in_span(target, centers, spec: LimitKernelSpec, ridge=1e-10,
                fit_points=None, audit_points=None):
    """Least-squares fit of ``target`` against kernel translates at ``centers``.

    ``target`` is evaluable on (npts, n) arrays. Fit points default to a
    uniform grid; the sup-norm residual is audited on a grid twice as fine.
    The normal equations escalate the ridge (x100 per step) on factorization
    failure; translate systems are severely ill-conditioned by nature.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if len(np.unique(centers, axis=0)) != len(centers):
        raise ValueError("centers must be distinct")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    n = centers.shape[1]
    if fit_points is None:
        if n != 1:
            raise ValueError("default fit grids only provided in dimension 1")
        lo, hi = centers.min() / 2.0, centers.max() / 2.0
        fit_points = np.linspace(lo, hi, 101)[:, None]
    fit_points = np.atleast_2d(np.asarray(fit_points, dtype=np.float64))
    if audit_points is None:
        audit_points = _refine_grid(fit_points)

    D = np.linalg.norm(fit_points[:, None, :] - centers[None, :, :], axis=2)
    A = limit_kernel_radial(spec.freq_dim, D.ravel()).reshape(D.shape)
    y = np.asarray(target(fit_points), dtype=np.float64)
    gram = A.T @ A
    rhs = A.T @ y
    lam = ridge
    coeffs = None
    for _ in range(RIDGE_LADDER_STEPS):
        try:
            L = np.linalg.cholesky(gram + lam * np.eye(len(centers)))
        except np.linalg.LinAlgError:
            lam = max(lam, 1e-14) * 100.0
            continue
        coeffs = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
        break
    if coeffs is None:
        raise np.linalg.LinAlgError("normal matrix stayed non-PD through the ridge ladder")

    Da = np.linalg.norm(audit_points[:, None, :] - centers[None, :, :], axis=2)
    Aa = limit_kernel_radial(spec.freq_dim, Da.ravel()).reshape(Da.shape)
    resid = float(np.abs(Aa @ coeffs - np.asarray(target(audit_points), dtype=np.float64)).max())
    return FitResult(coeffs=coeffs, centers=centers, ridge=lam,
                     sup_residual=resid, audit_points=audit_points)


def _refine_grid(points):
    """Insert midpoints along the first axis ordering (2x finer audit grid)."""
    pts = np.unique(points, axis=0)
    if pts.shape[1] == 1:
        x = np.sort(pts[:, 0])
        mid = 0.5 * (x[:-1] + x[1:])
        return np.sort(np.concatenate([x, mid]))[:, None]
    mids = 0.5 * (pts[:-1] + pts[1:])
    return np.unique(np.concatenate([pts, mids]), axis=0)


def uniform_centers(span, count, dim=1):
    """count-per-axis uniform center lattice on [-span, span]^dim."""
    g = np.linspace(-span, span, count)
    if dim == 1:
        return g[:, None]
    grids = np.meshgrid(*([g] * dim), indexing="ij")
    return np.stack([x.ravel() for x in grids], axis=1)
