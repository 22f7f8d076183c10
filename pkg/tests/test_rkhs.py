import itertools

import numpy as np
import pytest

from nodalcount import rkhs
from nodalcount.kernel import LimitKernelSpec


SPEC1 = LimitKernelSpec(1, 1)


def test_mollified_constant_at_origin():
    for t in (1.0, 0.5, 0.25):
        v = rkhs.mollifier_approximant([0], t, np.array([[0.0]]))
        assert v[0] == pytest.approx(1.0, abs=1e-8)


def test_mollified_constant_even():
    xs = np.linspace(-3, 3, 19)[:, None]
    v = rkhs.mollifier_approximant([0], 0.5, xs)
    assert np.allclose(v, v[::-1], atol=1e-12)


def test_mollifier_unit_integral():
    for dim in (1, 2):
        for t in (1.0, 0.25):
            m = rkhs.Mollifier(scale=t, dim=dim)
            nodes, weights = np.polynomial.legendre.leggauss(96)
            nodes = nodes * t
            weights = weights * t
            grids = np.meshgrid(*([nodes] * dim), indexing="ij")
            pts = np.stack([g.ravel() for g in grids], axis=1)
            w = weights
            for _ in range(dim - 1):
                w = np.multiply.outer(w, weights)
            total = (m(pts) * w.ravel()).sum()
            assert total == pytest.approx(1.0, abs=1e-7)


def test_mollifier_ladder_strictly_decreasing_1d():
    xs = np.linspace(-3, 3, 61)[:, None]
    for k in range(5):
        errs = []
        for t in (0.5, 0.25, 0.125):
            approx = rkhs.mollifier_approximant([k], t, xs)
            errs.append(np.abs(approx - xs[:, 0] ** k).max())
        assert errs[0] > errs[1] > errs[2]


def test_mollifier_ladder_2d_sample():
    g = np.linspace(-3, 3, 13)
    xs = np.array(list(itertools.product(g, g)))
    for k in ([1, 1], [2, 2]):
        errs = []
        for t in (0.5, 0.25, 0.125):
            approx = rkhs.mollifier_approximant(k, t, xs)
            target = xs[:, 0] ** k[0] * xs[:, 1] ** k[1]
            errs.append(np.abs(approx - target).max())
        assert errs[0] > errs[1] > errs[2]


def test_mollifier_input_validation():
    with pytest.raises(ValueError):
        rkhs.Mollifier(scale=0.0, dim=1)
    with pytest.raises(ValueError):
        rkhs.Mollifier(scale=1.5, dim=1)
    with pytest.raises(ValueError):
        rkhs.mollifier_approximant([1, 2], 0.5, np.array([[0.0]]))
    with pytest.raises(ValueError):
        rkhs.mollifier_approximant([-1], 0.5, np.array([[0.0]]))


def test_span_member_recovered_exactly():
    center = np.array([[0.7]])
    translate = rkhs.KernelTranslate(center=center[0], spec=SPEC1)
    fit = rkhs.fit_in_span(translate, center, SPEC1, ridge=0.0,
                           fit_points=np.linspace(-2, 2, 101)[:, None])
    assert fit.coeffs[0] == pytest.approx(1.0, abs=1e-12)
    assert fit.sup_residual < 1e-10


def test_linear_target_fit_and_center_doubling():
    fit_pts = np.linspace(-2, 2, 101)[:, None]
    target = lambda p: p[:, 0]  # noqa: E731
    residuals = []
    for count in (25, 49):
        fit = rkhs.fit_in_span(target, rkhs.uniform_centers(4.0, count), SPEC1,
                               ridge=1e-10, fit_points=fit_pts)
        residuals.append(fit.sup_residual)
    assert residuals[0] < 1e-2
    assert residuals[1] <= residuals[0] + 1e-12


def test_large_ridge_shrinks_coefficients():
    fit_pts = np.linspace(-2, 2, 101)[:, None]
    target = lambda p: p[:, 0]  # noqa: E731
    small = rkhs.fit_in_span(target, rkhs.uniform_centers(4.0, 25), SPEC1,
                             ridge=1e-10, fit_points=fit_pts)
    big = rkhs.fit_in_span(target, rkhs.uniform_centers(4.0, 25), SPEC1,
                           ridge=1e3, fit_points=fit_pts)
    assert np.linalg.norm(big.coeffs) < 1e-2 * np.linalg.norm(small.coeffs)


def test_fit_validation():
    with pytest.raises(ValueError):
        rkhs.fit_in_span(lambda p: p[:, 0], np.array([[0.0], [0.0]]), SPEC1)
    with pytest.raises(ValueError):
        rkhs.fit_in_span(lambda p: p[:, 0], np.array([[0.0]]), SPEC1, ridge=-1.0)


def test_translate_evaluation_matches_kernel():
    from nodalcount.kernel import limit_kernel

    kt = rkhs.KernelTranslate(center=np.array([1.5]), spec=SPEC1)
    xs = np.linspace(-2, 2, 7)[:, None]
    expect = [limit_kernel(SPEC1, x, [1.5]) for x in xs]
    assert np.allclose(kt(xs), np.asarray(expect).ravel(), atol=1e-12)
