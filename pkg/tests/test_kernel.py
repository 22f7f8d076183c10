import os

import numpy as np
import pytest

from nodalcount import kernel as kn


SPECS = [kn.LimitKernelSpec(1, 1), kn.LimitKernelSpec(2, 2), kn.LimitKernelSpec(3, 3)]


def test_diagonal_is_ball_volume():
    u = np.array([0.4, -1.0, 2.0])
    assert kn.limit_kernel(SPECS[0], u[:1], u[:1]) == pytest.approx(2.0)
    assert kn.limit_kernel(SPECS[1], u[:2], u[:2]) == pytest.approx(np.pi)
    assert kn.limit_kernel(SPECS[2], u, u) == pytest.approx(4 * np.pi / 3)


def test_dim1_closed_form(rng):
    for _ in range(20):
        u, v = rng.uniform(-5, 5, size=2)
        d = abs(u - v)
        expect = 2.0 if d == 0 else 2 * np.sin(d) / d
        assert kn.limit_kernel(SPECS[0], [u], [v]) == pytest.approx(expect, rel=1e-12)


def test_translation_invariance(rng):
    for spec in SPECS:
        n = spec.eval_dim
        for _ in range(30):
            u = rng.uniform(-3, 3, n)
            v = rng.uniform(-3, 3, n)
            t = rng.uniform(-5, 5, n)
            assert kn.limit_kernel(spec, u + t, v + t) == pytest.approx(
                kn.limit_kernel(spec, u, v), abs=1e-10)


def test_isotropy(rng):
    for spec in SPECS[1:]:
        n = spec.eval_dim
        for _ in range(20):
            u = rng.uniform(-3, 3, n)
            q = np.linalg.qr(rng.standard_normal((n, n)))[0]
            assert kn.limit_kernel(spec, q @ u, np.zeros(n)) == pytest.approx(
                kn.limit_kernel(spec, u, np.zeros(n)), abs=1e-10)


def test_series_matches_bessel_at_switch():
    for N in (1, 2, 3):
        below = kn.limit_kernel_radial(N, 0.99e-4)
        above = kn.limit_kernel_radial(N, 1.01e-4)
        assert below == pytest.approx(above, rel=1e-10)


def test_kernel_matrix_positive_semidefinite(rng):
    for spec in SPECS:
        pts = rng.uniform(-4, 4, size=(20, spec.eval_dim))
        D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        K = kn.limit_kernel_radial(spec.freq_dim, D.ravel()).reshape(D.shape)
        assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_quadrature_oracle_diag():
    assert kn.limit_kernel_quadrature(SPECS[2], np.zeros(3), np.zeros(3)) == \
        pytest.approx(4 * np.pi / 3, abs=1e-9)


def test_quadrature_symmetric(rng):
    u = rng.uniform(-2, 2, 2)
    v = rng.uniform(-2, 2, 2)
    assert kn.limit_kernel_quadrature(SPECS[1], u, v) == pytest.approx(
        kn.limit_kernel_quadrature(SPECS[1], v, u), abs=1e-12)


def test_mutual_oracle_agreement(rng):
    for spec in SPECS:
        n = spec.eval_dim
        for _ in range(20):
            u = rng.uniform(-3, 3, n)
            v = rng.uniform(-3, 3, n)
            closed = kn.limit_kernel(spec, u, v)
            oracle = kn.limit_kernel_quadrature(spec, u, v, tol=1e-9)
            assert abs(float(closed) - oracle) < 1e-8


def test_quadrature_rejects_bad_tol():
    with pytest.raises(ValueError):
        kn.limit_kernel_quadrature(SPECS[0], [0.0], [1.0], tol=0.0)


def test_chart_exp_on_sphere(rng):
    chart = kn.equatorial_chart(3)
    u = rng.uniform(-2, 2, size=(50, 3))
    pts = chart.exp(u)
    assert np.abs(np.linalg.norm(pts, axis=1) - 1).max() < 1e-12
    assert np.allclose(chart.exp(np.zeros((1, 3)))[0], chart.base_point)


def test_chart_validation():
    with pytest.raises(ValueError):
        kn.ChartAtPoint(base_point=np.array([1.0, 1.0]), frame=np.eye(2))
    with pytest.raises(ValueError):
        kn.ChartAtPoint(base_point=np.array([1.0, 0.0]),
                        frame=np.array([[1.0, 0.0]]))


def test_chart_at_arbitrary_point(rng):
    x = rng.standard_normal(3)
    chart = kn.chart_at(x)
    assert np.abs(chart.frame @ chart.base_point).max() < 1e-10
    pts = chart.exp(rng.uniform(-1, 1, size=(10, 2)))
    assert np.abs(np.linalg.norm(pts, axis=1) - 1).max() < 1e-12


def test_rescaled_kernel_symmetry():
    from nodalcount.ensemble import EnsembleSpec

    spec = EnsembleSpec(2, 12)
    chart = kn.equatorial_chart(2)
    u = np.array([0.7, -1.1])
    v = np.array([2.0, 0.3])
    a = kn.rescaled_kernel(spec, chart, 2, u, v)
    b = kn.rescaled_kernel(spec, chart, 2, v, u)
    assert a == pytest.approx(b, rel=1e-12)


def test_rescaled_kernel_chart_radius():
    from nodalcount.ensemble import EnsembleSpec

    spec = EnsembleSpec(1, 2)
    chart = kn.equatorial_chart(1)
    with pytest.raises(ValueError):
        kn.rescaled_kernel(spec, chart, 1, np.array([7.0]), np.array([0.0]))


def test_calibration_exponent_matches_frequency_dim():
    for N in (1, 2):
        cal = kn.calibrate_rescaling(N, N, [10, 20, 40])
        assert cal.exponent == N
        assert abs(cal.exponent_fit - N) < 0.2
        assert cal.constant > 0


def test_convergence_report_shapes_and_monotonicity(tmp_path):
    rows = kn.convergence_report(1, 1, [10])
    assert len(rows) == 1
    rows = kn.convergence_report(1, 1, [10, 20, 40])
    errs = [r[1] for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # restriction case: ambient frequency ball, 1D arguments
    rows = kn.convergence_report(2, 1, [10, 20, 40],
                                 out_csv=tmp_path / "conv.csv",
                                 out_json=tmp_path / "conv.json")
    errs = [r[1] for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    text = (tmp_path / "conv.csv").read_text().splitlines()
    assert text[0] == "m,sup_error,constant"
    assert len(text) == 4
    assert os.path.getsize(tmp_path / "conv.json") > 0


def test_convergence_report_rejects_grid_outside_ball():
    with pytest.raises(ValueError):
        kn.convergence_report(1, 1, [10, 20], radius=1.0,
                              grid=np.array([[3.0]]))
