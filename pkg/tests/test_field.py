import numpy as np
import pytest

from nodalcount import field as fd
from nodalcount.kernel import LimitKernelSpec, limit_kernel_radial


def test_spectral_sampler_deterministic():
    a = fd.sample_field_spectral(2, n_freq=64, rng=123)
    b = fd.sample_field_spectral(2, n_freq=64, rng=123)
    assert np.array_equal(a.freqs, b.freqs)
    assert np.array_equal(a.phases, b.phases)
    pts = np.random.default_rng(0).uniform(-3, 3, size=(20, 2))
    assert np.array_equal(a.values(pts), b.values(pts))


def test_frequencies_inside_unit_ball():
    s = fd.sample_field_spectral(2, freq_dim=3, n_freq=4096, rng=5)
    assert np.linalg.norm(s.freqs, axis=1).max() <= 1.0
    assert s.amplitude == pytest.approx(np.sqrt(2 * (4 * np.pi / 3) / 4096))


@pytest.fixture(scope="module")
def spectral_ensemble():
    nrep = 10_000
    probes = np.array([[0.0, 0.0], [1.0, 0.5], [2.5, -1.0], [-2.0, 2.0]])
    vals = np.empty((nrep, len(probes)))
    for i, stream in enumerate(fd.child_streams(2718, nrep)):
        f = fd.sample_field_spectral(2, n_freq=512, rng=stream)
        vals[i] = f.values(probes)
    return probes, vals


def test_spectral_covariance_matches_kernel(spectral_ensemble):
    probes, vals = spectral_ensemble
    D = np.linalg.norm(probes[:, None, :] - probes[None, :, :], axis=2)
    K = limit_kernel_radial(2, D.ravel()).reshape(D.shape)
    prods = vals[:, :, None] * vals[:, None, :]
    emp = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / np.sqrt(len(vals))
    assert (np.abs(emp - K) < 4 * se).all()


def test_spectral_mean_centered(spectral_ensemble):
    _, vals = spectral_ensemble
    se = vals.std(axis=0, ddof=1) / np.sqrt(len(vals))
    assert (np.abs(vals.mean(axis=0)) < 4 * se).all()


def test_spectral_marginals_near_gaussian(spectral_ensemble):
    # skewness and excess kurtosis at the default frequency count
    _, vals = spectral_ensemble
    n = len(vals)
    z = (vals - vals.mean(axis=0)) / vals.std(axis=0, ddof=0)
    skew = (z ** 3).mean(axis=0)
    kurt = (z ** 4).mean(axis=0) - 3.0
    assert (np.abs(skew) < 5 * np.sqrt(6.0 / n)).all()
    assert (np.abs(kurt) < 5 * np.sqrt(24.0 / n)).all()


def test_exact_sampler_degenerate_pair():
    pts = np.zeros((2, 2))
    v, _ = fd.sample_field_exact_grid(pts, LimitKernelSpec(2, 2), rng=9)
    assert abs(v[0] - v[1]) < 1e-4


def test_exact_sampler_covariance():
    spec = LimitKernelSpec(2, 2)
    pts = np.array([[0.0, 0.0], [1.2, 0.0], [0.0, 2.5]])
    nrep = 10_000
    vals = np.empty((nrep, 3))
    for i, stream in enumerate(fd.child_streams(31415, nrep)):
        vals[i], _ = fd.sample_field_exact_grid(pts, spec, rng=stream)
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    K = limit_kernel_radial(2, D.ravel()).reshape(D.shape)
    prods = vals[:, :, None] * vals[:, None, :]
    emp = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / np.sqrt(nrep)
    assert (np.abs(emp - K) < 4 * se).all()


def test_exact_sampler_exchangeable_under_relabeling():
    # permuting the grid points permutes the sample law: compare empirical
    # covariances of permuted and unpermuted runs
    spec = LimitKernelSpec(2, 2)
    pts = np.array([[0.0, 0.0], [1.0, 0.3], [-1.5, 0.8]])
    perm = np.array([2, 0, 1])
    nrep = 6000
    a = np.empty((nrep, 3))
    b = np.empty((nrep, 3))
    for i, stream in enumerate(fd.child_streams(555, nrep)):
        a[i], _ = fd.sample_field_exact_grid(pts, spec, rng=stream)
    for i, stream in enumerate(fd.child_streams(556, nrep)):
        b[i], _ = fd.sample_field_exact_grid(pts[perm], spec, rng=stream)
    emp_a = (a[:, :, None] * a[:, None, :]).mean(axis=0)[np.ix_(perm, perm)]
    emp_b = (b[:, :, None] * b[:, None, :]).mean(axis=0)
    se = 2.0 * emp_a.max() / np.sqrt(nrep)
    assert np.abs(emp_a - emp_b).max() < 5 * se


def test_exact_sampler_grid_cap():
    g = fd.GridSpec(center=(0.0, 0.0), radius=1.0, resolution=101)
    with pytest.raises(ValueError):
        fd.sample_field_exact_grid(g, LimitKernelSpec(2, 2), rng=0)


def test_tuple_reduces_to_single_sampler():
    (f,) = fd.sample_field_tuple(1, 2, n_freq=64, rng=77)
    g = fd.sample_field_spectral(2, n_freq=64, rng=fd.child_streams(77, 1)[0])
    assert np.array_equal(f.freqs, g.freqs)
    assert np.array_equal(f.phases, g.phases)


def test_tuple_cross_covariance_vanishes():
    nrep = 10_000
    x = np.array([[0.5, -0.5]])
    prods = np.empty(nrep)
    for i, stream in enumerate(fd.child_streams(999, nrep)):
        f1, f2 = fd.sample_field_tuple(2, 2, n_freq=128, rng=stream)
        prods[i] = f1.values(x)[0] * f2.values(x)[0]
    se = prods.std(ddof=1) / np.sqrt(nrep)
    assert abs(prods.mean()) < 4 * se


def test_grid_spec_properties():
    g = fd.GridSpec(center=(0.0, 1.0), radius=2.0, resolution=5)
    assert g.dim == 2
    assert g.spacing == pytest.approx(1.0)
    pts = g.points()
    assert pts.shape == (25, 2)
    assert pts[0, 1] == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        fd.GridSpec(center=(0.0,), radius=1.0, resolution=2)


def test_dump_and_load_roundtrip(tmp_path):
    g = fd.GridSpec(center=(0.0, 0.0), radius=1.0, resolution=7)
    f = fd.sample_field_spectral(2, n_freq=32, rng=3)
    vals = f.values(g.points())
    base = str(tmp_path / "realization")
    fd.dump_grid_realization(base, g, vals, seed=3)
    loaded, header = fd.load_grid_realization(base)
    assert np.array_equal(loaded.ravel(), vals)
    assert header["shape"] == [7, 7]
    assert header["seed"] == 3


def test_child_streams_deterministic_and_distinct():
    a = fd.child_streams(42, 3)
    b = fd.child_streams(42, 3)
    x = [s.standard_normal(4) for s in a]
    y = [s.standard_normal(4) for s in b]
    for xi, yi in zip(x, y):
        assert np.array_equal(xi, yi)
    assert not np.array_equal(x[0], x[1])
