"""Sampling the limiting Gaussian field whose covariance is the limit kernel.

Two samplers, cross-validated against each other:

* spectral: F(x) = sqrt(2 vol(B_N)/M) * sum_j cos(<xi_j, x> + phi_j) with
  frequencies xi_j uniform in the unit ball of R^N and uniform phases. Its
  covariance equals the limit kernel exactly for every M (over the frequency
  and phase randomness); marginals become Gaussian as M grows.
* exact: a dense multivariate-normal draw from the kernel matrix on a small
  grid, with a jitter ladder for the numerically rank-deficient matrix.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .kernel import LimitKernelSpec, ball_volume, limit_kernel_radial

DEFAULT_FREQ_COUNT = 512


class FactorizationError(np.linalg.LinAlgError):
    """Kernel matrix stayed non-PD through the whole jitter ladder."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform box grid: [center - R, center + R]^n, resolution points/axis."""

    center: tuple
    radius: float
    resolution: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.resolution < 3:
            raise ValueError("resolution must be >= 3")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / (self.resolution - 1)

    def axes(self):
        return [c + np.linspace(-self.radius, self.radius, self.resolution)
                for c in self.center]

    def points(self) -> np.ndarray:
        """Row-major mesh points, shape (resolution**dim, dim)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class SpectralFieldSample:
    """One realization of the randomized spectral representation."""

    freqs: np.ndarray     # (M, freq_dim), all inside the unit ball
    phases: np.ndarray    # (M,) in [0, 2pi)
    amplitude: float
    eval_dim: int

    @property
    def freq_dim(self) -> int:
        return self.freqs.shape[1]

    def values(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[1] != self.eval_dim:
            raise ValueError("points have the wrong dimension")
        return kernels.eval_spectral(pts, self.freqs, self.phases, self.amplitude)

    def __call__(self, points):
        return self.values(points)


def sample_field_spectral(eval_dim, freq_dim=None, n_freq=DEFAULT_FREQ_COUNT,
                          rng=None) -> SpectralFieldSample:
    """Draw frequencies uniform in the unit ball of R^freq_dim and phases."""
    if freq_dim is None:
        freq_dim = eval_dim
    if not (1 <= eval_dim <= freq_dim):
        raise ValueError("need 1 <= eval_dim <= freq_dim")
    if n_freq < 1:
        raise ValueError("need at least one frequency")
    rng = np.random.default_rng(rng)
    g = rng.standard_normal((n_freq, freq_dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = rng.random(n_freq) ** (1.0 / freq_dim)
    freqs = g * radii[:, None]
    phases = rng.random(n_freq) * 2 * np.pi
    amplitude = float(np.sqrt(2.0 * ball_volume(freq_dim) / n_freq))
    return SpectralFieldSample(freqs=freqs, phases=phases,
                               amplitude=amplitude, eval_dim=eval_dim)


EXACT_GRID_LIMIT = 10_000
JITTER_LADDER = (1e-10, 1e-8, 1e-6)


def sample_field_exact_grid(grid, spec: LimitKernelSpec, rng=None,
                            jitter_ladder=JITTER_LADDER):
    """Exact Gaussian draw on a small grid (or explicit point array).

    Returns (values, points). The kernel matrix gets jitter * K(0,0) added to
    its diagonal, escalating through the ladder until Cholesky succeeds.
    """
    pts = grid.points() if isinstance(grid, GridSpec) else np.atleast_2d(np.asarray(grid, dtype=np.float64))
    if len(pts) > EXACT_GRID_LIMIT:
        raise ValueError(f"exact sampler capped at {EXACT_GRID_LIMIT} points")
    if pts.shape[1] != spec.eval_dim:
        raise ValueError("grid dimension does not match the kernel spec")
    rng = np.random.default_rng(rng)
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    K = limit_kernel_radial(spec.freq_dim, D.ravel()).reshape(D.shape)
    k0 = ball_volume(spec.freq_dim)
    z = rng.standard_normal(len(pts))
    for jitter in jitter_ladder:
        try:
            L = np.linalg.cholesky(K + jitter * k0 * np.eye(len(pts)))
        except np.linalg.LinAlgError:
            continue
        return L @ z, pts
    raise FactorizationError("kernel matrix not PD after the jitter ladder")


def child_streams(rng_or_seed, count):
    """Independent child generators, deterministic and order-stable."""
    if isinstance(rng_or_seed, np.random.SeedSequence):
        seq = rng_or_seed
    elif isinstance(rng_or_seed, np.random.Generator):
        seq = rng_or_seed.bit_generator.seed_seq
    else:
        seq = np.random.SeedSequence(rng_or_seed)
    return [np.random.default_rng(s) for s in seq.spawn(count)]


def sample_field_tuple(count, eval_dim, freq_dim=None,
                       n_freq=DEFAULT_FREQ_COUNT, rng=None) -> tuple:
    """count independent spectral realizations (one child stream each)."""
    streams = child_streams(rng if rng is not None else 0, count)
    return tuple(
        sample_field_spectral(eval_dim, freq_dim, n_freq, rng=s) for s in streams
    )


def dump_grid_realization(path_base, grid: GridSpec, values, seed=None,
                          extra=None):
    """Row-major float64 dump with a JSON header sidecar."""
    values = np.asarray(values, dtype=np.float64)
    raw_path = f"{path_base}.f64"
    values.ravel().tofile(raw_path)
    header = {
        "format": "float64-row-major",
        "shape": [grid.resolution] * grid.dim,
        "grid": {"center": list(grid.center), "radius": grid.radius,
                 "resolution": grid.resolution},
        "seed": seed,
    }
    if extra:
        header.update(extra)
    hdr_path = f"{path_base}.json"
    with open(hdr_path, "w") as fh:
        json.dump(header, fh, sort_keys=True)
    return raw_path, hdr_path


def load_grid_realization(path_base):
    with open(f"{path_base}.json") as fh:
        header = json.load(fh)
    values = np.fromfile(f"{path_base}.f64").reshape(header["shape"])
    return values, header
