"""Reproducible Monte Carlo experiments: packing, barrier probabilities,
count scaling, and the lower-bound assembly that chains them together.

Every experiment consumes a master seed, derives one child stream per trial
(SeedSequence spawning), and reduces results in trial order, so aggregates
are independent of the thread count. Wilson intervals at 95% are used for
the barrier probabilities since they stay valid near p = 0.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import topology
from .ensemble import EnsembleSpec, covariance_exact, sample_polynomial_tuple, whitening_for
from .field import GridSpec, child_streams, sample_field_spectral
from .kernel import chart_at
from . import kernels

WILSON_Z = 1.959963984540054  # two-sided 95%
VARIANCE_CONVENTION = "unit"
DEGENERACY_BUDGET = 0.01


class DegeneracyBudgetError(RuntimeError):
    """More than the tolerated fraction of trials hit grid degeneracies."""


def wilson_interval(successes, trials, z=WILSON_Z):
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def run_trials(n_trials, worker, seed, threads=1):
    """worker(i, rng) per trial over spawned child streams, order-stable."""
    streams = child_streams(seed, n_trials)
    if threads is None or threads <= 1:
        return [worker(i, streams[i]) for i in range(n_trials)]
    from concurrent.futures import ThreadPoolExecutor

    results = [None] * n_trials
    with ThreadPoolExecutor(max_workers=threads) as ex:
        futures = {ex.submit(worker, i, streams[i]): i for i in range(n_trials)}
        for fut, i in futures.items():
            results[i] = fut.result()
    return results


# ---------------------------------------------------------------------------
# ball packing on round spheres
# ---------------------------------------------------------------------------


@dataclass
class PackingResult:
    centers: np.ndarray      # (count, dim+1) unit vectors
    radius: float
    count: int
    min_separation: float    # smallest pairwise geodesic distance
    coverage_ok: bool        # audit: every probe within 2*radius of a center

    def __post_init__(self):
        if self.count and self.min_separation < 2 * self.radius - 1e-12:
            raise ValueError("packing violates the pairwise separation invariant")


def _sphere_candidates(dim, radius):
    if dim == 1:
        k = int(np.ceil(2 * np.pi / (radius / 4.0))) + 1
        th = np.linspace(0.0, 2 * np.pi, k, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if dim == 2:
        # Fibonacci lattice, spacing well under radius/2
        k = max(64, int(np.ceil(220.0 / radius ** 2)))
        i = np.arange(k)
        z = 1.0 - (2 * i + 1.0) / k
        phi = i * (np.pi * (3.0 - np.sqrt(5.0)))
        s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    raise NotImplementedError("packing supports S^1 and S^2")


def _uniform_sphere(dim, n, rng):
    v = rng.standard_normal((n, dim + 1))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def pack_balls(dim, radius, seed=0, audit_probes=10_000, max_rounds=6) -> PackingResult:
    """Greedy maximal packing of geodesic balls on S^dim.

    Centers stay pairwise >= 2*radius apart; a probe-based augmentation pass
    makes the 2*radius coverage audit pass exactly on fresh probes (an
    uncovered probe is itself a legal center).
    """
    if not (0 < radius < np.pi / 4):
        raise ValueError("radius must lie in (0, pi/4)")
    cos2r = np.cos(2.0 * radius)
    cands = _sphere_candidates(dim, radius)
    accepted = cands[kernels.greedy_pack(cands, cos2r)]
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0FFEE)))
    coverage_ok = False
    for _ in range(max_rounds):
        probes = _uniform_sphere(dim, audit_probes, rng)
        dots = probes @ accepted.T
        uncovered = dots.max(axis=1) < cos2r
        if not uncovered.any():
            coverage_ok = True
            break
        extra = probes[uncovered]
        keep = kernels.greedy_pack(extra, cos2r, accepted_init=accepted)
        accepted = np.concatenate([accepted, extra[keep]])
    dots = accepted @ accepted.T
    np.fill_diagonal(dots, -1.0)
    min_sep = float(np.arccos(np.clip(dots.max(), -1.0, 1.0)))
    return PackingResult(centers=accepted, radius=float(radius),
                         count=len(accepted), min_separation=min_sep,
                         coverage_ok=coverage_ok)


# ---------------------------------------------------------------------------
# barrier probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LimitFieldModel:
    """Limit Gaussian field on R^eval_dim, sampled spectrally."""

    eval_dim: int
    freq_dim: int | None = None
    n_freq: int = 512
    resolution: int = 193

    @property
    def label(self):
        return "limit"


@dataclass(frozen=True)
class PolynomialBallModel:
    """Polynomial ensemble restricted to a chart ball of radius R/m."""

    ambient_dim: int
    degree: int
    center: tuple | None = None   # default: north pole
    resolution: int = 97

    @property
    def label(self):
        return self.degree


@dataclass
class BarrierEstimate:
    p_hat: float
    trials: int
    successes: int
    ci_low: float
    ci_high: float
    sigma: topology.TopologySignature
    ball_radius: float            # R for the limit field, R/m rescaled for m
    model: object                 # int degree or "limit"
    degenerate_trials: int = 0

    def __post_init__(self):
        if not (self.ci_low - 1e-12 <= self.p_hat <= self.ci_high + 1e-12):
            raise ValueError("estimate must sit inside its interval")


@dataclass
class BarrierResult:
    estimates: list               # one BarrierEstimate per radius, ascending
    radii: list
    events: np.ndarray            # (effective_trials, n_radii) bool
    degenerate_trials: int
    trial_counts: np.ndarray      # successes per radius, by trial order


def _barrier_worker_limit(model, sigma, radii, sigma_mode):
    rmax = max(radii)
    grid = GridSpec(center=(0.0,) * model.eval_dim, radius=float(rmax),
                    resolution=model.resolution)

    def worker(i, rng):
        f = sample_field_spectral(model.eval_dim, model.freq_dim,
                                  model.n_freq, rng=rng)
        try:
            rep = topology.extract_components_hypersurface(f, grid)
        except topology.DegeneracyError:
            return None
        return tuple(
            topology.count_N_sigma(rep.restrict_to_ball(R), sigma, sigma_mode) >= 1
            for R in radii
        )

    return worker


def _barrier_worker_poly(model, sigma, radii, sigma_mode):
    spec = EnsembleSpec(model.ambient_dim, model.degree)
    factor = whitening_for(spec)
    center = model.center
    if center is None:
        center = tuple([0.0] * model.ambient_dim + [1.0])
    chart = chart_at(np.asarray(center, dtype=np.float64))
    m = model.degree
    rmax = max(radii) / m
    n = model.ambient_dim  # chart dimension; the ensemble lives on S^N
    grid = GridSpec(center=(0.0,) * n, radius=float(rmax), resolution=model.resolution)

    def worker(i, rng):
        (poly,) = sample_polynomial_tuple(factor, 1, rng)

        def f(w):
            return poly.values(chart.exp(w))

        try:
            rep = topology.extract_components_hypersurface(f, grid)
        except topology.DegeneracyError:
            return None
        return tuple(
            topology.count_N_sigma(rep.restrict_to_ball(R / m), sigma, sigma_mode) >= 1
            for R in radii
        )

    return worker


def barrier_probability(model, sigma, radii, trials, seed, threads=1,
                        sigma_mode="strict") -> BarrierResult:
    """Fraction of trials whose zero set has a model-signature component
    fully inside the ball, per radius, with Wilson intervals.

    Radii are evaluated on one shared largest-radius grid per trial, so the
    per-trial event sets are nested exactly and p_hat is nondecreasing in R.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    radii = sorted(float(r) for r in np.atleast_1d(radii))
    if isinstance(model, LimitFieldModel):
        worker = _barrier_worker_limit(model, sigma, radii, sigma_mode)
        scale = 1.0
    elif isinstance(model, PolynomialBallModel):
        worker = _barrier_worker_poly(model, sigma, radii, sigma_mode)
        scale = 1.0 / model.degree
    else:
        raise TypeError("model must be LimitFieldModel or PolynomialBallModel")
    raw = run_trials(trials, worker, seed, threads)
    events = np.array([r for r in raw if r is not None], dtype=bool)
    degenerate = sum(1 for r in raw if r is None)
    if degenerate > DEGENERACY_BUDGET * trials:
        raise DegeneracyBudgetError(
            f"{degenerate}/{trials} degenerate trials exceed the {DEGENERACY_BUDGET:.0%} budget")
    if len(events) and not (events[:, :-1] <= events[:, 1:]).all():
        raise AssertionError("barrier events must be monotone in the radius")
    estimates = []
    eff = len(events)
    for j, R in enumerate(radii):
        k = int(events[:, j].sum()) if eff else 0
        lo, hi = wilson_interval(k, eff) if eff else (0.0, 1.0)
        estimates.append(BarrierEstimate(
            p_hat=k / eff if eff else 0.0, trials=eff, successes=k,
            ci_low=lo, ci_high=hi, sigma=sigma, ball_radius=R * scale,
            model=model.label, degenerate_trials=degenerate))
    return BarrierResult(estimates=estimates, radii=radii, events=events,
                         degenerate_trials=degenerate,
                         trial_counts=events.sum(axis=0) if eff else np.zeros(len(radii)))


# ---------------------------------------------------------------------------
# expected-count scaling on the sphere
# ---------------------------------------------------------------------------


@dataclass
class ScalingRow:
    degree: int
    mean: float
    std_error: float
    trials: int
    degenerate_trials: int
    counts: np.ndarray


@dataclass
class ScalingResult:
    rows: list
    slope: float
    intercept: float


def count_sigma_on_sphere(poly, resolution, sigma, quotient="none",
                          sigma_mode="strict"):
    grid = topology.CubeSphereGrid(resolution)
    rep = topology.extract_components_sphere(poly.values, grid, quotient=quotient)
    return topology.count_N_sigma(rep, sigma, sigma_mode)


def expected_count_scaling(degrees, sigma, trials, seed, ambient_dim=2,
                           resolution=257, quotient="none", threads=1,
                           sigma_mode="strict") -> ScalingResult:
    """Monte Carlo means of the component count per degree plus the weighted
    log-log slope (the empirically falsifiable growth exponent)."""
    rows = []
    for m in degrees:
        spec = EnsembleSpec(ambient_dim, int(m))
        factor = whitening_for(spec)

        def worker(i, rng, factor=factor):
            (poly,) = sample_polynomial_tuple(factor, 1, rng)
            try:
                return count_sigma_on_sphere(poly, resolution, sigma,
                                             quotient, sigma_mode)
            except topology.DegeneracyError:
                return None

        raw = run_trials(trials, worker, (seed, int(m)), threads)
        counts = np.array([r for r in raw if r is not None], dtype=np.float64)
        degenerate = sum(1 for r in raw if r is None)
        if degenerate > DEGENERACY_BUDGET * trials:
            raise DegeneracyBudgetError(
                f"degree {m}: {degenerate}/{trials} degenerate trials")
        se = float(counts.std(ddof=1) / np.sqrt(len(counts))) if len(counts) > 1 else 0.0
        rows.append(ScalingRow(degree=int(m), mean=float(counts.mean()),
                               std_error=se, trials=len(counts),
                               degenerate_trials=degenerate, counts=counts))
    slope, intercept = fit_loglog_slope(rows)
    return ScalingResult(rows=rows, slope=slope, intercept=intercept)


def fit_loglog_slope(rows):
    """Weighted least squares of log(mean) on log(m), weights 1/se_log^2."""
    usable = [r for r in rows if r.mean > 0]
    if len(usable) < 2:
        return float("nan"), float("nan")
    x = np.log([r.degree for r in usable])
    y = np.log([r.mean for r in usable])
    selog = np.array([max(r.std_error / r.mean, 1e-9) for r in usable])
    w = 1.0 / selog ** 2
    W = np.sum(w)
    xb = np.sum(w * x) / W
    yb = np.sum(w * y) / W
    slope = float(np.sum(w * (x - xb) * (y - yb)) / np.sum(w * (x - xb) ** 2))
    return slope, float(yb - slope * xb)


# ---------------------------------------------------------------------------
# Kac-Rice oracle on the circle (independent pipeline audit)
# ---------------------------------------------------------------------------


def kac_rice_zero_count(degree, fd_step=1e-4) -> float:
    """Expected zero count on S^1 from spectral moments of the covariance:
    E = (L/pi) sqrt(lambda_2/lambda_0) with L = 2*pi; lambda_2 by central
    finite differences of the exact covariance along the circle."""
    spec = EnsembleSpec(1, int(degree))
    x0 = np.array([1.0, 0.0])
    xh = np.array([np.cos(fd_step), np.sin(fd_step)])
    lam0 = covariance_exact(spec, x0, x0)
    rho_h = covariance_exact(spec, x0, xh)
    lam2 = 2.0 * (lam0 - rho_h) / fd_step ** 2
    return 2.0 * float(np.sqrt(lam2 / lam0))


def mc_zero_count(degree, trials, seed, resolution=4096, threads=1):
    """Monte Carlo mean zero count on S^1 by cyclic sign changes."""
    spec = EnsembleSpec(1, int(degree))
    factor = whitening_for(spec)
    th = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
    pts = np.stack([np.cos(th), np.sin(th)], axis=1)
    from .ensemble import multi_indices

    alphas = multi_indices(spec)

    def worker(i, rng):
        coeffs = factor.transform @ rng.standard_normal(spec.basis_size)
        vals = kernels.eval_monomials(pts, alphas, coeffs)
        return kernels.count_cyclic_crossings(vals)

    counts = np.array(run_trials(trials, worker, seed, threads), dtype=np.float64)
    se = float(counts.std(ddof=1) / np.sqrt(len(counts)))
    return float(counts.mean()), se, counts


# ---------------------------------------------------------------------------
# lower-bound assembly
# ---------------------------------------------------------------------------


@dataclass
class AssemblyResult:
    degree: int
    ball_radius_param: float      # R; balls have geodesic radius R/m
    mean_count: float
    mean_se: float
    packing_count: int
    barrier: BarrierEstimate
    barrier_spot: BarrierEstimate
    rhs: float
    rhs_ci: tuple
    lhs_ci: tuple
    holds_within_ci: bool


def lower_bound_assembly(degree, radius_param, sigma, trials_mean,
                         trials_barrier, seed, ambient_dim=2,
                         resolution_sphere=257, resolution_chart=97,
                         threads=1) -> AssemblyResult:
    """Check mean N_sigma >= sum of per-ball barrier probabilities.

    The balls are a maximal packing at radius R/m; by rotation invariance a
    single barrier estimate at the north pole stands in for every center (a
    second center is spot-checked by the tests).
    """
    m = int(degree)
    scaling = expected_count_scaling([m], sigma, trials_mean, (seed, 1),
                                     ambient_dim=ambient_dim,
                                     resolution=resolution_sphere, threads=threads)
    row = scaling.rows[0]
    pack = pack_balls(ambient_dim, radius_param / m, seed=seed)
    model = PolynomialBallModel(ambient_dim=ambient_dim, degree=m,
                                resolution=resolution_chart)
    bres = barrier_probability(model, sigma, [radius_param], trials_barrier,
                               (seed, 2), threads=threads)
    est = bres.estimates[0]
    spot_center = np.array([1.0] * (ambient_dim + 1)) / np.sqrt(ambient_dim + 1)
    model2 = PolynomialBallModel(ambient_dim=ambient_dim, degree=m,
                                 center=tuple(spot_center),
                                 resolution=resolution_chart)
    bres2 = barrier_probability(model2, sigma, [radius_param],
                                max(100, trials_barrier // 4), (seed, 3),
                                threads=threads)
    rhs = pack.count * est.p_hat
    rhs_ci = (pack.count * est.ci_low, pack.count * est.ci_high)
    lhs_ci = (row.mean - WILSON_Z * row.std_error, row.mean + WILSON_Z * row.std_error)
    return AssemblyResult(
        degree=m, ball_radius_param=radius_param, mean_count=row.mean,
        mean_se=row.std_error, packing_count=pack.count, barrier=est,
        barrier_spot=bres2.estimates[0], rhs=rhs, rhs_ci=rhs_ci, lhs_ci=lhs_ci,
        holds_within_ci=bool(lhs_ci[1] >= rhs_ci[0]),
    )


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

MANIFEST_SCHEMA = 1


@dataclass
class ExperimentManifest:
    command: str
    seed: int
    params: dict
    calibration: dict = field(default_factory=dict)
    trials: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    status: str = "started"

    def to_dict(self):
        return {
            "schema": MANIFEST_SCHEMA,
            "command": self.command,
            "seed": self.seed,
            "params": self.params,
            "variance_convention": VARIANCE_CONVENTION,
            "calibration": self.calibration,
            "trials": self.trials,
            "aggregates": self.aggregates,
            "files": self.files,
            "status": self.status,
        }

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
        return path


def load_manifest(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"unsupported manifest schema {data.get('schema')!r}")
    return data


def replay_manifest(path, out_dir, threads=1):
    """Re-run the experiment recorded in a manifest into ``out_dir``."""
    from . import cli

    data = load_manifest(path)
    return cli.run_params(data["command"], dict(data["params"]), out_dir,
                          threads=threads)
