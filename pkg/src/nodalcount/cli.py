"""Command-line entry point.

Every run derives a name from (subcommand, seed, config hash), writes its
manifest before computing, then rewrites it with results and CSV summaries.
Exit codes: 0 success, 2 configuration error, 3 degeneracy budget breach.
Errors are also emitted as one JSON object on stderr.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import kernel as kn
from . import output, rkhs, topology
from .backend import backend_name
from .ensemble import ConditioningError
from .field import GridSpec, dump_grid_realization, sample_field_spectral, child_streams
from .kernel import LimitKernelSpec

ENV_OUTDIR = "NODALCOUNT_OUTDIR"
SUBCOMMANDS = ("kernel-check", "field-sample", "barrier", "scaling",
               "packing", "kacrice", "rkhs-fit")


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def _emit_error(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> _Parser:
    p = _Parser(prog="nodalcount",
                description="Monte Carlo experiments on zero sets of random "
                            "polynomial ensembles and their limiting Gaussian field")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=str, default=None,
                        help=f"output directory (default ${ENV_OUTDIR} or ./runs)")
        sp.add_argument("--threads", type=int, default=1,
                        help="trial-level worker threads (wall time only)")

    sp = sub.add_parser("kernel-check", help="limit-kernel oracle agreement and "
                                             "rescaled-covariance convergence table")
    sp.add_argument("--ambient-dim", type=int, default=2)
    sp.add_argument("--variety-dim", type=int, default=None)
    sp.add_argument("--degrees", type=_int_list, default=[10, 20, 40, 80])
    sp.add_argument("--pairs", type=int, default=100)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--grid-radius", type=float, default=3.0)
    common(sp)

    sp = sub.add_parser("field-sample", help="dump one spectral field realization on a grid")
    sp.add_argument("--eval-dim", type=int, default=2)
    sp.add_argument("--freq-dim", type=int, default=None)
    sp.add_argument("--n-freq", type=int, default=512)
    sp.add_argument("--radius", type=float, default=6.0)
    sp.add_argument("--resolution", type=int, default=129)
    common(sp)

    sp = sub.add_parser("barrier", help="probability that a model-signature "
                                        "component lies inside the ball")
    sp.add_argument("--model", choices=("limit", "poly"), default="limit")
    sp.add_argument("--eval-dim", type=int, default=2, help="limit model dimension n")
    sp.add_argument("--freq-dim", type=int, default=None)
    sp.add_argument("--n-freq", type=int, default=512)
    sp.add_argument("--ambient-dim", type=int, default=2, help="poly model N")
    sp.add_argument("--degree", type=int, default=20, help="poly model degree m")
    sp.add_argument("--sigma", type=str, default="circle")
    sp.add_argument("--R", type=_float_list, default=[3.0, 6.0],
                    help="ball radius parameter(s), comma separated")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--resolution", type=int, default=97)
    common(sp)

    sp = sub.add_parser("scaling", help="mean component count versus degree "
                                        "with the fitted log-log slope")
    sp.add_argument("--ambient-dim", type=int, default=2)
    sp.add_argument("--degrees", type=_int_list, default=[5, 10, 20, 40])
    sp.add_argument("--sigma", type=str, default="circle")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--resolution", type=int, default=257)
    sp.add_argument("--quotient", choices=("none", "antipodal"), default="none")
    common(sp)

    sp = sub.add_parser("packing", help="greedy maximal ball packings")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--radii", type=_float_list, default=None)
    sp.add_argument("--R-pack", type=float, default=2.0,
                    help="with --degrees, pack at radius R-pack/m")
    sp.add_argument("--degrees", type=_int_list, default=None)
    common(sp)

    sp = sub.add_parser("kacrice", help="zero-count audit on the circle: "
                                        "analytic oracle versus Monte Carlo")
    sp.add_argument("--degrees", type=_int_list, default=[5, 10, 20, 40])
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--resolution", type=int, default=4096)
    common(sp)

    sp = sub.add_parser("rkhs-fit", help="fit targets in the span of kernel translates")
    sp.add_argument("--center-counts", type=_int_list, default=[25, 49])
    sp.add_argument("--span", type=float, default=4.0)
    sp.add_argument("--fit-radius", type=float, default=2.0)
    sp.add_argument("--ridge", type=float, default=1e-10)
    sp.add_argument("--target", type=str, default="x1",
                    help="x1 or monomial:k (exponent of x1)")
    common(sp)

    sp = sub.add_parser("replay", help="re-run the experiment recorded in a manifest")
    sp.add_argument("manifest", type=str)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--threads", type=int, default=1)
    return p


# ---------------------------------------------------------------------------
# runners (one per subcommand); each returns the aggregates dict
# ---------------------------------------------------------------------------


def _run_kernel_check(params, paths, manifest):
    N = params["ambient_dim"]
    n = params["variety_dim"] or N
    cal = kn.calibrate_rescaling(N, n, params["degrees"])
    manifest.calibration = {
        "scale_exponent": cal.exponent,
        "scale_exponent_fit": cal.exponent_fit,
        "constant": cal.constant,
        "diag_ratios": list(cal.diag_ratios),
    }
    rows = kn.convergence_report(N, n, params["degrees"],
                                 radius=params["grid_radius"], calibration=cal,
                                 out_csv=paths["csv"], out_json=paths["json"])
    rng = np.random.default_rng(np.random.SeedSequence((params["seed"], 1)))
    spec = LimitKernelSpec(freq_dim=N, eval_dim=n)
    max_err = 0.0
    for _ in range(params["pairs"]):
        u = rng.uniform(-3, 3, size=n)
        v = rng.uniform(-3, 3, size=n)
        closed = kn.limit_kernel(spec, u, v)
        oracle = kn.limit_kernel_quadrature(spec, np.pad(u, (0, N - n)),
                                            np.pad(v, (0, N - n)), tol=params["tol"] / 10)
        max_err = max(max_err, abs(float(closed) - oracle))
    sup_errors = [r[1] for r in rows]
    return {
        "oracle_max_abs_err": max_err,
        "oracle_within_tol": max_err <= params["tol"],
        "sup_errors": sup_errors,
        "strictly_decreasing": all(b < a for a, b in zip(sup_errors, sup_errors[1:])),
        "constant": cal.constant,
        "scale_exponent": cal.exponent,
    }


def _run_field_sample(params, paths, manifest):
    rng = child_streams(params["seed"], 1)[0]
    f = sample_field_spectral(params["eval_dim"], params["freq_dim"],
                              params["n_freq"], rng=rng)
    grid = GridSpec(center=(0.0,) * params["eval_dim"], radius=params["radius"],
                    resolution=params["resolution"])
    vals = f.values(grid.points())
    base = str(paths["base"]) + "_field"
    raw, hdr = dump_grid_realization(base, grid, vals, seed=params["seed"],
                                     extra={"n_freq": params["n_freq"],
                                            "freq_dim": f.freq_dim})
    manifest.files["field_raw"] = os.path.basename(raw)
    manifest.files["field_header"] = os.path.basename(hdr)
    stats = {"min": float(vals.min()), "max": float(vals.max()),
             "mean": float(vals.mean()), "var": float(vals.var())}
    output.write_csv(paths["csv"], ["stat", "value"],
                     [[k, v] for k, v in sorted(stats.items())])
    return stats


def _run_barrier(params, paths, manifest):
    sigma = topology.signature_from_name(params["sigma"])
    if params["model"] == "limit":
        model = ex.LimitFieldModel(eval_dim=params["eval_dim"],
                                   freq_dim=params["freq_dim"],
                                   n_freq=params["n_freq"],
                                   resolution=params["resolution"])
    else:
        model = ex.PolynomialBallModel(ambient_dim=params["ambient_dim"],
                                       degree=params["degree"],
                                       resolution=params["resolution"])
    res = ex.barrier_probability(model, sigma, params["R"], params["trials"],
                                 params["seed"], threads=params["threads"])
    rows = [
        [e.ball_radius, e.p_hat, e.ci_low, e.ci_high, e.trials, e.successes,
         e.degenerate_trials]
        for e in res.estimates
    ]
    output.write_csv(paths["csv"],
                     ["ball_radius", "p_hat", "ci_low", "ci_high", "trials",
                      "successes", "degenerate_trials"],
                     rows)
    manifest.trials = res.events.astype(int).tolist()
    return {
        "p_hat": [e.p_hat for e in res.estimates],
        "ci_low": [e.ci_low for e in res.estimates],
        "ci_high": [e.ci_high for e in res.estimates],
        "degenerate_trials": res.degenerate_trials,
    }


def _run_scaling(params, paths, manifest):
    sigma = topology.signature_from_name(params["sigma"])
    res = ex.expected_count_scaling(params["degrees"], sigma, params["trials"],
                                    params["seed"],
                                    ambient_dim=params["ambient_dim"],
                                    resolution=params["resolution"],
                                    quotient=params["quotient"],
                                    threads=params["threads"])
    rows = [[r.degree, r.mean, r.std_error, r.trials, r.degenerate_trials]
            for r in res.rows]
    output.write_csv(paths["csv"],
                     ["m", "mean_count", "std_error", "trials", "degenerate_trials"],
                     rows)
    manifest.trials = {str(r.degree): r.counts.astype(int).tolist() for r in res.rows}
    return {"slope": res.slope, "intercept": res.intercept,
            "means": [r.mean for r in res.rows]}


def _run_packing(params, paths, manifest):
    if params["degrees"]:
        radii = [params["R_pack"] / m for m in params["degrees"]]
        labels = params["degrees"]
    else:
        radii = params["radii"] or [0.3, 0.15]
        labels = ["" for _ in radii]
    rows = []
    counts = []
    for lab, r in zip(labels, radii):
        pk = ex.pack_balls(params["dim"], r, seed=params["seed"])
        rows.append([lab, r, pk.count, pk.min_separation, pk.coverage_ok])
        counts.append(pk.count)
    output.write_csv(paths["csv"],
                     ["m", "radius", "count", "min_separation", "coverage_ok"],
                     rows)
    return {"counts": counts, "radii": radii}


def _run_kacrice(params, paths, manifest):
    rows = []
    trials_rec = {}
    for m in params["degrees"]:
        oracle = ex.kac_rice_zero_count(m)
        mean, se, counts = ex.mc_zero_count(m, params["trials"],
                                            (params["seed"], m),
                                            resolution=params["resolution"],
                                            threads=params["threads"])
        rows.append([m, oracle, mean, se, params["trials"],
                     abs(mean - oracle) / oracle])
        trials_rec[str(m)] = counts.astype(int).tolist()
    output.write_csv(paths["csv"],
                     ["m", "kac_rice", "mc_mean", "mc_std_error", "trials", "rel_err"],
                     rows)
    manifest.trials = trials_rec
    return {"rel_errs": [r[5] for r in rows]}


def _run_rkhs_fit(params, paths, manifest):
    spec = LimitKernelSpec(1, 1)
    target_name = params["target"]
    if target_name == "x1":
        target = lambda p: p[:, 0]  # noqa: E731
    elif target_name.startswith("monomial:"):
        k = int(target_name.split(":", 1)[1])
        target = lambda p: p[:, 0] ** k  # noqa: E731
    else:
        raise _CliError(f"unknown target {target_name!r}")
    fit_pts = np.linspace(-params["fit_radius"], params["fit_radius"], 101)[:, None]
    rows = []
    for c in params["center_counts"]:
        fit = rkhs.fit_in_span(target, rkhs.uniform_centers(params["span"], c),
                               spec, ridge=params["ridge"], fit_points=fit_pts)
        rows.append([c, fit.sup_residual, fit.ridge])
    output.write_csv(paths["csv"], ["centers", "sup_residual", "ridge"], rows)
    return {"residuals": [r[1] for r in rows]}


_RUNNERS = {
    "kernel-check": _run_kernel_check,
    "field-sample": _run_field_sample,
    "barrier": _run_barrier,
    "scaling": _run_scaling,
    "packing": _run_packing,
    "kacrice": _run_kacrice,
    "rkhs-fit": _run_rkhs_fit,
}


def _params_from_args(args) -> dict:
    skip = {"subcommand", "out", "threads", "manifest"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run_params(subcommand, params, out_dir, threads=1):
    """Execute one subcommand from its params dict; returns (paths, aggregates).

    The manifest is written before any computation starts and rewritten with
    results afterwards, so a crashed run still records its configuration.
    """
    if subcommand not in _RUNNERS:
        raise _CliError(f"unknown subcommand {subcommand!r}")
    out = Path(out_dir or os.environ.get(ENV_OUTDIR, "runs"))
    out.mkdir(parents=True, exist_ok=True)
    params = dict(params)
    params["threads"] = threads
    hash_params = {k: v for k, v in params.items() if k != "threads"}
    tag = output.config_hash(hash_params)
    base = out / f"{subcommand.replace('-', '_')}_seed{params.get('seed', 0)}_{tag}"
    paths = {
        "base": base,
        "manifest": f"{base}.manifest.json",
        "csv": f"{base}.csv",
        "json": f"{base}.grid.json",
    }
    manifest = ex.ExperimentManifest(command=subcommand,
                                     seed=int(params.get("seed", 0)),
                                     params=hash_params)
    manifest.files = {"csv": os.path.basename(paths["csv"])}
    manifest.aggregates = {"backend": backend_name()}
    manifest.write(paths["manifest"])
    aggregates = _RUNNERS[subcommand](params, paths, manifest)
    manifest.aggregates.update(aggregates)
    manifest.status = "complete"
    manifest.write(paths["manifest"])
    return paths, manifest.aggregates


def run(args) -> int:
    if args.subcommand == "replay":
        data = ex.load_manifest(args.manifest)
        run_params(data["command"], dict(data["params"]), args.out,
                   threads=args.threads)
        return 0
    params = _params_from_args(args)
    run_params(args.subcommand, params, args.out, threads=args.threads)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _CliError as e:
        _emit_error("config", e)
        return 2
    try:
        return run(args)
    except (_CliError, ConditioningError, ValueError, FileNotFoundError) as e:
        _emit_error("config", e)
        return 2
    except ex.DegeneracyBudgetError as e:
        _emit_error("degeneracy_budget", e)
        return 3


if __name__ == "__main__":
    sys.exit(main())
