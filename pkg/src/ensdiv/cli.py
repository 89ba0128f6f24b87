"""Command-line interface.

Every JSON result embeds a ``manifest`` holding the resolved arguments, input
checksums and library versions; ``ensdiv replay`` re-runs a command from it.
Exit codes: 0 success, 2 weight optimization infeasible, 3 input or schema
error, 4 simulation spec error.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .bayes import bootstrap_bayes_bound, chernoff_sweep, bayes_error_bound, minmax_scale
from .bayes import iris_path, pair_config, qda_cv_error, read_labeled_csv
from .ensemble import EnsembleConfig, child_rng, ensemble_estimate
from .exceptions import (
    DegenerateBasisError,
    EnsdivError,
    InfeasibleBudgetError,
    PathologicalSpecError,
)
from .functionals import make_functional
from .inference import bootstrap_estimate
from .simulate import (
    RNG_ALGORITHM,
    TruncatedGaussianSpec,
    clt_experiment,
    mse_sweep,
    sample_truncated_gaussian,
    truth_value,
)
from .weights import basis_matrix, solve_exact_weights, solve_relaxed_weights

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_SPEC = 0, 2, 3, 4
THREADS_ENV = "ENSDIV_THREADS"
# destinations, not inputs: never stored in a manifest
_OUTPUT_ARGS = {"out", "tsv", "csv", "func", "command", "sim_command", "manifest"}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def read_points_csv(path):
    """Headerless CSV of reals, one point per row."""
    rows, width = [], None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise CliError(f"{path}: row {lineno} has {len(row)} columns, expected {width}",
                               EXIT_INPUT)
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise CliError(f"{path}: row {lineno}: {exc}", EXIT_INPUT) from exc
    if not rows:
        raise CliError(f"{path}: no data rows", EXIT_INPUT)
    return np.asarray(rows)


def write_points_csv(points, fh):
    w = csv.writer(fh, lineterminator="\n")
    for row in points:
        w.writerow([repr(float(v)) for v in row])


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _manifest(args, inputs=(), resolved=None, duration=None):
    stored = {k: v for k, v in sorted(vars(args).items()) if k not in _OUTPUT_ARGS}
    return {
        "command": args.command if args.command != "simulate" else f"simulate {args.sim_command}",
        "args": stored,
        "resolved": resolved or {},
        "seed": getattr(args, "seed", None),
        "inputs": {p: _sha256(p) for p in inputs},
        "version": __version__,
        "numpy": np.__version__,
        "rng": RNG_ALGORITHM,
        "duration_s": duration,
    }


def _emit_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _config_from(args):
    return EnsembleConfig(
        l_bar=None if args.l is None else tuple(_floats(args.l)),
        alpha_frac=args.alpha_frac, eta=args.eta, seed=args.seed, weight_mode=args.mode)


def _threads(args):
    if getattr(args, "threads", None):
        return args.threads
    return int(os.environ.get(THREADS_ENV, "1"))


def cmd_weights(args):
    l_bar = _floats(args.l)
    if len(l_bar) <= args.d - 1:
        raise CliError(f"L={len(l_bar)} index values must exceed d-1={args.d - 1}",
                       EXIT_INFEASIBLE)
    basis = basis_matrix(l_bar, args.d)
    if args.mode == "exact":
        sol = solve_exact_weights(basis)
    else:
        sol = solve_relaxed_weights(basis, args.T, args.eta)
    out = sol.to_dict()
    out["l_bar"] = l_bar
    return out, []


def _add_ensemble_result(out, result):
    out.update(result.to_dict())


def cmd_estimate(args):
    X1, X2 = read_points_csv(args.file1), read_points_csv(args.file2)
    if X1.shape[1] != X2.shape[1]:
        raise CliError(f"dimension mismatch: {X1.shape[1]} vs {X2.shape[1]}", EXIT_INPUT)
    config = _config_from(args)
    f = make_functional(args.functional, args.alpha)
    result = ensemble_estimate(X1, X2, config, f)
    out = {"estimate": result.value}
    _add_ensemble_result(out, result)
    if args.bootstrap:
        boot = bootstrap_estimate(X1, X2, config, f, args.bootstrap, args.level)
        out["bootstrap"] = boot.to_dict()
    out["resolved_config"] = dict(config.to_dict(), l_bar=list(result.l_bar))
    return out, [args.file1, args.file2]


def _spec(args, which=None):
    suffix = "" if which is None else str(which)
    mu = _floats(getattr(args, "mu" + suffix))
    sigma = getattr(args, "sigma" + suffix)
    mu = mu * args.d if len(mu) == 1 else mu
    if len(mu) != args.d:
        raise CliError(f"mu has {len(mu)} entries, d={args.d}", EXIT_SPEC)
    return TruncatedGaussianSpec(tuple(mu), sigma, not args.sigma_is_sd)


def cmd_simulate_sample(args):
    spec = _spec(args)
    X = sample_truncated_gaussian(spec, args.n, args.seed)
    buf = io.StringIO()
    write_points_csv(X, buf)
    if args.csv in (None, "-"):
        sys.stdout.write(buf.getvalue())
        if args.out in (None, "-"):
            return None, []
    else:
        with open(args.csv, "w") as fh:
            fh.write(buf.getvalue())
    return {"n": int(X.shape[0]), "d": spec.d, "spec": spec.to_dict(),
            "sha256": hashlib.sha256(buf.getvalue().encode()).hexdigest()}, []


def _write_tsv(path, header, rows):
    if path is None:
        return
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(repr(int(v)) if isinstance(v, (int, np.integer))
                                else repr(float(v)) for v in r) + "\n")


def cmd_simulate_clt(args):
    s1, s2 = _spec(args, 1), _spec(args, 2)
    f = make_functional(args.functional, args.alpha)
    config = _config_from(args)
    batch, diag = clt_experiment(s1, s2, args.T, args.trials, config, f, args.seed,
                                 n_jobs=_threads(args))
    _write_tsv(args.tsv, ("theoretical", "observed"),
               zip(diag.theoretical_quantiles, diag.normalized_values))
    est = batch.estimates
    return {"ks_statistic": diag.ks_statistic, "ks_critical_0.01": diag.ks_critical(),
            "n_trials": diag.n, "mean": float(est.mean()), "sd": float(est.std(ddof=1)),
            "truth": truth_value(s1, s2, f), "estimates": [float(v) for v in est],
            "batch_config": batch.config}, []


def _synthetic_estimator(truth, c):
    def estimator(X1, X2, config, f):
        rng = child_rng(config.seed, 0)
        return truth + c / np.sqrt(X2.shape[0]) * rng.standard_normal()

    return estimator


def cmd_simulate_mse(args):
    s1, s2 = _spec(args, 1), _spec(args, 2)
    f = make_functional(args.functional, args.alpha)
    truth = truth_value(s1, s2, f)
    estimator = None if args.synthetic is None else _synthetic_estimator(truth, args.synthetic)
    res = mse_sweep(s1, s2, _ints(args.T_list), args.trials, truth, _config_from(args), f,
                    args.seed, estimator, n_jobs=_threads(args))
    _write_tsv(args.tsv, ("T", "mse"), zip(res.T, res.mse))
    return res.to_dict(), []


def cmd_bayes_bound(args):
    if args.file is None:
        args.file = str(iris_path())
    X, y = read_labeled_csv(args.file)
    labels = list(dict.fromkeys(y.tolist()))
    if len(labels) < 2:
        raise CliError(f"{args.file}: need at least two classes, found {labels}", EXIT_INPUT)
    if args.pair:
        pairs = [tuple(p.split(",")) for p in args.pair]
    else:
        pairs = [(a, b) for i, a in enumerate(labels) for b in labels[i + 1:]]
    rows, configs = [], []
    for pair in pairs:
        if len(pair) != 2 or any(c not in labels for c in pair):
            raise CliError(f"unknown class pair {pair}; labels are {labels}", EXIT_INPUT)
        X1, X2 = X[y == pair[0]], X[y == pair[1]]
        if args.scale == "minmax":
            X1, X2 = minmax_scale(X1, X2)
        w1 = X1.shape[0] / (X1.shape[0] + X2.shape[0]) if args.priors == "empirical" \
            else float(args.priors)
        config = pair_config(X1.shape[0], X2.shape[0],
                             None if args.l is None else _floats(args.l),
                             alpha_frac=args.alpha_frac, eta=args.eta, seed=args.seed,
                             weight_mode=args.mode)
        l_bar = config.resolve(X1.shape[1], X2.shape[0], X1.shape[0])[0]
        configs.append(dict(config.to_dict(), l_bar=list(l_bar), w1=w1))
        if args.B:
            report = bootstrap_bayes_bound(X1, X2, config, None, w1, args.B, args.level)
        else:
            report = bayes_error_bound(chernoff_sweep(X1, X2, config), w1)
        report.class_pair = pair
        row = report.to_dict()
        sel = (y == pair[0]) | (y == pair[1])
        errs = [qda_cv_error(X[sel], y[sel], args.folds, args.seed + r)
                for r in range(args.qda_repeats)]
        row["qda_error"] = errs[0]
        if args.qda_repeats > 1:
            row["qda_errors"] = errs
            row["qda_error_median"] = float(np.median(errs))
        rows.append(row)
    return {"pairs": rows, "resolved_configs": configs}, [args.file]


def cmd_replay(args):
    with open(args.manifest) as fh:
        doc = json.load(fh)
    manifest = doc.get("manifest", doc)
    command = manifest["command"].split()
    if " ".join(command) not in _COMMANDS:
        raise CliError(f"manifest names unknown command {manifest['command']!r}", EXIT_INPUT)
    for path, digest in manifest.get("inputs", {}).items():
        if _sha256(path) != digest:
            raise CliError(f"{path}: checksum differs from the manifest", EXIT_INPUT)
    ns = argparse.Namespace(**manifest["args"])
    ns.command = command[0]
    ns.sim_command = command[1] if len(command) > 1 else None
    ns.func = _COMMANDS[" ".join(command)]
    ns.out, ns.tsv, ns.csv = args.out, args.tsv, args.csv
    return _dispatch(ns)


def _ensemble_flags(p):
    p.add_argument("--l", default=None, help="comma-separated index values l_bar")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--alpha-frac", type=float, default=0.5)
    p.add_argument("--mode", choices=("relaxed", "exact"), default="relaxed")
    p.add_argument("--seed", type=int, default=0)


def _functional_flags(p, default="kl_forward"):
    p.add_argument("--functional", default=default)
    p.add_argument("--alpha", type=float, default=None)


def _spec_flags(p, two):
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--sigma-is-sd", action="store_true",
                   help="read sigma as a standard deviation instead of a variance")
    if two:
        p.add_argument("--mu1", default="0.7")
        p.add_argument("--mu2", default="0.3")
        p.add_argument("--sigma1", type=float, default=0.1)
        p.add_argument("--sigma2", type=float, default=0.3)
    else:
        p.add_argument("--mu", default="0.5")
        p.add_argument("--sigma", type=float, default=0.1)


def build_parser():
    parser = argparse.ArgumentParser(prog="ensdiv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker cap (default ${THREADS_ENV} or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weights", help="solve the ensemble weights")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--l", required=True)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--mode", choices=("relaxed", "exact"), default="relaxed")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("estimate", help="ensemble divergence estimate from two CSV files")
    p.add_argument("file1", help="sample from f1")
    p.add_argument("file2", help="sample from f2")
    _functional_flags(p)
    _ensemble_flags(p)
    p.add_argument("--bootstrap", type=int, default=0, metavar="B")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="truncated-Gaussian simulations")
    simsub = p.add_subparsers(dest="sim_command", required=True)
    s = simsub.add_parser("sample")
    _spec_flags(s, two=False)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv", default=None, help="where to write the points (default stdout)")
    s.add_argument("--out", default=None, help="JSON summary with manifest")
    s.set_defaults(func=cmd_simulate_sample)

    s = simsub.add_parser("clt")
    _spec_flags(s, two=True)
    s.add_argument("--T", type=int, default=500)
    s.add_argument("--trials", type=int, default=200)
    _functional_flags(s)
    _ensemble_flags(s)
    s.add_argument("--tsv", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate_clt)

    s = simsub.add_parser("mse")
    _spec_flags(s, two=True)
    s.add_argument("--T-list", default="200,400,800,1600,3200")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--synthetic", type=float, default=None, metavar="C",
                   help="replace the estimator by truth + C/sqrt(T) noise")
    _functional_flags(s)
    _ensemble_flags(s)
    s.add_argument("--tsv", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate_mse)

    p = sub.add_parser("bayes-bound", help="Chernoff bound on pairwise Bayes error")
    p.add_argument("file", nargs="?", default=None,
                   help="labeled CSV, label in the last column (default: bundled Iris)")
    p.add_argument("--pair", action="append", default=None, metavar="A,B")
    p.add_argument("--B", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--priors", default="0.5", help="w1 as a number, or 'empirical'")
    p.add_argument("--scale", choices=("minmax", "none"), default="minmax")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--qda-repeats", type=int, default=1)
    _ensemble_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bayes_bound)

    p = sub.add_parser("replay", help="re-run a command from a result's manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    p.add_argument("--tsv", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_replay)
    return parser


_COMMANDS = {
    "weights": cmd_weights,
    "estimate": cmd_estimate,
    "simulate sample": cmd_simulate_sample,
    "simulate clt": cmd_simulate_clt,
    "simulate mse": cmd_simulate_mse,
    "bayes-bound": cmd_bayes_bound,
}


def _dispatch(args):
    if args.command == "replay":
        return cmd_replay(args)
    start = time.perf_counter()
    result, inputs = args.func(args)
    if result is None:
        return EXIT_OK
    result["manifest"] = _manifest(args, inputs, duration=round(time.perf_counter() - start, 3))
    _emit_json(result, args.out)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except CliError as exc:
        print(f"ensdiv: {exc}", file=sys.stderr)
        return exc.code
    except (InfeasibleBudgetError, DegenerateBasisError) as exc:
        print(f"ensdiv: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PathologicalSpecError as exc:
        print(f"ensdiv: simulation spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (EnsdivError, OSError, ValueError) as exc:
        print(f"ensdiv: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
