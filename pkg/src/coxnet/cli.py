"""``coxnet`` command line: fit, cv, simulate, diagnose, rerun.

Input is a comma-separated file with a header whose first two columns are
``time`` and ``status``; every other column is a covariate.  Outputs are
JSON documents carrying a run manifest (command, resolved configuration,
version, dataset fingerprint, seeds).  ``coxnet rerun MANIFEST`` replays a
manifest and reproduces the original output byte for byte.

Exit codes: 0 success, 1 input or usage error, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import asymptotic_covariance, grouping_bound, grouping_distance
from .model_selection import CvConfig, cross_validated_fit
from .penalty import DEFAULT_GAMMA, PenaltySpec, adaptive_weights
from .simulation import (
    PAPER_LAMBDA2,
    TABLE4_GRID_RATIO,
    OracleSchedule,
    SimConfig,
    run_grouping_experiment,
    run_oracle_monte_carlo,
    run_table4,
    simulate,
)
from .solver import FitConfig, FitResult, fit_adaptive_elastic_net, fit_prepared, prepare
from .survival_core import SurvivalDataset, validate_dataset

log = logging.getLogger("coxnet")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
METHODS = ("lasso", "alasso", "en", "aen")
_OUTPUT_KEYS = ("out", "report")


class InputError(ValueError):
    """Bad input file or flag combination (exit 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# io
# ---------------------------------------------------------------------------


def read_csv(path) -> SurvivalDataset:
    """Parse a survival CSV; every problem is reported with its line number."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise InputError(f"{path}: cannot open: {e.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file, header row required")
        header = [h.strip() for h in header]
        for pos, want in enumerate(("time", "status")):
            if len(header) <= pos or header[pos] != want:
                got = header[pos] if len(header) > pos else "nothing"
                raise InputError(f"{path}: line 1: column {pos + 1} must be '{want}', found {got!r}")
        names = header[2:]
        if not names:
            raise InputError(f"{path}: line 1: no covariate columns")
        if len(set(names)) != len(names):
            raise InputError(f"{path}: line 1: duplicate covariate names")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise InputError(f"{path}: line {line}: column '{name}': not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise InputError(f"{path}: line {line}: column '{name}': non-finite value {cell!r}")
                vals.append(v)
            if vals[0] <= 0:
                raise InputError(f"{path}: line {line}: time must be > 0, got {row[0]!r}")
            if vals[1] not in (0.0, 1.0):
                raise InputError(f"{path}: line {line}: status must be 0 or 1, got {row[1]!r}")
            rows.append(vals)
    if len(rows) < 2:
        raise InputError(f"{path}: need at least 2 data rows, got {len(rows)}")
    a = np.array(rows)
    d = SurvivalDataset(a[:, 0], a[:, 1], a[:, 2:], tuple(names))
    validate_dataset(d)
    return d


def write_csv(d: SurvivalDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("time", "status") + tuple(d.feature_names))
        for t, s, x in zip(d.time, d.status, d.X):
            w.writerow([repr(float(t)), str(int(s))] + [repr(float(v)) for v in x])


def _plain(obj):
    """JSON-ready copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    # json renders floats with repr, the shortest string that round-trips
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def manifest(command: str, args: argparse.Namespace, fingerprint=None, seeds=None) -> dict:
    skip = _OUTPUT_KEYS + ("func", "command", "verbose")
    config = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {
        "command": command,
        "config": config,
        "version": __version__,
        "dataset_fingerprint": fingerprint,
        "seeds": seeds or {},
    }


def _fit_cfg(args, coordinate_seed=None) -> FitConfig:
    return FitConfig(tol=args.tol, max_outer=args.max_outer, standardize=args.standardize,
                     coordinate_seed=coordinate_seed)


def _names_dict(names, values):
    return {n: float(v) for n, v in zip(names, values)}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _check_method_l2(args):
    if args.method in ("lasso", "alasso") and args.lambda2 != 0:
        raise InputError(f"--method {args.method} fixes lambda2 = 0; drop --lambda2")


def cmd_fit(args) -> int:
    _check_method_l2(args)
    d = read_csv(args.data)
    cfg = _fit_cfg(args, args.seed)
    prep = prepare(d, cfg.standardize)
    out = {"method": args.method}
    if args.method in ("lasso", "en"):
        fit = fit_prepared(prep, PenaltySpec(args.lambda1, args.lambda2, np.ones(d.p), args.gamma), cfg)
        converged = fit.converged
    else:
        l1_en = args.lambda1 if args.lambda1_en is None else args.lambda1_en
        aen = fit_adaptive_elastic_net(prep, l1_en, args.lambda2, args.lambda1, args.gamma,
                                       args.epsilon, cfg, exclude_zero=args.exclude_zero)
        fit = aen.aen_stage
        converged = fit.converged and aen.en_stage.converged
        out["first_stage"] = aen.en_stage.to_dict(d.feature_names)
        out["weights"] = _names_dict(d.feature_names, aen.weights)
        out["epsilon"] = aen.epsilon
    out.update(
        coefficients=_names_dict(d.feature_names, fit.beta),
        coefficients_std=_names_dict(d.feature_names, fit.beta_std),
        active_set=[d.feature_names[k] for k in fit.active_set],
        kkt_residual=fit.kkt_residual,
        converged=converged,
        fit=fit.to_dict(d.feature_names),
        manifest=manifest("fit", args, d.fingerprint(), {"coordinate_seed": args.seed}),
    )
    _emit(dumps(out), args.out)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_cv(args) -> int:
    if args.folds < 2:
        raise InputError("--folds must be >= 2")
    l2_grid = tuple(args.lambda2)
    if args.method in ("lasso", "alasso") and any(v != 0 for v in l2_grid):
        raise InputError(f"--method {args.method} fixes lambda2 = 0; drop --lambda2")
    d = read_csv(args.data)
    cfg = _fit_cfg(args)
    cv_cfg = CvConfig(args.folds, args.seed, l2_grid, args.grid_size, args.grid_ratio)
    prep = prepare(d, cfg.standardize)
    out = {"method": args.method}
    report, fit = cross_validated_fit(prep, None, cv_cfg, cfg)
    converged = fit.converged
    if args.method in ("alasso", "aen"):
        eps = 1.0 / d.n if args.epsilon is None else args.epsilon
        w = adaptive_weights(fit.beta_std, args.gamma, eps)
        stage2 = CvConfig(args.folds, args.seed, (report.best_lambda2,), args.grid_size, args.grid_ratio)
        out["first_stage"] = {"cv": report.to_dict(), "fit": fit.to_dict(d.feature_names)}
        out["weights"] = _names_dict(d.feature_names, w)
        out["epsilon"] = eps
        report, fit = cross_validated_fit(prep, w, stage2, cfg)
        converged = converged and fit.converged
    out.update(
        cv=report.to_dict(),
        selected={"lambda1": report.best_lambda1, "lambda2": report.best_lambda2},
        coefficients=_names_dict(d.feature_names, fit.beta),
        converged=converged,
        fit=fit.to_dict(d.feature_names),
        manifest=manifest("cv", args, d.fingerprint(), {"cv": args.seed}),
    )
    _emit(dumps(out), args.out)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def _sim_config(args) -> SimConfig:
    if args.n < 2:
        raise InputError("--n must be >= 2")
    return SimConfig(n=args.n, seed=args.seed, censor_rate_target=args.censor_rate, design=args.design)


def cmd_simulate(args) -> int:
    exp = args.experiment
    if exp in ("table4", "grouping") and args.design != "paper":
        raise InputError(f"--experiment {exp} needs --design paper")
    if args.replicates is not None and exp not in ("oracle", "grouping"):
        raise InputError("--replicates only applies to --experiment oracle or grouping")
    if args.replicates is not None and args.replicates < 2:
        raise InputError("--replicates must be >= 2")
    if not 0 <= args.censor_rate < 1:
        raise InputError("--censor-rate must be in [0, 1)")
    if args.out in (None, "-"):
        raise InputError("simulate needs --out FILE for the dataset CSV")
    sim = _sim_config(args)
    d = simulate(sim)
    fp = d.fingerprint()
    man = manifest("simulate", args, fp, {"simulation": args.seed})
    write_csv(d, args.out)
    Path(str(args.out) + ".manifest.json").write_text(dumps(man), encoding="utf-8")
    if exp == "none":
        return EXIT_OK
    fit_cfg = _fit_cfg(args)
    if exp == "table4":
        cv_cfg = CvConfig(args.folds, args.seed, (0.0,), args.grid_size, args.grid_ratio)
        rep = run_table4(sim, cv_cfg, fit_cfg, lambda2=args.lambda2, gamma=args.gamma)
        body = rep.to_dict()
        converged = all(rep.config["converged"].values())
    elif exp == "oracle":
        rep = run_oracle_monte_carlo(sim, args.replicates or 100, OracleSchedule(gamma=args.gamma), fit_cfg)
        body = rep.to_dict()
        converged = bool(np.all(rep.converged))
    else:
        body = run_grouping_experiment(sim, replicates=args.replicates or 20, lambda2=args.lambda2,
                                       fit_cfg=fit_cfg)
        converged = True
    body = {"experiment": exp, **body, "manifest": man}
    report_path = args.report or str(args.out) + f".{exp}.json"
    _emit(dumps(body), report_path)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def _parse_pair(text, names):
    parts = [s.strip() for s in text.split(",")]
    if len(parts) != 2:
        raise InputError(f"--pair needs two comma-separated covariates, got {text!r}")
    idx = []
    for s in parts:
        if s.lstrip("-").isdigit():
            k = int(s) - 1
            if not 0 <= k < len(names):
                raise InputError(f"--pair index {s} out of range 1..{len(names)}")
        elif s in names:
            k = names.index(s)
        else:
            raise InputError(f"--pair: unknown covariate {s!r}")
        idx.append(k)
    if idx[0] == idx[1]:
        raise InputError("--pair needs two distinct covariates")
    return idx


def cmd_diagnose(args) -> int:
    if args.pair is None and not args.covariance:
        raise InputError("diagnose needs --pair and/or --covariance")
    try:
        doc = json.loads(Path(args.fit).read_text(encoding="utf-8"))
        fit = FitResult.from_dict(doc["fit"])
        fp_fit = doc["manifest"]["dataset_fingerprint"]
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise InputError(f"{args.fit}: not a fit result: {e}") from None
    d = read_csv(args.data)
    fp = d.fingerprint()
    if fp != fp_fit:
        raise InputError(f"{args.data} does not match the data the fit was run on (fingerprint mismatch)")
    if fit.beta.shape[0] != d.p:
        raise InputError("fit and data have different covariate counts")
    out = {}
    if args.pair is not None:
        a, b = _parse_pair(args.pair, list(d.feature_names))
        if fit.spec.lambda2 > 0:
            out["grouping"] = grouping_bound(d, fit, fit.spec, a, b).to_dict()
        else:
            out["grouping"] = {"pair": [a, b], "distance": grouping_distance(fit, a, b), "bound": None,
                               "note": "bound requires lambda2 > 0"}
        out["grouping"]["names"] = [d.feature_names[a], d.feature_names[b]]
    if args.covariance:
        cov, names = asymptotic_covariance(d, fit)
        out["covariance"] = {"names": names, "matrix": cov, "sd": np.sqrt(np.diag(cov))}
    out["manifest"] = manifest("diagnose", args, fp)
    _emit(dumps(out), args.out)
    return EXIT_OK


def cmd_rerun(args) -> int:
    try:
        doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        man = doc.get("manifest", doc)
        command, config = man["command"], dict(man["config"])
    except (OSError, ValueError, KeyError, AttributeError) as e:
        raise InputError(f"{args.manifest}: not a run manifest: {e}") from None
    if command not in _COMMANDS or command == "rerun":
        raise InputError(f"{args.manifest}: cannot rerun command {command!r}")
    if man.get("version") != __version__:
        log.warning("manifest written by version %s, running %s", man.get("version"), __version__)
    ns = build_parser().parse_args([command] + _REQUIRED_STUB.get(command, []))
    for k, v in config.items():
        if not hasattr(ns, k):
            raise InputError(f"{args.manifest}: unknown setting {k!r} for {command}")
        setattr(ns, k, v)
    ns.out, ns.report = args.out, args.report
    if command == "simulate" and ns.out in (None, "-"):
        raise InputError("rerun of simulate needs --out FILE")
    return _COMMANDS[command](ns)


_COMMANDS = {"fit": cmd_fit, "cv": cmd_cv, "simulate": cmd_simulate, "diagnose": cmd_diagnose, "rerun": cmd_rerun}
# placeholders that satisfy required flags; the manifest overwrites them
_REQUIRED_STUB = {
    "fit": ["--data", "-", "--lambda1", "0"],
    "cv": ["--data", "-"],
    "diagnose": ["--fit", "-", "--data", "-"],
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _solver_flags(p):
    p.add_argument("--tol", type=float, default=1e-8, help="convergence tolerance (default 1e-8)")
    p.add_argument("--max-outer", type=int, default=100, help="outer iteration cap (default 100)")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                   help="penalize standardized coefficients (default on)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="coxnet", description="Penalized Cox regression: elastic net and adaptive elastic net.")
    ap.add_argument("--version", action="version", version=f"coxnet {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit at fixed penalties")
    f.add_argument("--data", required=True, help="input CSV (time,status,covariates...)")
    f.add_argument("--method", choices=METHODS, default="en")
    f.add_argument("--lambda1", type=float, required=True, help="L1 penalty (final stage for adaptive methods)")
    f.add_argument("--lambda1-en", type=float, default=None,
                   help="first-stage L1 penalty for alasso/aen (default: --lambda1)")
    f.add_argument("--lambda2", type=float, default=0.0, help="ridge penalty (default 0)")
    f.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="adaptive weight exponent (default 3)")
    f.add_argument("--epsilon", type=float, default=None, help="adaptive weight offset (default 1/n)")
    f.add_argument("--exclude-zero", action="store_true",
                   help="with --epsilon 0, hold zero first-stage coefficients at zero")
    f.add_argument("--seed", type=int, default=None, help="seed for a random coordinate order (default ascending)")
    _solver_flags(f)
    f.add_argument("--out", default=None, help="output JSON (default stdout)")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("cv", help="choose lambda1 by k-fold cross-validation")
    c.add_argument("--data", required=True)
    c.add_argument("--method", choices=METHODS, default="en")
    c.add_argument("--folds", type=int, default=5)
    c.add_argument("--grid-size", type=int, default=50)
    c.add_argument("--grid-ratio", type=float, default=0.01, help="smallest lambda1 / lambda_max")
    c.add_argument("--lambda2", type=float, nargs="+", default=[0.0], help="one or more ridge penalties")
    c.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    c.add_argument("--epsilon", type=float, default=None)
    c.add_argument("--seed", type=int, default=0, help="fold assignment seed")
    _solver_flags(c)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_cv)

    s = sub.add_parser("simulate", help="generate synthetic data and run experiments")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--censor-rate", type=float, default=0.2)
    s.add_argument("--design", choices=("paper", "independent"), default="paper")
    s.add_argument("--experiment", choices=("none", "table4", "oracle", "grouping"), default="none")
    s.add_argument("--replicates", type=int, default=None, help="oracle default 100, grouping default 20")
    s.add_argument("--lambda2", type=float, default=PAPER_LAMBDA2, help="ridge penalty for table4/grouping")
    s.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--grid-size", type=int, default=50)
    s.add_argument("--grid-ratio", type=float, default=TABLE4_GRID_RATIO)
    _solver_flags(s)
    s.add_argument("--out", default=None, help="dataset CSV; its manifest goes to OUT.manifest.json")
    s.add_argument("--report", default=None, help="experiment JSON (default OUT.<experiment>.json)")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("diagnose", help="grouping bound and asymptotic covariance for a saved fit")
    g.add_argument("--fit", required=True, help="JSON written by 'coxnet fit' or 'coxnet cv'")
    g.add_argument("--data", required=True)
    g.add_argument("--pair", default=None, help="two covariates, 1-based indices or names, e.g. 2,3")
    g.add_argument("--covariance", action="store_true")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_diagnose)

    r = sub.add_parser("rerun", help="replay a run manifest")
    r.add_argument("manifest", help="a JSON output or a .manifest.json sidecar")
    r.add_argument("--out", default=None)
    r.add_argument("--report", default=None)
    r.set_defaults(func=cmd_rerun)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ArithmeticError as e:  # separation, overflow
        print(f"coxnet: numerical failure: {e}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValueError, OSError) as e:  # includes data, CV, weight and singular-matrix errors
        print(f"coxnet: error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
