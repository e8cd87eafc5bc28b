"""Command-line interface.

Every command is deterministic given ``--seed`` and writes its result to
``--out`` (JSON or CSV) before printing a one-line summary.

Exit codes: 0 success, 2 bad flags, 3 bad data, 4 solver did not converge
under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .design import DataError, DomainError, InteractionIndex, expand_design
from .penalties import PenaltySpec, a3_constants_sharp, a3_suite
from .solver import (
    SolverConfig,
    TheoryConstants,
    fit,
    lambda_max_lasso,
    lambda_path,
    lambda_theory,
)
from .theory import (
    CONSTANTS_BANNER,
    DesignDistribution,
    ExperimentConfig,
    a0_event_rate,
    concentration_squares_check,
    epsilon_limit,
    gen_design,
    gen_noise,
    gen_truth,
    psi_norm_estimate,
    q1n_q2n,
    rate_experiment,
    re_constant,
    re_sample_size,
    rows_to_csv,
    sigma_z_eigs,
    summarize,
)

EXIT_DATA = 3
EXIT_NOT_CONVERGED = 4


class NotConverged(RuntimeError):
    pass


def read_csv(path, response: str | None):
    """Return (X, y, names) from a CSV with a header row.

    The response column is removed; the remaining columns, in file order,
    are the main effects.  ``y`` is None when ``response`` is None.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path}: need a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if any(len(r) != len(header) for r in body):
        raise DataError(f"{path}: rows do not match the header width {len(header)}")
    try:
        data = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from exc
    if response is None:
        return data, None, header
    if response not in header:
        raise DataError(f"{path}: no response column {response!r}")
    j = header.index(response)
    names = header[:j] + header[j + 1:]
    return np.delete(data, j, axis=1), data[:, j], names


def write_json(path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _write_text(path, text) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _penalty(text: str) -> PenaltySpec:
    try:
        return PenaltySpec.parse(text)
    except (DomainError, ValueError, KeyError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _design_dist(args) -> DesignDistribution:
    return DesignDistribution(args.design, args.cov, args.rho, tuple(args.toeplitz or ()))


def _add_design_flags(p):
    p.add_argument("--design", default="gaussian", choices=["gaussian", "rademacher", "uniform"])
    p.add_argument("--cov", default="identity", choices=["identity", "ar1", "toeplitz"])
    p.add_argument("--rho", type=float, default=0.0, help="AR(1) correlation")
    p.add_argument("--toeplitz", type=_float_list, default=None, help="comma-separated Toeplitz coefficients")


def _add_theory_flags(p):
    p.add_argument("--ke", type=float, default=1.0, help="psi_2 norm of the noise")
    p.add_argument("--h0", type=float, default=None, help="column sd bound (default: from the data)")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0, help="absolute constant of the noise tail bound")


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(max_iterations=args.max_iter, primal_tol=args.tol, dual_tol=args.tol, rho=args.admm_rho)


def _add_solver_flags(p):
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--admm-rho", type=float, default=1.0)
    p.add_argument("--strict", action="store_true", help="exit 4 when the solver does not converge")


# -- commands -----------------------------------------------------------------


def cmd_expand(args):
    X, _, names = read_csv(args.data, args.response)
    D = expand_design(X, center=args.center, standardize=args.standardize)
    idx = D.index
    columns = list(names) + [f"{names[j - 1]}:{names[k - 1]}" for j, k in idx.pairs]
    out = {
        "n": D.n,
        "p": idx.p,
        "p1": idx.p1,
        "columns": columns,
        "pairs": [list(pr) for pr in idx.pairs],
        "centering": D.means.tolist(),
        "scaling": D.scales.tolist(),
    }
    write_json(args.out, out)
    return f"expand: n={D.n} p={idx.p} p1={idx.p1} centered={D.centered}"


def _data_lambda(args, D, Y):
    if args.lam != "theory":
        try:
            lam = float(args.lam)
        except ValueError as exc:
            raise DataError(f"--lambda must be a number or 'theory', got {args.lam!r}") from exc
        return lam, None
    h0 = args.h0 if args.h0 is not None else float(D.values.std(axis=0).max())
    tc = TheoryConstants(Ke=args.ke, h0=h0, delta=args.delta, eta0=args.eta0, c=args.c)
    return args.lambda_multiplier * lambda_theory(D.n, D.p1, tc), tc


def cmd_fit(args):
    X, Y, _ = read_csv(args.data, args.response)
    D = expand_design(X, center=args.center)
    lam, tc = _data_lambda(args, D, Y)
    res = fit(D, Y, args.penalty, lam, _solver_cfg(args))
    out = res.to_dict()
    if tc is not None:
        out["lambda_rule"] = {"rule": "theory", "multiplier": args.lambda_multiplier, "C_e_delta": tc.C_e_delta,
                              "note": CONSTANTS_BANNER}
    if D.centered:
        out["centering"] = D.means.tolist()
    write_json(args.out, out)
    if args.strict and not res.converged:
        raise NotConverged(f"fit did not converge in {res.iterations} iterations")
    return (f"fit: {args.penalty.label()} lambda={lam:.6g} objective={res.objective:.10g} "
            f"support={res.support.s} converged={res.converged}")


def cmd_path(args):
    X, Y, _ = read_csv(args.data, args.response)
    D = expand_design(X, center=args.center)
    if args.grid:
        grid = sorted(args.grid, reverse=True)
    else:
        lmax = lambda_max_lasso(D, Y)
        grid = list(np.geomspace(lmax, lmax * args.min_ratio, args.n_lambda))
    fits = lambda_path(D, Y, args.penalty, grid, _solver_cfg(args))
    write_json(args.out, {"penalty": args.penalty.to_dict(), "fits": [f.to_dict() for f in fits]})
    if args.strict and not all(f.converged for f in fits):
        raise NotConverged("at least one path fit did not converge")
    sizes = ",".join(str(f.support.s) for f in fits)
    return f"path: {len(fits)} fits, support sizes {sizes}"


def cmd_simulate(args):
    rng = np.random.default_rng(args.seed)
    dist = _design_dist(args)
    X = gen_design(args.n, args.p, dist, rng)
    beta, S = gen_truth(args.p, args.s_main, args.s_int, args.magnitude, rng)
    D = expand_design(X)
    Y = D.values @ beta + gen_noise(args.n, args.noise_sd, args.noise_kind, rng)
    lines = [",".join([f"x{j}" for j in range(1, args.p + 1)] + ["y"])]
    lines += [",".join(repr(float(v)) for v in row) for row in np.c_[X, Y]]
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.truth_out:
        write_json(args.truth_out, {"p": args.p, "beta": beta.tolist(), "support": S.to_dict(),
                                    "design": dist.to_dict(), "seed": args.seed})
    return f"simulate: n={args.n} p={args.p} s={S.s}"


def cmd_rate_bench(args):
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    rows = rate_experiment(cfg, n_jobs=args.jobs)
    _write_text(args.out, rows_to_csv(rows))
    summary = summarize(rows)
    summary["config"] = cfg.to_dict()
    if args.summary:
        write_json(args.summary, summary)
    parts = [f"{k} slope={v['slope']:.3f}+-{v['slope_se']:.3f} R2={v['r2']:.3f}"
             for k, v in summary["penalties"].items()]
    return "rate-bench: " + "; ".join(parts)


def cmd_re_check(args):
    idx = InteractionIndex(args.p)
    dist = _design_dist(args)
    rows = []
    for i in range(args.seeds):
        rng = np.random.default_rng([args.seed, i])
        D = expand_design(gen_design(args.n, args.p, dist, rng))
        est = re_constant(D, args.s, args.k0, args.method, args.budget, rng, iters=args.iters)
        rows.append({"replicate": i, "M_hat": est.M_hat, "support": list(est.support), "samples": est.samples})
    passed = sum(r["M_hat"] > args.threshold for r in rows)
    out = {
        "p": args.p, "p1": idx.p1, "n": args.n, "s": args.s, "k0": args.k0, "method": args.method,
        "threshold": args.threshold, "passed": passed, "replicates": rows,
        "note": "M_hat is the smallest ratio found, an upper bound on M(k0, s)",
    }
    if args.eps is not None:
        out["sample_size_formula"] = {
            "eps": args.eps,
            "value": re_sample_size(args.s, args.k0, idx.p1, args.eps),
            "note": CONSTANTS_BANNER,
        }
        if args.eps_check:
            lo, hi = sigma_z_eigs(dist, args.p, max(10 * idx.p1, 100_000), args.seed)
            out["sample_size_formula"]["eps_limit_mc"] = epsilon_limit(lo, hi)
    write_json(args.out, out)
    return f"re-check: M_hat > {args.threshold} in {passed}/{args.seeds}"


def cmd_a0_check(args):
    tc = TheoryConstants(Ke=args.ke, h0=args.h0 if args.h0 is not None else 1.0,
                         delta=args.delta, eta0=args.eta0, c=args.c)
    dist = _design_dist(args)
    freq = a0_event_rate(args.n, args.p, dist, args.ke, tc, args.trials, args.seed,
                         multiplier=args.multiplier, noise_kind=args.noise_kind)
    p1 = InteractionIndex(args.p).p1
    q1, q2 = q1n_q2n(args.n, p1, args.delta, args.ck, args.eta0)
    write_json(args.out, {"n": args.n, "p": args.p, "p1": p1, "trials": args.trials, "frequency": freq,
                          "C_e_delta": tc.C_e_delta, "multiplier": args.multiplier,
                          "q1n": q1, "q2n": q2, "q1n_q2n": q1 * q2, "note": CONSTANTS_BANNER})
    return f"a0-check: frequency {freq:.4f} over {args.trials} trials"


def cmd_eigs_check(args):
    lo, hi = sigma_z_eigs(_design_dist(args), args.p, args.n_mc, args.seed)
    write_json(args.out, {"p": args.p, "n_mc": args.n_mc, "lambda_min_z": lo, "lambda_max_z": hi})
    return f"eigs-check: lambda_min_z={lo:.4f} lambda_max_z={hi:.4f}"


def cmd_psi_check(args):
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal(args.samples)
    y = rng.standard_normal(args.samples)
    psi2 = psi_norm_estimate(x, "psi2", args.qmax)
    psi1 = psi_norm_estimate(x * y, "psi1", args.qmax)
    ratio = psi1 / psi2**2
    write_json(args.out, {"samples": args.samples, "qmax": args.qmax, "psi2_x": psi2, "psi1_xy": psi1,
                          "ratio": ratio, "bound": 2.0})
    return f"psi-check: psi1(XY)/psi2(X)^2 = {ratio:.4f} (bound 2)"


def cmd_conc_check(args):
    rep = concentration_squares_check(n_list=args.n_list, delta=args.delta, trials=args.trials, seed=args.seed)
    write_json(args.out, {"delta": rep.delta, "trials": rep.trials, "table": list(rep.rows()),
                          "slope": rep.slope, "intercept": rep.intercept, "note": CONSTANTS_BANNER})
    return f"conc-check: frequencies {[round(f, 4) for f in rep.frequency]} slope {rep.slope:.4f}"


def cmd_penalty_check(args):
    spec = PenaltySpec(args.family, args.q, args.d0)
    consts = a3_constants_sharp(spec, args.p) if args.sharp else None
    if args.sharp and consts is None:
        raise DomainError(f"{spec.label()} has no valid sandwich constants")
    res = a3_suite(spec, args.p, args.trials, args.seed, constants=consts)
    write_json(args.out, {"penalty": spec.to_dict(), "p": args.p, "trials": args.trials,
                          "L1": res.constants.L1, "L2": res.constants.L2, "zero_ok": res.zero_ok,
                          "passed": res.passed, "failures": res.failures, "worst_slack": res.worst_slack})
    return f"penalty-check: {spec.label()} p={args.p} sandwich bound pass rate {res.passed}/{args.trials}"


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hiersparse", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text.splitlines()[0], description=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", default="-", help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("expand", cmd_expand, "Describe the interaction expansion of a CSV design (columns, centering).")
    p.add_argument("--data", required=True)
    p.add_argument("--response", default=None)
    p.add_argument("--center", action="store_true")
    p.add_argument("--standardize", action="store_true")

    for name, func, text in (
        ("fit", cmd_fit, "Fit a hierarchical penalty. Claim: with lambda at the theoretical level the "
                         "l1 error is of order s sqrt(log p1 / n)."),
        ("path", cmd_path, "Fit a warm-started descending lambda path."),
    ):
        p = add(name, func, text)
        p.add_argument("--data", required=True)
        p.add_argument("--response", required=True)
        p.add_argument("--penalty", type=_penalty, default=PenaltySpec("cap"))
        p.add_argument("--center", action="store_true")
        _add_solver_flags(p)
        if name == "fit":
            p.add_argument("--lambda", dest="lam", default="theory", help="a number or 'theory'")
            p.add_argument("--lambda-multiplier", type=float, default=1.0)
            _add_theory_flags(p)
        else:
            p.add_argument("--grid", type=_float_list, default=None)
            p.add_argument("--n-lambda", type=int, default=20)
            p.add_argument("--min-ratio", type=float, default=1e-2)

    p = add("simulate", cmd_simulate, "Simulate a dataset with a strongly hierarchical truth.")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--s-main", type=int, default=3)
    p.add_argument("--s-int", type=int, default=2)
    p.add_argument("--magnitude", type=float, default=3.0)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--noise-kind", default="gaussian", choices=["gaussian", "rademacher"])
    p.add_argument("--truth-out", default=None)
    _add_design_flags(p)

    p = add("rate-bench", cmd_rate_bench,
            "Rate experiment. Claim: the l1 error scales like s sqrt(log p1 / n) and Pe(v) <= 3 ||v||_1 "
            "for the composite absolute penalty.")
    p.add_argument("--config", default=None, help="TOML or JSON experiment config")
    p.set_defaults(seed=None)
    p.add_argument("--summary", default=None, help="summary JSON path")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default $HIERSPARSE_THREADS or 1)")

    p = add("re-check", cmd_re_check,
            "Restricted eigenvalue check. Claim: for sub-Gaussian main effects the interaction design "
            "satisfies the RE condition with high probability once n exceeds the sample-size formula.")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=8)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--k0", type=float, default=7.0)
    p.add_argument("--method", default="random_cone_descent", choices=["random_cone_descent", "exhaustive_supports"])
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=None, help="also evaluate the sample-size formula at eps")
    p.add_argument("--eps-check", action="store_true", help="compare eps with its Monte Carlo admissible limit")
    _add_design_flags(p)

    p = add("a0-check", cmd_a0_check,
            "Noise event check. Claim: ||Z'eps/n||_inf < C_{e,delta} sqrt(log p1/n) with probability "
            "at least q1n * q2n, which tends to one.")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--multiplier", type=float, default=1.0)
    p.add_argument("--noise-kind", default="gaussian", choices=["gaussian", "rademacher"])
    p.add_argument("--ck", type=float, default=1.0, help="constant C_K in q1n")
    _add_theory_flags(p)
    _add_design_flags(p)

    p = add("eigs-check", cmd_eigs_check,
            "Covariance eigenvalue check. Claim: Gaussian main effects with well-conditioned covariance "
            "give cov(Z) eigenvalues bounded away from 0 and infinity.")
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--n-mc", type=int, default=100_000)
    _add_design_flags(p)

    p = add("psi-check", cmd_psi_check,
            "Norm relation check. Claim: the product of two sub-Gaussian variables is subexponential "
            "with ||XY||_psi1 <= 2 K^2.")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--qmax", type=int, default=10)

    p = add("conc-check", cmd_conc_check,
            "Concentration of squares. Claim: P(|mean Z_i^2 - var Z| > delta) <= C exp(-C_K (n delta)^(1/3)) "
            "for subexponential Z.")
    p.add_argument("--n-list", type=_int_list, default=[100, 1000, 10_000])
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=2000)

    p = add("penalty-check", cmd_penalty_check,
            "Penalty sandwich check. Claim: Pe(theta) >= Pe(theta_S) + L1 ||theta_Sc||_1 and "
            "Pe(theta_S) <= L2 ||theta_S||_1 for hierarchical S, with the declared (L1, L2).")
    p.add_argument("--family", default="cap")
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--d0", type=int, default=1)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--sharp", action="store_true", help="use constants that hold for every theta")
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        summary = args.func(args)
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (DataError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(summary, file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
