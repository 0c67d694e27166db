"""Command-line front end: thresholds, scaling parameters, predictions,
Monte Carlo sweeps, threshold estimation, fits, and the toy walk.

Exit codes: 0 success, 2 usage error (bad flags or subcommand), 1 computation
error (invalid ensemble, unresolved fit, IO failure, ...).  Every randomized
command takes --seed and is bit-reproducible given it.  --json prints one JSON
object (schema: {"command": name, **results}) instead of key=value lines;
output files are written either way.  Sweep results are cached per logical
configuration under FSS_CACHE_DIR when that variable is set; the cache key is
a hash of the sorted configuration fields, so flag order never matters.
"""
import argparse
import json
import os
import sys

from .ensemble import critical_point, de_threshold, parse_ensemble
from .errors import FssError
from .scaling import (ALPHA_MODES, CHANNELS, REFERENCE_PARAMS, ScalingParams,
                      predict_bit, predict_block, reference_params, z_value)


def _parse_float_list(text):
    """'0.40:0.45:0.002' (inclusive), '0.41', or '0.40,0.41,0.43'."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(
                "grid must be lo:hi:step, got %r" % text)
        lo, hi, step = (float(p) for p in parts)
        if step <= 0 or hi < lo:
            raise argparse.ArgumentTypeError("need lo <= hi and step > 0")
        out = []
        k = 0
        while True:
            x = lo + k * step
            if x > hi + 0.5 * step:
                break
            out.append(round(x, 12))  # kill accumulated binary noise
            k += 1
        return out
    return [float(p) for p in text.split(",")]


def _parse_int_list(text):
    try:
        return [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated ints, got %r" % text)


def _parse_fix(pairs):
    out = {}
    for pair in pairs or ():
        name, _, value = pair.partition("=")
        if not _ or name not in ("epsilon_star", "alpha", "beta"):
            raise argparse.ArgumentTypeError(
                "--fix wants epsilon_star=V, alpha=V or beta=V, got %r" % pair)
        out[name] = float(value)
    return out


def _regular_key(e):
    """(l, k) when the ensemble is a tabulated regular pair, else None."""
    label = e.label()
    if "/" in label:
        return None
    key = tuple(int(p) for p in label.split(","))
    return key if key in REFERENCE_PARAMS else None


def _build_params(e, args):
    """ScalingParams for predict/simulate-collapse: explicit flags win, then
    the reference table, then computed values (alpha integrated on the spot;
    beta has no first-principles route here and must be given)."""
    key = _regular_key(e)
    if key is not None:
        p = reference_params(key, mode=args.mode, gamma=args.gamma)
        eps_star, nu_star, alpha, beta = (p.epsilon_star, p.nu_star, p.alpha,
                                          p.beta)
    else:
        cp = critical_point(e)
        eps_star, nu_star = cp.epsilon_star, cp.nu_star
        alpha = beta = None
    if args.epsilon_star is not None:
        eps_star = args.epsilon_star
    if args.alpha is not None:
        alpha = args.alpha
    elif alpha is None:
        from .asymptotics import alpha as compute_alpha
        alpha = compute_alpha(e, mode=args.mode).alpha
    if args.beta is not None:
        beta = args.beta
    elif beta is None:
        raise FssError("no tabulated shift for ensemble %s; pass --beta "
                       "(use 0 for the basic law)" % e.label())
    return ScalingParams(eps_star, nu_star, alpha, args.mode, beta,
                         gamma=args.gamma)


def _emit(payload, args, out=None):
    out = out if out is not None else sys.stdout
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True), file=out)
        return
    for key, value in payload.items():
        if key == "command":
            continue
        if isinstance(value, float):
            print("%s=%.10g" % (key, value), file=out)
        elif isinstance(value, list):
            for item in value:
                print(" ".join("%s=%s" % (k, "%.10g" % v if isinstance(v, float)
                                          else v) for k, v in item.items()),
                      file=out)
        else:
            print("%s=%s" % (key, value), file=out)


def _cmd_threshold(args):
    e = parse_ensemble(args.ensemble)
    return {"command": "threshold",
            "ensemble": e.label(),
            "epsilon_star": de_threshold(e, tol=args.tol)}


def _cmd_critical(args):
    e = parse_ensemble(args.ensemble)
    cp = critical_point(e)
    return {"command": "critical", "ensemble": e.label(),
            "epsilon_star": cp.epsilon_star, "x_star": cp.x_star,
            "y_star": cp.y_star, "nu_star": cp.nu_star}


def _cmd_alpha(args):
    from .asymptotics import alpha, mean_evolution
    e = parse_ensemble(args.ensemble)
    r = alpha(e, mode=args.mode, step=args.step)
    if args.trajectory:
        traj = mean_evolution(e, r.epsilon_star, step=args.step)
        with open(args.trajectory, "w") as f:
            f.write("tau,v,s,t\n")
            for st in traj:
                f.write("%.12g,%.12g,%.12g,%.12g\n"
                        % (st.tau, st.v_total, st.s, st.t))
    return {"command": "alpha", "ensemble": e.label(), "mode": r.mode,
            "epsilon_star": r.epsilon_star, "nu_star": r.nu_star,
            "alpha": r.alpha, "tau_star": r.tau_star,
            "sigma_star": r.sigma_star, "c": r.c}


def _cmd_predict(args):
    e = parse_ensemble(args.ensemble)
    if (args.eps is None) == (args.grid is None):
        raise FssError("pass exactly one of --eps and --grid")
    if args.grid is not None and not args.out:
        raise FssError("--grid needs --out for the CSV")
    params = _build_params(e, args)
    refined = not args.basic
    payload = {"command": "predict", "ensemble": e.label(),
               "n": args.n, "mode": params.alpha_mode, "channel": args.channel,
               "refined": refined, "epsilon_star": params.epsilon_star,
               "alpha": params.alpha, "beta": params.beta}
    if args.eps is not None:
        payload["eps"] = args.eps
        payload["z"] = z_value(params, args.n, args.eps, refined=refined)
        payload["pB"] = predict_block(params, args.n, args.eps,
                                      refined=refined, channel=args.channel)
        payload["pb"] = predict_bit(params, args.n, args.eps,
                                    refined=refined, channel=args.channel)
    else:
        with open(args.out, "w") as f:
            f.write("n,eps,z,pB,pb\n")
            for eps in args.grid:
                f.write("%d,%.12g,%.12g,%.12g,%.12g\n"
                        % (args.n, eps,
                           z_value(params, args.n, eps, refined=refined),
                           predict_block(params, args.n, eps, refined=refined,
                                         channel=args.channel),
                           predict_bit(params, args.n, eps, refined=refined,
                                       channel=args.channel)))
        payload["out"] = args.out
        payload["rows"] = len(args.grid)
    return payload


def _cmd_simulate(args):
    from .experiment import SweepConfig, run_sweep, write_sweep_csv
    e = parse_ensemble(args.ensemble)
    grid = args.eps if args.channel == "iid" else [int(x) for x in args.eps]
    cfg = SweepConfig(e, args.n, grid, args.trials, args.seed,
                      gamma=args.gamma, channel=args.channel,
                      fresh_graph=not args.shared_graph,
                      trial_offset=args.trial_offset,
                      max_ci_width=args.max_ci_width)
    result = run_sweep(cfg, cache="auto" if args.cache else None,
                       threads=args.threads)
    write_sweep_csv(result, args.out)
    payload = {"command": "simulate", "ensemble": e.label(),
               "rows": len(result.points), "trials": cfg.trials,
               "seed": cfg.seed, "out": args.out,
               "cache_key": cfg.cache_name()}
    if args.max_ci_width is not None:
        payload["flagged"] = sum(p.flagged for p in result.points)
    if args.collapse:
        params = _build_params(e, args)
        with open(args.collapse, "w") as f:
            f.write("n,eps,z,pB_hat,pB_lo,pB_hi\n")
            for p in result.points:
                f.write("%d,%.12g,%.12g,%.12g,%.12g,%.12g\n"
                        % (p.n, p.x, z_value(params, p.n, p.x), p.pB_hat,
                           p.pB_lo, p.pB_hi))
        payload["collapse"] = args.collapse
    return payload


def _cmd_estimate_threshold(args):
    from .experiment import estimate_fl_threshold
    e = parse_ensemble(args.ensemble)
    bracket = tuple(args.bracket) if args.bracket else None
    est = estimate_fl_threshold(e, args.n, trials_per_probe=args.trials_per_probe,
                                tol=args.tol, seed=args.seed, gamma=args.gamma,
                                bracket=bracket, budget=args.budget)
    return {"command": "estimate-threshold", "ensemble": e.label(),
            "n": est.n, "estimate": est.estimate,
            "bracket_lo": est.bracket[0], "bracket_hi": est.bracket[1],
            "probes": est.probes, "trials_used": est.trials_used}


def _cmd_fit(args):
    from .experiment import read_sweep_csv
    from .fit import fit_scaling, problem_from_rows
    rows = read_sweep_csv(args.data)
    if not rows:
        raise FssError("no data rows in %s" % args.data)
    labels = {r["ensemble"] for r in rows}
    if len(labels) > 1:
        raise FssError("CSV mixes ensembles: %s" % sorted(labels))
    e = parse_ensemble(rows[0]["ensemble"])
    fixed = dict(args.fix)
    args.epsilon_star = fixed.get("epsilon_star")
    args.alpha = fixed.get("alpha")
    args.beta = fixed.get("beta")
    if args.beta is None and "beta" in args.free and _regular_key(e) is None:
        args.beta = 0.0  # free parameter: any starting point will do
    base = _build_params(e, args)
    result = fit_scaling(problem_from_rows(rows, args.free, base))
    payload = {"command": "fit", "ensemble": e.label(), "free": ",".join(args.free),
               "epsilon_star": result.params.epsilon_star,
               "alpha": result.params.alpha, "beta": result.params.beta}
    for name in args.free:
        payload["se_" + name] = result.se[name]
    payload.update(residual=result.residual, n_used=result.n_used,
                   dropped=result.dropped, iterations=result.iterations)
    return payload


def _cmd_toy(args):
    from .toywalk import (ToyWalkError, WalkConfig, walk_exponent_fit,
                          walk_simulate, write_walk_csv)
    results = [walk_simulate(WalkConfig(n, args.trials, args.seed))
               for n in args.n]
    write_walk_csv(results, args.out)
    payload = {"command": "toy", "trials": args.trials, "seed": args.seed,
               "out": args.out,
               "points": [{"n": r.n, "p_hat": r.p_hat, "ci_lo": r.ci_lo,
                           "ci_hi": r.ci_hi,
                           "median_lg_offset": r.median_lg_offset,
                           "median_depth": r.median_depth} for r in results]}
    if len(results) >= 4:
        try:
            slope, se = walk_exponent_fit(
                [(r.n, r.p_hat, r.trials) for r in results])
            payload["slope"] = slope
            payload["slope_se"] = se
        except ToyWalkError:
            payload["slope"] = "unresolved"
    return payload


def _add_ensemble(p):
    p.add_argument("--ensemble", required=True,
                   help="'l,k' for regular or 'λ/ρ' degree pairs like 3:0.5,4:0.5/6:1")


def _add_params(p):
    p.add_argument("--mode", choices=ALPHA_MODES, default="binomial")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--epsilon-star", type=float, default=None,
                   dest="epsilon_star")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)


def build_parser():
    top = argparse.ArgumentParser(
        prog="fss",
        description="finite-length scaling of LDPC codes over the BEC")
    top.add_argument("--json", action="store_true",
                     help="print results as one JSON object")
    sub = top.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("threshold", help="density-evolution threshold")
    _add_ensemble(p)
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(handler=_cmd_threshold)

    p = sub.add_parser("critical", help="critical point and residual fraction")
    _add_ensemble(p)
    p.set_defaults(handler=_cmd_critical)

    p = sub.add_parser("alpha", help="scaling parameter from covariance evolution")
    _add_ensemble(p)
    p.add_argument("--mode", choices=ALPHA_MODES, default="conditional")
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--trajectory", metavar="CSV", default=None,
                   help="write the mean trajectory (tau,v,s,t)")
    p.set_defaults(handler=_cmd_alpha)

    p = sub.add_parser("predict", help="scaling-law block/bit error predictions")
    _add_ensemble(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--grid", type=_parse_float_list, default=None,
                   metavar="LO:HI:STEP")
    p.add_argument("--refined", action="store_true", default=True,
                   help="shifted law (default)")
    p.add_argument("--basic", action="store_true",
                   help="unshifted law instead of --refined")
    p.add_argument("--channel", choices=CHANNELS, default="iid")
    p.add_argument("--out", default=None, help="CSV for --grid output")
    _add_params(p)
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("simulate", help="peeling-decoder Monte Carlo sweep")
    _add_ensemble(p)
    p.add_argument("--n", type=_parse_int_list, required=True)
    p.add_argument("--eps", type=_parse_float_list, required=True,
                   metavar="LO:HI:STEP")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channel", choices=CHANNELS, default="iid")
    p.add_argument("--shared-graph", action="store_true",
                   help="one graph per n instead of a fresh graph per trial")
    p.add_argument("--trial-offset", type=int, default=0)
    p.add_argument("--max-ci-width", type=float, default=None)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--no-cache", dest="cache", action="store_false",
                   help="ignore FSS_CACHE_DIR for this run")
    p.add_argument("--out", required=True)
    p.add_argument("--collapse", default=None,
                   help="also write a z-collapsed CSV (n,eps,z,pB_hat,...)")
    _add_params(p)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("estimate-threshold",
                       help="finite-length threshold by stochastic bisection")
    _add_ensemble(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials-per-probe", type=int, default=10000)
    p.add_argument("--tol", type=float, default=5e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--budget", type=int, default=30)
    p.add_argument("--bracket", type=_parse_float_list, default=None,
                   metavar="LO,HI")
    p.set_defaults(handler=_cmd_estimate_threshold)

    p = sub.add_parser("fit", help="fit scaling parameters to a sweep CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--free", type=lambda s: s.split(","), required=True,
                   metavar="alpha,beta")
    p.add_argument("--fix", action="append", default=[],
                   metavar="NAME=VALUE")
    p.add_argument("--mode", choices=ALPHA_MODES, default="binomial")
    p.add_argument("--gamma", type=float, default=0.1)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("toy", help="1-d biased walk failure-probability decay")
    p.add_argument("--n", type=_parse_int_list, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_toy)

    # --json is accepted before or after the subcommand; SUPPRESS keeps the
    # subparser from clobbering a value the top-level parser already set
    for p in sub.choices.values():
        p.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                       help="print results as one JSON object")

    return top


def dispatch(argv):
    """Run one command; returns the process exit status (0, 1 or 2)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "fix"):
            args.fix = _parse_fix(args.fix)
    except argparse.ArgumentTypeError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        payload = args.handler(args)
    except FssError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print("io error: %s" % exc, file=sys.stderr)
        return 1
    _emit(payload, args)
    return 0


def main():
    sys.exit(dispatch(sys.argv[1:]))
