"""Command-line front end.

Subcommands: ``eval`` (special functions), ``pmf`` / ``moments``
(analytic laws), ``simulate`` / ``compare`` (Monte Carlo against the
analytic forms), and ``figure`` (curve data for the reference figures,
as CSV).  No plotting: the tool emits data.

Exit codes: 0 success, 2 validation error, 3 numerical-precision error,
4 comparison threshold exceeded.  The environment variable
``GENYULE_SEED`` supplies the default seed for stochastic commands.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .analytic import (
    tfpp_mean,
    tfpp_pmf,
    tfpp_variance,
    tn_moments_critical,
    tn_moments_linear,
    tn_pmf_critical,
    tn_pmf_linear,
    tn_pmf_table,
    yule_marginal_pmf,
    genus_time_cdf,
    genus_time_pdf,
    Pmf,
)
from .errors import NumericsError, ParameterError
from .montecarlo import McConfig, Target, run_experiment
from .processes import (
    Constant,
    CriticalBD,
    Linear,
    ModelParams,
    NonlinearDistinct,
    simulate_system,
)
from .samplers import RngStream
from . import specfun

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICS = 3
EXIT_THRESHOLD = 4

SEED_ENV_VAR = "GENYULE_SEED"

_FIG1_NUS = (0.25, 0.5, 0.75, 1.0)
_FIG2_NUS = (0.4, 0.6, 0.8, 1.0)
_FIG4_NUS = (0.2, 0.5, 0.8)
_FIG5_NUS = (0.1, 0.5, 1.0)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(header, rows, out):
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(_fmt(v) for v in row) + "\n")


def _open_output(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w"), True


def _emit(text_writer, path):
    out, close = _open_output(path)
    try:
        text_writer(out)
    finally:
        if close:
            out.close()


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _cmd_eval(args) -> int:
    name = args.function.replace("-", "_")
    opts = {"tol": args.tol, "max_terms": args.max_terms}

    def need(*names):
        missing = [n for n in names if getattr(args, n) is None]
        if missing:
            raise ParameterError(
                f"{args.function} requires --" + ", --".join(missing)
            )

    if name == "gamma":
        need("x")
        print(_fmt(specfun.gamma(args.x)))
        return EXIT_OK
    if name == "mittag_leffler":
        need("alpha", "beta", "z")
        res = specfun.mittag_leffler(args.alpha, args.beta, args.z, **opts)
    elif name == "prabhakar":
        need("nu", "beta", "gamma", "z")
        res = specfun.prabhakar(args.nu, args.beta, args.gamma, args.z, **opts)
    elif name == "wright_phi":
        need("alpha", "beta", "z")
        res = specfun.wright_phi(args.alpha, args.beta, args.z, **opts)
    elif name == "gauss_2f1":
        need("a", "b", "c", "z")
        res = specfun.gauss_2f1(args.a, args.b, args.c, args.z, **opts)
    else:
        raise ParameterError(f"unknown function {args.function!r}")
    print(f"value={_fmt(res.value)}")
    print(f"abs_error_bound={_fmt(res.abs_error_bound)}")
    print(f"terms_used={res.terms_used}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# model construction from flags
# ---------------------------------------------------------------------------


def _parse_rates(text: str):
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ParameterError(f"cannot parse --rates {text!r}") from exc


def _species_model(args):
    model = args.model
    if model in (None, "tfpp", "constant"):
        return Constant(args.lam)
    if model == "linear" or model == "yule":
        return Linear(args.lam)
    if model == "nonlinear":
        if not args.rates:
            raise ParameterError("--model nonlinear requires --rates")
        return NonlinearDistinct(_parse_rates(args.rates))
    if model == "critical":
        return CriticalBD(args.lam)
    raise ParameterError(f"unknown model {model!r}")


def _effective_beta(args) -> float:
    if getattr(args, "model", None) == "critical":
        return 1.0
    if getattr(args, "alpha", None) is not None:
        return args.alpha
    return args.beta


def _build_params(args) -> ModelParams:
    genus_lam = args.genus_lambda if args.genus_lambda is not None else args.lam
    return ModelParams(
        genus_intensity=genus_lam,
        nu=args.nu,
        beta=_effective_beta(args),
        species_rates=_species_model(args),
    )


# ---------------------------------------------------------------------------
# pmf / moments
# ---------------------------------------------------------------------------


def _pmf_for_model(args) -> Pmf:
    if args.model == "tfpp":
        return tfpp_pmf(args.lam, _effective_beta(args), args.t, args.kmax)
    if args.model == "yule":
        return yule_marginal_pmf(args.lam, args.t, args.kmax)
    params = _build_params(args)
    return tn_pmf_table(params, args.t, args.kmax)


def _cmd_pmf(args) -> int:
    if args.model is None:
        raise ParameterError("--model is required")
    if args.rates and args.model != "nonlinear":
        raise ParameterError("--rates is only valid with --model nonlinear")
    pmf = _pmf_for_model(args)
    rows = []
    cum = 0.0
    for i, p in enumerate(pmf.probs):
        cum += p
        rows.append([pmf.support_start + i, p, cum])
    if args.format == "json":
        payload = {
            "schema_version": 1,
            "model": args.model,
            "support_start": pmf.support_start,
            "probs": list(pmf.probs),
            "truncation_tail_bound": pmf.truncation_tail_bound,
        }
        _emit(lambda out: out.write(json.dumps(payload, sort_keys=True) + "\n"),
              args.output)
    else:
        _emit(lambda out: _write_csv(["k", "probability", "cumulative"], rows, out),
              args.output)
    return EXIT_OK


def _cmd_moments(args) -> int:
    beta = _effective_beta(args)
    if args.model == "tfpp":
        mean = tfpp_mean(args.lam, beta, args.t)
        var = tfpp_variance(args.lam, beta, args.t)
        triple = (mean, var + mean * mean, var)
    elif args.model == "linear":
        triple = tn_moments_linear(args.lam, beta, args.nu, args.t)
    elif args.model == "critical":
        triple = tn_moments_critical(args.lam, args.nu, args.t)
    else:
        raise ParameterError(
            f"moments supports tfpp, linear and critical, got {args.model!r}"
        )
    rows = [[triple[0], triple[1], triple[2]]]
    _emit(
        lambda out: _write_csv(["mean", "second_moment", "variance"], rows, out),
        args.output,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / compare
# ---------------------------------------------------------------------------


def _default_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get(SEED_ENV_VAR, "12345"))


def _cmd_simulate(args, check_threshold: bool) -> int:
    seed = _default_seed(args)
    if args.target == "SYSTEM":
        params = _build_params(args)
        snap = simulate_system(params, args.t, RngStream(seed))
        text = json.dumps(snap.to_dict(), sort_keys=True, separators=(",", ":"))
        path = args.emit_snapshot if args.emit_snapshot else args.output
        _emit(lambda out: out.write(text + "\n"), path)
        return EXIT_OK

    config = McConfig(
        params=_build_params(args),
        t=args.t,
        n_samples=args.samples,
        seed=seed,
        target=Target(args.target),
        workers=args.workers,
    )
    report = run_experiment(config)
    _emit(lambda out: out.write(report.to_json() + "\n"), args.output)
    m = report.sample_moments
    print(
        f"target={report.target.value} n={report.n_samples} seed={seed} "
        f"workers={report.workers} tv={report.tv_distance:.6f} "
        f"ks={report.ks_statistic:.6f} mean={m.mean:.6f}+-{m.mean_se:.6f}",
        file=sys.stderr,
    )
    if check_threshold and report.tv_distance > args.tv_threshold:
        print(
            f"tv_distance {report.tv_distance:.6f} exceeds threshold "
            f"{args.tv_threshold}",
            file=sys.stderr,
        )
        return EXIT_THRESHOLD
    return EXIT_OK


# ---------------------------------------------------------------------------
# figure data
# ---------------------------------------------------------------------------


def figure_1_data(points: int = 101, quantity: str = "cdf", t: float = 1.0):
    """Genus birth-time law on [0, t]: cdf columns (x/t)**nu or density
    columns, one per nu in (1/4, 1/2, 3/4, 1)."""
    if quantity not in ("cdf", "pdf"):
        raise ParameterError(f"quantity must be cdf or pdf, got {quantity!r}")
    header = ["x"] + [f"nu_{nu:g}" for nu in _FIG1_NUS]
    rows = []
    for i in range(points):
        if quantity == "cdf":
            x = t * i / (points - 1)
            vals = [genus_time_cdf(nu, t, x) for nu in _FIG1_NUS]
        else:
            x = t * (i + 1) / points
            vals = [genus_time_pdf(nu, t, x) for nu in _FIG1_NUS]
        rows.append([x] + vals)
    return header, rows


def figure_2_data(k_max: int = 100, t: float = 10.0, lam: float = 1.0):
    """Linear-rate species-count law at t, one column per nu."""
    header = ["k"] + [f"nu_{nu:g}" for nu in _FIG2_NUS]
    cols = {}
    for nu in _FIG2_NUS:
        params = ModelParams(1.0, nu, 1.0, Linear(lam))
        cols[nu] = tn_pmf_table(params, t, k_max=k_max).probs
    rows = [[k] + [cols[nu][k - 1] for nu in _FIG2_NUS] for k in range(1, k_max + 1)]
    return header, rows


def figure_4_data(k: int = 0, t_max: float = 10.0, points: int = 40, lam: float = 1.0):
    """Critical-model probability of count k versus time, per nu.

    k = 0 is the extinct-genus probability (increasing in t)."""
    header = ["t"] + [f"nu_{nu:g}" for nu in _FIG4_NUS]
    rows = []
    for i in range(1, points + 1):
        t = t_max * i / points
        rows.append([t] + [tn_pmf_critical(lam, nu, t, k) for nu in _FIG4_NUS])
    return header, rows


def figure_5_data(k_max: int = 80, t: float = 1.0, lam: float = 1.0):
    """Critical-model species-count law versus k, per nu (exponential tail)."""
    header = ["k"] + [f"nu_{nu:g}" for nu in _FIG5_NUS]
    rows = [
        [k] + [tn_pmf_critical(lam, nu, t, k) for nu in _FIG5_NUS]
        for k in range(1, k_max + 1)
    ]
    return header, rows


def _cmd_figure(args) -> int:
    fig = args.figure
    if fig == 1:
        header, rows = figure_1_data(args.points, args.quantity, args.t or 1.0)
    elif fig == 2:
        header, rows = figure_2_data(args.kmax or 100, args.t or 10.0, args.lam)
    elif fig == 4:
        header, rows = figure_4_data(args.k, args.t or 10.0, args.points, args.lam)
    elif fig == 5:
        header, rows = figure_5_data(args.kmax or 80, args.t or 1.0, args.lam)
    else:
        raise ParameterError(f"unknown figure id {fig}; choose 1, 2, 4 or 5")
    _emit(lambda out: _write_csv(header, rows, out), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_model_flags(p):
    p.add_argument("--model", choices=["tfpp", "yule", "linear", "nonlinear",
                                       "constant", "critical"])
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="species rate (genus rate for genus-level targets)")
    p.add_argument("--genus-lambda", type=float, default=None,
                   help="genus intensity override (defaults to --lambda)")
    p.add_argument("--nu", type=float, default=1.0, help="genus time exponent")
    p.add_argument("--beta", type=float, default=1.0,
                   help="species fractional exponent")
    p.add_argument("--alpha", type=float, default=None,
                   help="fractional exponent alias used by tfpp-style models")
    p.add_argument("--t", type=float, default=1.0, help="observation time")
    p.add_argument("--rates", type=str, default=None,
                   help="comma-separated distinct rates for --model nonlinear")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genyule",
        description="Generalized Yule models: analytic laws, samplers, Monte Carlo",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a special function")
    p_eval.add_argument("function", help="gamma | mittag-leffler | prabhakar | "
                                         "wright-phi | gauss-2f1")
    for flag in ("x", "alpha", "beta", "z", "nu", "gamma", "a", "b", "c"):
        p_eval.add_argument(f"--{flag}", type=float, default=None)
    p_eval.add_argument("--tol", type=float, default=specfun.DEFAULT_TOL)
    p_eval.add_argument("--max-terms", type=int, default=specfun.DEFAULT_MAX_TERMS)
    p_eval.set_defaults(func=_cmd_eval)

    p_pmf = sub.add_parser("pmf", help="print an analytic pmf table")
    _add_model_flags(p_pmf)
    p_pmf.add_argument("--kmax", type=int, default=None)
    p_pmf.add_argument("--format", choices=["csv", "json"], default="csv")
    p_pmf.add_argument("--output", type=str, default=None)
    p_pmf.set_defaults(func=_cmd_pmf)

    p_mom = sub.add_parser("moments", help="print analytic moments")
    _add_model_flags(p_mom)
    p_mom.add_argument("--output", type=str, default=None)
    p_mom.set_defaults(func=_cmd_moments)

    targets = [t.value for t in Target] + ["SYSTEM"]
    for name, check in (("simulate", False), ("compare", True)):
        p_sim = sub.add_parser(name, help=f"{name} a Monte Carlo target")
        _add_model_flags(p_sim)
        p_sim.add_argument("--target", choices=targets, required=True)
        p_sim.add_argument("--samples", type=int, default=100_000)
        p_sim.add_argument("--seed", type=int, default=None,
                           help=f"defaults to ${SEED_ENV_VAR} or 12345")
        p_sim.add_argument("--workers", type=int, default=1)
        p_sim.add_argument("--output", type=str, default=None)
        p_sim.add_argument("--emit-snapshot", type=str, default=None,
                           help="snapshot JSON path for --target SYSTEM")
        if check:
            p_sim.add_argument("--tv-threshold", type=float, default=0.01)
        p_sim.set_defaults(func=lambda a, c=check: _cmd_simulate(a, c))

    p_fig = sub.add_parser("figure", help="emit figure curve data as CSV")
    p_fig.add_argument("--figure", type=int, required=True)
    p_fig.add_argument("--quantity", choices=["cdf", "pdf"], default="cdf",
                       help="figure 1 panel")
    p_fig.add_argument("--k", type=int, default=0, help="figure 4 count")
    p_fig.add_argument("--t", type=float, default=None)
    p_fig.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_fig.add_argument("--kmax", type=int, default=None)
    p_fig.add_argument("--points", type=int, default=101)
    p_fig.add_argument("--output", type=str, default=None)
    p_fig.set_defaults(func=_cmd_figure)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericsError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
