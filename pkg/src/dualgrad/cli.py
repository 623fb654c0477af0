"""Command-line entry point.

    dualgrad experiment ex1 --n 10,100 --sims 20 --seed 7 --out run/
    dualgrad experiment --config my.cfg
    dualgrad solve ex2 --n 100 --seed 3 --out one/
    dualgrad selftest --filter mittag
    dualgrad list

Exit codes: 0 success, 1 runtime or check failure, 2 usage or config error.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import report as rpt
from .config import ConfigError, build_spec, load_config
from .experiments import BUILTIN, build_problem, builtin_spec, relative_error, run_experiment
from .sampling import generate_ensemble
from .selftest import CHECKS, run_checks
from .solver import APriori, Discrepancy, SolverConfig, apriori_index, landweber, run

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_ENV = "DUALGRAD_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _n_list(text):
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    p = _Parser(prog="dualgrad", description="Dual gradient regularization with repeated measurements.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    e = sub.add_parser("experiment", help="run a built-in or configured Monte-Carlo experiment")
    e.add_argument("id", nargs="?", help="built-in experiment (ex1..ex4)")
    e.add_argument("--config", help="key = value configuration file")
    e.add_argument("--n", type=_n_list, help="comma-separated sample sizes")
    e.add_argument("--sims", type=int, help="simulations per sample size")
    e.add_argument("--seed", type=int, help=f"master seed (default: ${SEED_ENV} or 0)")
    e.add_argument("--out", help="output directory")
    e.add_argument("--jobs", type=int, help="worker processes")
    e.add_argument("--sampler", choices=("direct", "sufficient"))

    s = sub.add_parser("solve", help="one ensemble, one run; dumps the residual history")
    s.add_argument("id", help="built-in experiment (ex1..ex4)")
    s.add_argument("--n", type=int, default=100, help="sample size")
    s.add_argument("--seed", type=int, help=f"seed (default: ${SEED_ENV} or 0)")
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--rule", choices=("discrepancy", "apriori"))
    s.add_argument("--landweber", action="store_true", help="run plain Landweber instead")
    s.add_argument("--every", type=int, default=0, metavar="K",
                   help="also write every K-th iterate to iterates.csv")

    t = sub.add_parser("selftest", help="run the oracle checks")
    t.add_argument("--filter", help="only checks whose name contains this text")
    t.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    sub.add_parser("list", help="list built-in experiments and self-test checks")
    return p


def _env_seed():
    text = os.environ.get(SEED_ENV)
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {text!r}") from None


def _experiment_spec(args):
    if args.config and args.id:
        raise ConfigError("give either an experiment id or --config, not both")
    out, jobs = None, 1
    if args.config:
        cfg = load_config(args.config)
        fields, out, jobs = dict(cfg.fields), cfg.out, cfg.jobs
    elif args.id:
        fields = {"id": args.id}
    else:
        raise ConfigError("an experiment id or --config is required")
    if args.n is not None:
        fields["n_list"] = args.n
    if args.sims is not None:
        fields["n_sims"] = args.sims
    if args.sampler is not None:
        fields["sampler"] = args.sampler
    seed = args.seed if args.seed is not None else _env_seed()
    if seed is not None:
        fields["seed"] = seed
    elif "seed" not in fields:
        fields["seed"] = 0
    if args.jobs is not None:
        jobs = args.jobs
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = args.out or out or f"results/{fields.get('id', 'custom')}"
    return build_spec(fields), out, jobs


def cmd_experiment(args):
    try:
        spec, out, jobs = _experiment_spec(args)
    except ConfigError as exc:
        print(f"dualgrad experiment: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_experiment(spec, jobs=jobs)
    rpt.write_report(report, out)
    print(f"{spec.id}: problem {spec.problem}, penalty {spec.penalty}, "
          f"{spec.n_sims} sims per n, seed {spec.seed}, step {report.step:.4e}")
    print(rpt.format_table(report))
    print(f"wrote {out}")
    if report.failures:
        print(f"{report.failures} simulation(s) failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_solve(args):
    try:
        if args.id not in BUILTIN:
            raise ConfigError(f"unknown experiment {args.id!r}; choose from {', '.join(BUILTIN)}")
        seed = args.seed if args.seed is not None else _env_seed()
        overrides = {"n_list": (args.n,), "n_sims": 1, "seed": seed or 0}
        if args.rule:
            overrides["rule"] = args.rule
        spec = builtin_spec(args.id, **overrides)
        if args.landweber and spec.problem == "ex3":
            raise ConfigError("Landweber runs only on 1-D problems")
        if args.every < 0:
            raise ConfigError("--every must be nonnegative")
    except (ConfigError, ValueError) as exc:
        print(f"dualgrad solve: {exc}", file=sys.stderr)
        return EXIT_USAGE

    problem = build_problem(spec)
    ens = generate_ensemble(problem.y_exact, problem.data_weights, spec.noise, args.n,
                            seed=np.random.SeedSequence([spec.seed, args.n, 0]), method=spec.sampler)
    if spec.rule == "apriori":
        rule = APriori(apriori_index(args.n, ens.sigma, spec.q, spec.c_scale))
    else:
        rule = Discrepancy(spec.beta0, spec.tau0)
    cfg = SolverConfig(problem.step, max_iters=spec.max_iters, record_residuals=True)
    iterates = []

    def keep(state):
        if state.t % args.every == 0:
            iterates.append((state.t, problem.primal(state.x).copy()))

    callback = keep if args.every > 0 else None
    try:
        if args.landweber:
            res = landweber(problem.A, ens, rule, cfg, callback)
        else:
            res = run(problem.op, problem.penalty, ens, rule, cfg, callback)
    except (ArithmeticError, ValueError) as exc:
        print(f"dualgrad solve: {exc}", file=sys.stderr)
        return EXIT_FAIL

    x = problem.primal(res.x)
    err = relative_error(x, problem.x_true, problem.weights, spec.error_norm)
    os.makedirs(args.out, exist_ok=True)
    threshold = res.threshold if res.threshold is not None else float("nan")
    rpt.write_residuals(os.path.join(args.out, "residuals.csv"), res.residuals, threshold)
    path = os.path.join(args.out, "solution.csv")
    if problem.shape is None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("x_true,x\n")
            for a, b in zip(problem.x_true, x):
                fh.write(f"{rpt.fmt(float(a))},{rpt.fmt(float(b))}\n")
    else:
        rpt.write_field(path, x.reshape(problem.shape), f"N={spec.N},alpha={spec.alpha:g},T={spec.T:g}")
    if iterates:
        with open(os.path.join(args.out, "iterates.csv"), "w", encoding="utf-8", newline="") as fh:
            for t, v in iterates:
                fh.write(",".join([str(t)] + [rpt.fmt(float(a)) for a in v]) + "\n")
    print(f"{spec.id} n={args.n}: stopped at t={res.iterations} ({res.stop_cause}), "
          f"residual {res.residual:.4e}, relative {spec.error_norm} error {err:.4e}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_selftest(args):
    if args.filter and not any(args.filter in name for name in CHECKS):
        print(f"dualgrad selftest: no check matches {args.filter!r}", file=sys.stderr)
        return EXIT_USAGE
    results = run_checks(args.filter, inject_fault=args.inject_fault)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name:<24}{r.detail}  ({r.seconds:.2f} s)")
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_list(args):
    print("experiments:")
    for exp_id in BUILTIN:
        spec = builtin_spec(exp_id)
        noise = f"sigma={spec.sigma:g}" if spec.sigma is not None else f"sigma_rel={spec.sigma_rel:g}"
        print(f"  {exp_id}  penalty={spec.penalty} {noise} beta0={spec.beta0:g} "
              f"n_list={','.join(map(str, spec.n_list))}")
    print("selftest checks:")
    for name in CHECKS:
        print(f"  {name}")
    return EXIT_OK


COMMANDS = {
    "experiment": cmd_experiment,
    "solve": cmd_solve,
    "selftest": cmd_selftest,
    "list": cmd_list,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
