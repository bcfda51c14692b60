"""Command-line front end.

Exit codes: 0 success, 1 usage or config error, 2 validation failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import sys
from concurrent.futures import ThreadPoolExecutor

from . import analytic
from .config import RunConfig, load_config, policy_cells
from .errors import (ConfigError, DeltaNotZero, NoConvergence, SingularSystem,
                     StateSpaceTooLarge, TwinSyncError)
from .mdp import build_mdp, solve_constrained
from .policies import PolicySpec
from .rng import RngStream, substream_index
from .sim import estimate_point_cost, run_replication, simulate_cell

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3

CSV_COLUMNS = ("policy", "delta", "lambda_target", "cost_kind", "mean_cost", "stderr",
               "lambda_empirical", "replications", "horizon", "seed")
ANALYTIC_COLUMNS = ("form", "cost_kind", "delta", "t", "value")
Z_LIMIT = 4.0


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".12g")


def csv_line(values) -> str:
    return ",".join(fmt(v) for v in values) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--seed", type=_seed, help="overrides the config seed")
    common.add_argument("--reps", type=_positive_int, help="replications")
    common.add_argument("--horizon", type=_positive_float, help="simulated time per replication")
    common.add_argument("--overlap", choices=("preempt", "parallel"))
    common.add_argument("--workers", type=_positive_int, default=1,
                        help="threads for sweep cells and replications (output does not depend on it)")

    p = _Parser(prog="twinsync", description="Digital-twin synchronization toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("simulate", parents=[common], help="run replications for configured policies")
    s.add_argument("--trace", help="write the event trace of replication 0 of the first cell here")
    sub.add_parser("sweep", parents=[common], help="policy x delta x lambda x cost grid")
    v = sub.add_parser("validate", parents=[common],
                       help="Monte Carlo check of the closed-form point costs")
    v.add_argument("--crossed", action="store_true",
                   help="pair the estimators with the opposite closed form (expected to fail)")
    o = sub.add_parser("optimal", parents=[common], help="solve the rate-constrained MDP")
    o.add_argument("--budget", type=_positive_float, help="twinning-rate budget")
    sub.add_parser("analytic", parents=[common], help="closed-form expected cost curves")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.reps is not None:
        cfg.replications = args.reps
    if args.horizon is not None:
        cfg.horizon = args.horizon
    if args.overlap is not None:
        cfg.scenario = cfg.scenario.with_(overlap=args.overlap)
    return cfg


def grid_cells(cfg: RunConfig) -> list:
    """(policy, delta, lambda, PolicySpec) in output order; list position is the cell index."""
    cells = [(label, float(delta), lam, spec)
             for label, lam, spec in policy_cells(cfg) for delta in cfg.deltas]
    # Sorting first makes substreams a function of the configuration alone.
    cells.sort(key=lambda c: c[:3])
    return cells


def _grid_rows(cfg: RunConfig, workers: int) -> str:
    cells = grid_cells(cfg)

    def run(item):
        idx, (label, delta, lam, spec) = item
        scen = cfg.scenario.with_(delta=delta)
        return simulate_cell(scen, spec, cfg.costs, cfg.horizon, cfg.replications, cfg.seed,
                             cell=idx)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, enumerate(cells)))
    else:
        results = [run(item) for item in enumerate(cells)]

    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for (label, delta, lam, _), res in zip(cells, results):
        for ck in sorted(res.cost_labels):
            out.write(csv_line((label, delta, lam, ck, res.mean(ck), res.stderr(ck),
                                res.rate_mean, cfg.replications, cfg.horizon, cfg.seed)))
    return out.getvalue()


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(cfg: RunConfig, args) -> int:
    _emit(_grid_rows(cfg, args.workers), args.out)
    if args.trace:
        _, delta, _, spec = grid_cells(cfg)[0]
        summ = run_replication(cfg.scenario.with_(delta=delta), spec, cfg.costs, cfg.horizon,
                               RngStream(cfg.seed, substream_index(0, 0)), keep_trace=True)
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write(summ.trace.to_text())
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    _emit(_grid_rows(cfg, args.workers), args.out)
    return EXIT_OK


def validation_rows(cfg: RunConfig, crossed: bool = False):
    """Yield (check, tau, estimate, stderr, expected) for each grid point.

    Latch estimators are paired with the sojourn form and state-mismatch
    estimators with the diagonal form; ``crossed`` swaps the pairing.
    """
    scen = cfg.scenario
    latch_form, mismatch_form = ("paper_diagonal", "sojourn") if crossed else \
        ("sojourn", "paper_diagonal")
    stay = {"sojourn": analytic.holding_probability,
            "paper_diagonal": analytic.same_state_probability}
    for j, tau in enumerate(cfg.tau_grid):
        tau = float(tau)
        rng = RngStream(cfg.seed, j)
        est, se = estimate_point_cost(scen, tau, "latched_any", cfg.replications, rng)
        exp = analytic.expected_cost_c1(scen, t=tau, form=latch_form, delta=0.0)
        yield f"latched_any~{latch_form}", tau, est, se, exp
        est, se = estimate_point_cost(scen, tau, "latched_per_ps", cfg.replications, rng)
        for i, ps in enumerate(scen.systems):
            exp = 1.0 - stay[latch_form](ps.generator, tau=tau)
            yield f"latched[{ps.name}]~{latch_form}", tau, est[i], se[i], exp
        est, se = estimate_point_cost(scen, tau, "state_mismatch_per_ps", cfg.replications, rng)
        for i, ps in enumerate(scen.systems):
            exp = 1.0 - stay[mismatch_form](ps.generator, tau=tau)
            yield f"mismatch[{ps.name}]~{mismatch_form}", tau, est[i], se[i], exp


def z_score(est, se, exp) -> float:
    diff = est - exp
    if se > 0:
        return diff / se
    return 0.0 if abs(diff) <= 1e-12 else float("inf")


def cmd_validate(cfg: RunConfig, args) -> int:
    if cfg.replications < 100:
        raise ConfigError("validate needs at least 100 replications")
    out = io.StringIO()
    out.write("check,tau,estimate,stderr,expected,z,pass\n")
    ok = True
    for check, tau, est, se, exp in validation_rows(cfg, args.crossed):
        z = z_score(est, se, exp)
        good = abs(z) <= Z_LIMIT
        ok &= good
        out.write(csv_line((check, tau, est, se, exp, z, "yes" if good else "no")))
    _emit(out.getvalue(), args.out)
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_optimal(cfg: RunConfig, args) -> int:
    if args.budget is None:
        print("twinsync optimal: error: --budget is required", file=sys.stderr)
        return EXIT_USAGE
    if cfg.scenario.delta != 0:
        raise DeltaNotZero(f"the MDP assumes instantaneous syncs; config has delta={cfg.scenario.delta}")
    cost = cfg.costs[0]
    model = build_mdp(cfg.scenario, cost)
    sol = solve_constrained(model, args.budget)
    lam = args.budget
    contenders = [("lookup", PolicySpec.lookup(sol)), ("pptp", PolicySpec.pptp(lam)),
                  ("prtp", PolicySpec.prtp(lam))]
    out = io.StringIO()
    out.write(sol.to_text())
    out.write("\n")
    out.write(",".join(CSV_COLUMNS) + "\n")
    for idx, (label, spec) in enumerate(contenders):
        res = simulate_cell(cfg.scenario, spec, [cost], cfg.horizon, cfg.replications, cfg.seed,
                            cell=idx, workers=args.workers)
        out.write(csv_line((label, 0.0, lam, cost.label, res.cost_mean[0], res.cost_stderr[0],
                            res.rate_mean, cfg.replications, cfg.horizon, cfg.seed)))
    _emit(out.getvalue(), args.out)
    return EXIT_OK


def cmd_analytic(cfg: RunConfig, args) -> int:
    out = io.StringIO()
    out.write(",".join(ANALYTIC_COLUMNS) + "\n")
    scen = cfg.scenario
    kinds = {c.kind for c in cfg.costs} or {"c1"}
    for form in analytic.FORMS:
        for delta in cfg.deltas:
            for t in cfg.t_grid:
                t = float(t)
                if "c1" in kinds:
                    v = analytic.expected_cost_c1(scen, t=t, form=form, delta=delta)
                    out.write(csv_line((form, "c1", delta, t, v)))
                if "c2" in kinds:
                    v = analytic.expected_cost_c2(scen, t=t, form=form, delta=delta)
                    out.write(csv_line((form, "c2", delta, t, v)))
                if "c3" in kinds and form == "paper_diagonal":
                    v = analytic.expected_cost_c3_hamming(scen, t=t, delta=delta)
                    out.write(csv_line((form, "c3-hamming", delta, t, v)))
    _emit(out.getvalue(), args.out)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "validate": cmd_validate,
            "optimal": cmd_optimal, "analytic": cmd_analytic}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, require_grids=args.command == "sweep")
        cfg = _apply_overrides(cfg, args)
        return COMMANDS[args.command](cfg, args)
    except OSError as exc:
        print(f"twinsync: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoConvergence, SingularSystem, StateSpaceTooLarge) as exc:
        print(f"twinsync: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DeltaNotZero, TwinSyncError, ValueError) as exc:
        print(f"twinsync: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
