"""Command-line driver.

Every subcommand prints JSON on stdout.  Exit status is 0 on success, 1 on
a usage error and 2 when a computation is infeasible or a precondition
fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import adversary, bounds, dist, ingest, pointwise, smoothed
from .mechanisms import EnumerationLimitError, HistogramDB, MechanismDescriptor
from .numeric import RATIONAL, Epsilon, resolve_mode

SWEEP_COLUMNS = ("eps", "n", "T", "kind", "delta", "log_delta", "ci_low", "ci_high", "status")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _emit(obj, out=None) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    (out or sys.stdout).write(text + "\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _eps_arg(text: str) -> Epsilon:
    """``1.5``, ``ln2`` / ``ln(4)`` (exact factor) or ``inf``-free number."""
    t = text.strip().lower().replace(" ", "")
    if t.startswith("ln"):
        arg = t[2:].strip("()")
        try:
            return Epsilon.log_of(Fraction(arg))
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"bad eps {text!r}") from None
    try:
        return Epsilon.of(float(t))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eps {text!r}: {exc}") from None


def _mechanism(args) -> MechanismDescriptor:
    kind = args.mech
    if kind == "shm":
        return MechanismDescriptor.shm(args.T)
    if kind == "counting":
        return MechanismDescriptor.counting(args.T, getattr(args, "marked", 0) or 0)
    if kind == "coin":
        if args.p is None:
            raise UsageError("--p is required for the coin-flip mechanism")
        return MechanismDescriptor.coin_flip(Fraction(str(args.p)))
    if kind == "average":
        return MechanismDescriptor.continuous_average(args.T)
    raise UsageError(f"unknown mechanism {kind!r}")


def _pi_from_args(args, numeric: str) -> dist.DistributionSet:
    if getattr(args, "pi", None):
        return dist.DistributionSet.load(args.pi, numeric)
    if getattr(args, "bernoulli", None):
        return dist.DistributionSet([dist.bernoulli_pmf(Fraction(str(p)), mode=numeric) for p in args.bernoulli])
    if getattr(args, "sgd_setting", None):
        return dist.sgd_distribution_set(args.sgd_setting)
    raise UsageError("give a distribution set with --pi, --bernoulli or --sgd-setting")


# ---------------------------------------------------------------------------
# subcommands


def cmd_pointwise(args) -> int:
    numeric = resolve_mode(args.mode)
    if args.T is None and args.mech != "coin":
        raise UsageError("--T is required")
    H = HistogramDB(args.hist)
    mech = _mechanism(args)
    res = pointwise.pointwise_delta(mech, H, args.eps, numeric, method=args.method)
    _emit({
        "value": float(res.value),
        "exact_value": str(res.value) if numeric == RATIONAL else None,
        "log_value": res.log_value,
        "worst_neighbor": list(res.worst_neighbor) if res.worst_neighbor else None,
        "direction": res.direction,
        "eps": args.eps.value,
        "hist": list(H.counts),
        "T": mech.T,
        "mechanism": mech.kind,
    })
    return 0


def cmd_worstcase(args) -> int:
    numeric = resolve_mode(args.mode)
    mech = _mechanism(args)
    value, arg = pointwise.worst_case_dp_delta(mech, args.n, args.m, args.eps, numeric, return_argmax=True)
    _emit({
        "value": float(value),
        "exact_value": str(value) if numeric == RATIONAL else None,
        "argmax_hist": list(arg) if arg else None,
        "dp_lower_bound": bounds.shm_dp_lower_bound(args.n, mech.T) if mech.kind == "histogram_without_replacement" else None,
        "eps": args.eps.value,
        "n": args.n,
        "m": args.m,
        "T": mech.T,
    })
    return 0


def _build_query(args, numeric: str) -> smoothed.PrivacyQuery:
    pi = _pi_from_args(args, numeric)
    mixtures = tuple(tuple(_int_list(m)) for m in (args.mixture or ()))
    return smoothed.PrivacyQuery(
        mech=_mechanism(args),
        eps=args.eps,
        n=args.n,
        pi=pi,
        mode=args.query,
        trials=args.trials,
        seed=args.seed,
        confidence=args.confidence,
        numeric=numeric,
        mixtures=mixtures,
        threads=args.threads,
    )


def cmd_smoothed(args) -> int:
    numeric = resolve_mode(args.mode)
    q = _build_query(args, numeric)
    report = smoothed.smoothed_delta(q)
    if args.out:
        report.dump(args.out)
    _emit(report.to_json())
    return 0


def cmd_bounds(args) -> int:
    n, T = args.n, args.T
    eps = args.eps
    if eps is None:
        if not T < n:
            raise ValueError("the default eps ln(2n/(n-T)) needs T < n")
        eps = Epsilon.of(math.log(2 * n / (n - T)))
    out = {"n": n, "T": T, "m": args.m, "f": args.f, "c2": args.c2, "eps": eps.value}
    out["dp_lower_bound"] = bounds.shm_dp_lower_bound(n, T)
    if args.f is None:
        raise UsageError("--f (strict-positivity constant) is required")
    params = bounds.BoundParams(n=n, T=T, m=args.m, eps=eps, f=args.f, c2=args.c2)
    out["c"] = params.c
    out["upper_bound_log"] = bounds.shm_upper_bound_log(params)
    out["upper_bound"] = bounds.shm_upper_bound(params)
    out["tightness_floor_log"] = bounds.shm_tightness_floor_log(n, T, args.f)
    out["tightness_floor"] = bounds.shm_tightness_floor(n, T, args.f)
    try:
        out["with_replacement_bound"] = bounds.with_replacement_bound(n, T, args.f)
    except bounds.BoundNotApplicable as exc:
        out["with_replacement_bound"] = None
        out["with_replacement_note"] = str(exc)
    out["kind"] = "analytic_bound"
    _emit(out)
    return 0


def cmd_adversary(args) -> int:
    numeric = resolve_mode(args.mode)
    mech = _mechanism(args)
    if args.check:
        x, xp = HistogramDB(args.check[0]), HistogramDB(args.check[1])
        res = adversary.utility_bound_details(mech, x, xp, args.eps or Epsilon.of(0), numeric)
        _emit({
            "utility": float(res.utility),
            "d_sum": float(res.d_sum),
            "upper_holds": res.upper_holds,
            "lower_holds": res.lower_holds,
            "holds": res.holds,
        })
        return 0
    if mech.kind == "coin_flip":
        shared = HistogramDB((0, 0))
    else:
        if args.hist_minus is None:
            raise UsageError("--hist-minus (the database without the target record) is required")
        shared = HistogramDB(args.hist_minus)
    if args.t is not None:
        t = Fraction(str(args.t)) if numeric == RATIONAL else args.t
    elif args.eps is not None:
        t = adversary.utility_threshold(args.eps, numeric)
    else:
        raise UsageError("give --t or --eps")
    res = adversary.adjusted_utility(mech, shared, t, mode=numeric)
    _emit({"utility": float(res.value), "exact_value": str(res.value) if numeric == RATIONAL else None,
           "t": float(res.threshold_t)})
    return 0


def cmd_reduce(args) -> int:
    numeric = resolve_mode(args.mode)
    pi = _pi_from_args(args, numeric)
    idx = dist.vertex_indices(pi, numeric)
    _emit({"vertices": idx, "members": len(pi)})
    return 0


def cmd_ingest_check(args) -> int:
    records = ingest.load_election_csv(args.csv) if args.csv else [ingest.bundled_dc_2020()]
    rows = []
    for rec in records:
        pmf = ingest.to_top2_distribution(rec)
        row = {
            "year": rec.year,
            "unit": rec.unit,
            "top2": list(pmf.support),
            "shares": list(pmf.mass),
            "n": rec.top2_total,
        }
        if args.loss is not None:
            row["T"] = ingest.lost_votes_T(rec.top2_total, args.loss)
        rows.append(row)
    out = {"records": rows}
    if len(records) > 1:
        pi = ingest.election_distribution_set(records)
        out["vertices"] = [f"{records[i].unit} {records[i].year}" for i in dist.vertex_indices(pi)]
    _emit(out)
    return 0


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    rows: list
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"metadata": _jsonable(self.metadata), "rows": [_jsonable(r) for r in self.rows]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            writer.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                             for c in SWEEP_COLUMNS])
        return buf.getvalue()


def _sweep_pi(cfg: ingest.ExperimentConfig) -> tuple[dist.DistributionSet, str]:
    if cfg.pi:
        return dist.DistributionSet.load(cfg.pi, cfg.numeric), f"file {cfg.pi}"
    if cfg.scenario == "election":
        if cfg.election_csv:
            recs = ingest.load_election_csv(cfg.election_csv)
            return ingest.election_distribution_set(recs, cfg.numeric), f"election csv {cfg.election_csv}"
        rec = ingest.bundled_dc_2020()
        return dist.DistributionSet([ingest.to_top2_distribution(rec, cfg.numeric)]), "bundled DC 2020 top-two shares"
    return dist.sgd_distribution_set(cfg.sgd_setting), f"sgd setting {cfg.sgd_setting}"


def _row_seed(seed: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, i, j]).generate_state(1, np.uint64)[0])


def fit_log_linear(ns: Sequence[int], log_deltas: Sequence[float]) -> dict | None:
    if len(ns) < 3:
        return None
    res = stats.linregress(np.asarray(ns, dtype=float), np.asarray(log_deltas, dtype=float))
    return {"slope": float(res.slope), "intercept": float(res.intercept), "r_squared": float(res.rvalue**2),
            "points": len(ns)}


def run_sweep(cfg: ingest.ExperimentConfig, threads: int | None = None) -> SweepResult:
    pi, pi_source = _sweep_pi(cfg)
    rows = []
    for i, eps in enumerate(cfg.eps):
        for j, n in enumerate(cfg.n_grid):
            row = {"eps": eps, "n": n, "T": None, "kind": None, "delta": None, "log_delta": None,
                   "ci_low": None, "ci_high": None, "status": "ok"}
            try:
                T = cfg.T_for(n)
                row["T"] = T
                mode = cfg.mode
                if mode == "auto":
                    mode = "exact" if pi.m == 2 and n <= smoothed.EXACT_CAP[cfg.numeric] else "monte_carlo"
                q = smoothed.PrivacyQuery(
                    MechanismDescriptor.shm(T), Epsilon.of(eps), n, pi, mode=mode, trials=cfg.trials,
                    seed=_row_seed(cfg.seed, i, j), confidence=cfg.confidence, numeric=cfg.numeric,
                    threads=threads or cfg.threads,
                )
                rep = smoothed.smoothed_delta(q)
                row.update(kind=rep.kind, delta=rep.delta, log_delta=rep.log_delta)
                if rep.ci is not None:
                    row.update(ci_low=float(rep.ci[0]), ci_high=float(rep.ci[1]))
            except (ValueError, EnumerationLimitError, OverflowError) as exc:
                row["status"] = f"error: {exc}"
            rows.append(row)
    rows.sort(key=lambda r: (r["eps"], r["n"]))
    fits = []
    for eps in cfg.eps:
        pts = [(r["n"], r["log_delta"]) for r in rows
               if r["eps"] == eps and r["status"] == "ok" and r["log_delta"] is not None
               and math.isfinite(r["log_delta"])]
        fit = fit_log_linear([p[0] for p in pts], [p[1] for p in pts])
        if fit is not None:
            fits.append({"eps": eps, **fit})
    meta = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "confidence": cfg.confidence,
        "numeric": cfg.numeric,
        "pi_source": pi_source,
        "pi_fingerprint": pi.fingerprint(),
        "loss_ratio": cfg.loss_ratio,
        "batch_rule": cfg.batch_rule if cfg.scenario == "sgd" else None,
        "fits": fits,
        "columns": list(SWEEP_COLUMNS),
    }
    return SweepResult(rows, meta)


def cmd_sweep(args) -> int:
    if not args.config:
        raise UsageError("sweep needs --config")
    cfg = ingest.ExperimentConfig.load(args.config)
    result = run_sweep(cfg, threads=args.threads)
    if args.out_prefix:
        prefix = Path(args.out_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.csv").write_text(result.to_csv())
        Path(f"{prefix}.json").write_text(json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n")
    _emit(result.to_json())
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_mech(p, T_required=False):
    p.add_argument("--mech", choices=("shm", "counting", "coin", "average"), default="shm")
    p.add_argument("--T", type=int, required=T_required, help="sample count")
    p.add_argument("--p", type=float, help="coin-flip probability of reporting the true bit")
    p.add_argument("--marked", type=int, default=0, help="marked type of the counting mechanism")


def _add_numeric(p):
    p.add_argument("--mode", choices=("float", "rational"), default=None,
                   help="arithmetic mode (default: $SDP_NUMERIC_MODE or float)")


def _add_pi(p):
    p.add_argument("--pi", help="distribution-set JSON file")
    p.add_argument("--bernoulli", type=_float_list, help="comma-separated Bernoulli parameters")
    p.add_argument("--sgd-setting", choices=sorted(dist.SGD_SETTINGS), help="quantised-gradient preset")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smoothdp", description="Smoothed differential privacy accounting for sampling mechanisms.")
    parser.add_argument("--config", help="JSON file supplying defaults for the subcommand's flags")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pointwise", help="database-wise delta of one histogram")
    _add_mech(p)
    p.add_argument("--hist", type=_int_list, required=True)
    p.add_argument("--eps", type=_eps_arg, required=True)
    p.add_argument("--method", choices=("auto", "pairs", "enumerate"), default="auto")
    _add_numeric(p)
    p.set_defaults(func=cmd_pointwise)

    p = sub.add_parser("worstcase", help="standard DP delta over all histograms")
    _add_mech(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--eps", type=_eps_arg, required=True)
    _add_numeric(p)
    p.set_defaults(func=cmd_worstcase)

    p = sub.add_parser("smoothed", help="smoothed delta, exact or Monte Carlo")
    _add_mech(p)
    _add_pi(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=_eps_arg, required=True)
    p.add_argument("--query", choices=smoothed.QUERY_MODES, default="exact")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--mixture", action="append", help="agents per member, e.g. 3,7 (repeatable)")
    p.add_argument("--out", help="also write the report JSON here")
    _add_numeric(p)
    p.set_defaults(func=cmd_smoothed)

    p = sub.add_parser("sweep", help="n-grid x eps-grid experiment from a config file")
    p.add_argument("--out-prefix", help="write PREFIX.csv and PREFIX.json")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="closed-form bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--f", type=float, help="strict-positivity constant")
    p.add_argument("--eps", type=_eps_arg, default=None, help="default ln(2n/(n-T))")
    p.add_argument("--c2", type=float, default=0.5)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("adversary", help="Bayesian adversary utilities")
    _add_mech(p)
    p.add_argument("--hist-minus", type=_int_list, help="histogram of the known records")
    p.add_argument("--t", type=float, help="threshold in (0, 1)")
    p.add_argument("--eps", type=_eps_arg, help="use threshold e^eps/(e^eps+1)")
    p.add_argument("--check", nargs=2, type=_int_list, metavar=("X", "X_PRIME"),
                   help="check the utility bound on two neighbouring histograms")
    _add_numeric(p)
    p.set_defaults(func=cmd_adversary)

    p = sub.add_parser("reduce", help="indices of the hull vertices of a distribution set")
    _add_pi(p)
    _add_numeric(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("ingest-check", help="validate an election CSV and show top-two shares")
    p.add_argument("--csv", help="CSV with header year,unit,candidate,votes (default: bundled DC 2020)")
    p.add_argument("--loss", type=float, help="lost-ballot ratio; reports the resulting T")
    p.set_defaults(func=cmd_ingest_check)
    for p in sub.choices.values():
        p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file supplying flag defaults")
    return parser


def _config_defaults(argv: Sequence[str]) -> dict:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        data = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str], defaults: dict) -> None:
    """Use config values as the chosen subcommand's flag defaults."""
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    command = next((a for a in argv if a in sub_action.choices), None)
    if command is None:
        return
    for action in sub_action.choices[command]._actions:
        if action.dest in defaults:
            action.default = _coerce(action.dest, defaults[action.dest])
            action.required = False


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        defaults = {k.replace("-", "_"): v for k, v in _config_defaults(argv).items()}
        if "sweep" not in argv:
            _apply_config(parser, argv, defaults)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"smoothdp: error: {exc}", file=sys.stderr)
        return 1
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"smoothdp: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, EnumerationLimitError, OverflowError) as exc:
        print(f"smoothdp: error: {exc}", file=sys.stderr)
        return 2


def _coerce(dest: str, value):
    if dest == "eps" and not isinstance(value, Epsilon):
        return _eps_arg(str(value))
    if dest in ("hist", "hist_minus") and isinstance(value, str):
        return _int_list(value)
    if dest == "bernoulli" and isinstance(value, str):
        return _float_list(value)
    return value


if __name__ == "__main__":
    sys.exit(main())
