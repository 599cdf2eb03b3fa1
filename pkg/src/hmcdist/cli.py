"""Command-line entry point ``hmcdist``.

Exit codes: 0 on a clean run, 1 on a negative verdict (not equivalent, not
distinguishable, not monitorable, or a failed error-bound check), 2 on usage
or validation errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import harness, monitors as mon, rv
from .distinguish import GuardExceeded, equivalent, profile_constant, refined_constant, word_str
from .model import ClassifiedHmc, Hmc, ModelError, format_model, load_model
from .sampling import sample_run

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _hmc(path: str) -> Hmc:
    m = load_model(path)
    if isinstance(m, ClassifiedHmc):
        return m.hmc
    return m


def _chmc(path: str) -> ClassifiedHmc:
    m = load_model(path)
    if not isinstance(m, ClassifiedHmc):
        raise UsageError(f"{path}: expected a chmc file")
    return m


def read_stream(source: str, alphabet) -> list[str]:
    """Whitespace-separated symbols; a token that is not a symbol but spells
    single-character symbols is split into characters."""
    text = sys.stdin.read() if source == "-" else open(source, encoding="utf-8").read()
    out = []
    for tok in text.split():
        if tok in alphabet or len(tok) == 1:
            out.append(tok)
        elif all(ch in alphabet for ch in tok):
            out.extend(tok)
        else:
            out.append(tok)
    return out


def _emit(args, payload: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _testset_label(ts) -> str:
    return "[" + ",".join(word_str(w) for w in ts.words) + "]"


# --------------------------------------------------------------------------
# subcommands

def cmd_check_equiv(args) -> int:
    h1, h2 = _hmc(args.model1), _hmc(args.model2)
    eq = equivalent(h1, h2)
    _emit(args, {"equivalent": eq}, ["EQUIVALENT" if eq else "NOT EQUIVALENT"])
    return EXIT_OK if eq else EXIT_NEGATIVE


def cmd_check_disting(args) -> int:
    h1, h2 = _hmc(args.model1), _hmc(args.model2)
    rep = profile_constant(h1, h2)
    labels = [word_str(w) for w in rep.testset.words]
    if rep.distinguishable:
        line = f"DISTINGUISHABLE c={rep.c} TEST={_testset_label(rep.testset)}"
    else:
        line = "NOT DISTINGUISHABLE"
    _emit(args, {"distinguishable": rep.distinguishable, "c": str(rep.c), "test": labels,
                 "reachable_pairs": sorted(map(list, rep.reachable_pairs))}, [line])
    return EXIT_OK if rep.distinguishable else EXIT_NEGATIVE


def cmd_refine_c(args) -> int:
    h1, h2 = _hmc(args.model1), _hmc(args.model2)
    c = refined_constant(h1, h2, size_guard=args.guard)
    _emit(args, {"refined_c": str(c)}, [f"REFINED c={c}"])
    return EXIT_OK if c > 0 else EXIT_NEGATIVE


def _models(paths) -> list[Hmc]:
    if len(paths) < 2:
        raise UsageError("need at least two models")
    return [_hmc(p) for p in paths]


def cmd_plan(args) -> int:
    models = _models(args.models)
    if (args.eps is None) == (args.low is None):
        raise UsageError("give exactly one of --eps and --low")
    if len(models) > 2:
        if args.low is not None:
            raise UsageError("--low applies to two models only")
        plan = mon.plan_models(models, args.eps)
        payload = {"kind": "multi", "phases": plan.phases, "phase_length": plan.phase_length,
                   "observations": plan.observations, "c": str(plan.c), "eps": args.eps}
        _emit(args, payload, [f"PLAN multi N={plan.phases} m={plan.phase_length} "
                              f"OBS={plan.observations} c={plan.c}"])
        return EXIT_OK
    h1, h2 = models
    rep = profile_constant(h1, h2)
    if not rep.distinguishable:
        _emit(args, {"distinguishable": False}, ["NOT DISTINGUISHABLE"])
        return EXIT_NEGATIVE
    m = h1.n + h2.n
    if args.eps is not None:
        plan = mon.plan_two_sided(rep.c, args.eps, m)
        payload = {"kind": "two-sided", "phases": plan.phases, "phase_length": m,
                   "observations": plan.observations,
                   "walk_observations": mon.walk_observations(plan.phases, m),
                   "c": str(rep.c), "eps": args.eps}
        lines = [f"PLAN two-sided N={plan.phases} m={m} OBS={plan.observations} c={rep.c}"]
    else:
        n0 = mon.one_sided_threshold_phases(rep.c, args.low)
        bound = mon.expected_alarm_bound(rep.c, args.low, m)
        payload = {"kind": "one-sided", "threshold_phases": n0, "phase_length": m,
                   "expected_alarm_bound": bound, "c": str(rep.c), "low": args.low}
        lines = [f"PLAN one-sided N0={n0} m={m} EXPECTED-ALARM<={bound:.1f} c={rep.c}"]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_monitor(args) -> int:
    models = _models(args.models)
    stream = read_stream(args.stream, set(models[0].alphabet))
    mode = args.mode
    if mode != "multi" and len(models) != 2:
        raise UsageError(f"--mode {mode} needs exactly two models")
    if mode == "one-sided":
        if args.low is None:
            raise UsageError("--mode one-sided needs --low")
        h1, h2 = models
        out = mon.run_m1(h1, h2, stream, args.low, horizon=args.horizon)
        _emit(args, {"status": out.status, "observations": out.observations}, [out.line()])
        return EXIT_OK
    if args.eps is None and args.phases is None:
        raise UsageError(f"--mode {mode} needs --eps or --phases")
    if mode == "multi":
        reports = mon.pairwise_reports(models)
        if args.phases is not None:
            c = min(r.c for r in reports.values())
            plan = mon.MonitorPlan(args.phases, 2 * max(h.n for h in models), c)
        else:
            plan = mon.plan_models(models, args.eps, reports)
        v = mon.run_multi(models, reports, stream, plan)
    else:
        h1, h2 = models
        rep = profile_constant(h1, h2)
        if not rep.distinguishable:
            _emit(args, {"distinguishable": False}, ["NOT DISTINGUISHABLE"])
            return EXIT_NEGATIVE
        m = h1.n + h2.n
        if args.phases is not None:
            plan = mon.MonitorPlan(args.phases, m, rep.c)
        else:
            plan = mon.plan_two_sided(rep.c, args.eps, m)
        if mode == "two-sided":
            v = mon.run_m2(h1, h2, stream, plan)
        else:
            v = mon.run_m2prime(h1, h2, rep, stream, plan)
    _emit(args, {"decision": v.decision, "observations": v.observations}, [v.line()])
    return EXIT_OK


def cmd_simulate(args) -> int:
    h = _hmc(args.model)
    run = sample_run(h, args.len, args.seed)
    _emit(args, {"seed": args.seed, "symbols": list(run.symbols)}, [" ".join(run.symbols)])
    return EXIT_OK


def cmd_evaluate(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    base = os.path.dirname(os.path.abspath(args.config))
    try:
        kind = cfg["monitor"]
        paths = cfg["models"]
    except KeyError as e:
        raise UsageError(f"config is missing {e}") from None
    models = [_hmc(os.path.join(base, p)) for p in paths]
    report = harness.estimate_error(kind, models, cfg.get("trials", 2000), cfg.get("seed", 0),
                                    eps=cfg.get("eps"), low=cfg.get("low"),
                                    phases=cfg.get("phases"), horizon=cfg.get("horizon"),
                                    workers=args.workers)
    data = report.to_json()
    lines = [f"EVALUATE {kind} trials={report.trials} seed={report.seed} "
             f"N={report.phases} m={report.phase_length} c={report.c}"]
    for s in report.sources:
        lines.append(f"SOURCE {s.source} error={s.error_rate:.4f} bound={s.bound:.4f} "
                     f"slack={s.slack:.4f} mean_obs={s.mean_observations:.1f} "
                     f"{'PASS' if s.passed else 'FAIL'}")
    _emit(args, data, lines)
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def cmd_condition(args) -> int:
    c = _chmc(args.model)
    h_bad, h_good = rv.condition(c)
    _emit(args, {"bad": format_model(h_bad), "good": format_model(h_good)},
          ["# conditioned on Bad", format_model(h_bad).rstrip(),
           "# conditioned on Good", format_model(h_good).rstrip()])
    return EXIT_OK


def cmd_monitorability(args) -> int:
    res = rv.decide_monitorable(_chmc(args.model))
    line = f"MONITORABLE c={res.report.c}" if res.monitorable else "NOT MONITORABLE"
    _emit(args, {"monitorable": res.monitorable, "c": str(res.report.c)}, [line])
    return EXIT_OK if res.monitorable else EXIT_NEGATIVE


def cmd_exact_measure(args) -> int:
    h1, h2 = _hmc(args.model1), _hmc(args.model2)
    vm = harness.exact_verdict_measure(h1, h2, args.phases, args.mode, guard=args.guard)
    gain = harness.flip_gain(vm)
    payload = {"length": vm.length,
               "under1": {str(k): str(v) for k, v in vm.under1.items()},
               "under2": {str(k): str(v) for k, v in vm.under2.items()},
               "flip_gain": str(gain)}
    lines = [f"LENGTH {vm.length}"]
    for d in (1, 2, 3):
        lines.append(f"OUTPUT{d} P1={vm.under1[d]} P2={vm.under2[d]}")
    lines.append(f"FLIP-GAIN {gain}")
    _emit(args, payload, lines)
    return EXIT_OK


# --------------------------------------------------------------------------

def _probability(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hmcdist", description="Distinguish and monitor hidden Markov chains.")
    p.add_argument("--json", action="store_true", help="print one JSON object instead of text")
    sub = p.add_subparsers(dest="command", required=True)

    def pair(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("model1")
        sp.add_argument("model2")
        sp.set_defaults(fn=fn)
        return sp

    pair("check-equiv", cmd_check_equiv, "decide equivalence from the initial states")
    pair("check-disting", cmd_check_disting, "decide distinguishability and print c and the test set")
    sp = pair("refine-c", cmd_refine_c, "larger constant from the support-pair search")
    sp.add_argument("--guard", type=int, default=1 << 12, help="cap on support pairs and phase words")

    sp = sub.add_parser("plan", help="phase counts for a target error or alarm threshold")
    sp.add_argument("models", nargs="+")
    sp.add_argument("--eps", type=_probability)
    sp.add_argument("--low", type=_probability)
    sp.set_defaults(fn=cmd_plan)

    sp = sub.add_parser("monitor", help="run a monitor on an observation stream")
    sp.add_argument("models", nargs="+")
    sp.add_argument("--mode", choices=["two-sided", "walk", "one-sided", "multi"], required=True)
    sp.add_argument("--stream", required=True, help="file of symbols, or - for stdin")
    sp.add_argument("--eps", type=_probability)
    sp.add_argument("--low", type=_probability)
    sp.add_argument("--phases", type=int, help="override the planned phase count")
    sp.add_argument("--horizon", type=int, help="one-sided: maximum number of phases")
    sp.set_defaults(fn=cmd_monitor)

    sp = sub.add_parser("simulate", help="sample an observation stream")
    sp.add_argument("model")
    sp.add_argument("--len", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("evaluate", help="Monte-Carlo error rates from a JSON config")
    sp.add_argument("config")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(fn=cmd_evaluate)

    sp = sub.add_parser("condition", help="bad- and good-conditioned chains of a chmc")
    sp.add_argument("model")
    sp.set_defaults(fn=cmd_condition)

    sp = sub.add_parser("monitorability", help="decide whether a chmc is monitorable")
    sp.add_argument("model")
    sp.set_defaults(fn=cmd_monitorability)

    sp = pair("exact-measure", cmd_exact_measure, "exact verdict probabilities by enumeration")
    sp.add_argument("--phases", type=int, required=True)
    sp.add_argument("--mode", choices=["two-sided", "walk"], default="two-sided")
    sp.add_argument("--guard", type=int, default=harness.EXACT_GUARD)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.fn(args)
    except mon.NotDistinguishableError as e:
        _emit(args, {"distinguishable": False, "detail": str(e)}, ["NOT DISTINGUISHABLE"])
        return EXIT_NEGATIVE
    except (UsageError, ModelError, GuardExceeded, mon.TruncatedStreamError,
            OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
