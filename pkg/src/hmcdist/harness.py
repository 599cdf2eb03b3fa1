"""Monte-Carlo error estimation and exact verdict measures.

The Monte-Carlo engine runs the likelihood-based monitors on whole batches of
simulated streams with numpy; its per-row semantics are those of
:mod:`hmcdist.monitors` (the tests compare the two row by row). The random-walk
monitor needs exact arithmetic per phase and is run stream by stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import monitors as mon
from .distinguish import DistinguishabilityReport, GuardExceeded, profile_constant
from .exact import ZERO
from .forward import filter_update
from .model import Hmc, ModelValidationError
from .sampling import PathSampler, trial_seed

SCHEMA = "hmcdist.error-report/1"
KINDS = ("two-sided", "walk", "one-sided", "multi")
BLOCK = 512


def binomial_slack(p: float, trials: int, sigmas: float = 3.0) -> float:
    p = min(max(p, 0.0), 1.0)
    return sigmas * math.sqrt(p * (1 - p) / trials)


# --------------------------------------------------------------------------
# batched likelihood tracking

class _Batch:
    """Normalised forward filters of one chain over ``B`` streams at once."""

    def __init__(self, h: Hmc, B: int, symbols: Sequence[str]):
        self.h = h
        self.P = h.float_matrix
        self.adj = h.adjacency
        self.probs = np.zeros((B, h.n))
        self.probs[:, h.index[h.init]] = 1.0
        self.supp = self.probs > 0
        self.loglik = np.zeros(B)
        self.dead_at = np.zeros(B, dtype=np.int64)  # 0: alive, else observation count
        # mask per common-alphabet symbol; symbols outside the alphabet emit nowhere
        self.masks = np.array([h.emission_masks[h.alphabet.index(a)] if a in h.alphabet
                               else np.zeros(h.n, dtype=bool) for a in symbols])
        self.count = 0

    def step(self, sym: np.ndarray) -> None:
        self.count += 1
        probs, supp, logz, dead = filter_update(self.probs, self.supp, self.masks[sym],
                                                self.count == 1, self.P, self.adj)
        self.probs, self.supp = probs, supp
        newly = dead & (self.dead_at == 0)
        self.dead_at[newly] = self.count
        self.loglik = np.where(self.dead_at > 0, -np.inf, self.loglik + np.where(dead, 0.0, logz))

    @property
    def zero(self) -> np.ndarray:
        return self.dead_at > 0


def _symbol_table(source: Hmc, symbols: Sequence[str]) -> np.ndarray:
    pos = {a: i for i, a in enumerate(symbols)}
    return np.array([pos[source.obs[s]] for s in source.states])


def _stream_blocks(source: Hmc, seeds: Sequence[int], length: int, symbols: Sequence[str]):
    table = _symbol_table(source, symbols)
    sampler = PathSampler(source, seeds)
    done = 0
    while done < length:
        k = min(BLOCK, length - done)
        yield table[sampler.next(k)]
        done += k


def _decode(symbols, row) -> list[str]:
    return [symbols[i] for i in row]


def batch_m2(h1: Hmc, h2: Hmc, source: Hmc, seeds: Sequence[int], plan: mon.MonitorPlan):
    """Verdicts and observation counts of the likelihood monitor, one per seed."""
    symbols = list(h1.alphabet)
    L = plan.observations
    B = len(seeds)
    f1, f2 = _Batch(h1, B, symbols), _Batch(h2, B, symbols)
    keep = [] if L <= mon.TIE_EXACT_MAX_LEN else None
    for block in _stream_blocks(source, seeds, L, symbols):
        if keep is not None:
            keep.append(block)
        for t in range(block.shape[1]):
            f1.step(block[:, t])
            f2.step(block[:, t])
    d1 = np.where(f1.zero, f1.dead_at, L + 1)
    d2 = np.where(f2.zero, f2.dead_at, L + 1)
    first = np.minimum(d1, d2)
    log_lr = f2.loglik - f1.loglik
    decision = np.where(log_lr <= 0, mon.OUTPUT1, mon.OUTPUT2)
    decision = np.where(d1 < d2, mon.OUTPUT2, decision)
    decision = np.where(d2 < d1, mon.OUTPUT1, decision)
    decision = np.where((d1 == d2) & (d1 <= L), mon.OUTPUT3, decision)
    obs = np.where(first <= L, first, L)
    if keep is not None:
        words = np.concatenate(keep, axis=1)
        alive = first > L
        with np.errstate(invalid="ignore"):
            near = alive & (np.abs(log_lr) <= mon.TIE_LOG_TOL)
        for i in np.flatnonzero(near):
            w = _decode(symbols, words[i])
            decision[i] = mon.m2_decision(mon._exact_pr(h1, w), mon._exact_pr(h2, w))
    return decision, obs


def batch_m1(h1: Hmc, h2: Hmc, source: Hmc, seeds: Sequence[int], low: float, m: int, horizon: int):
    """Outcome codes (0 no alarm, 1 alarm, 2 impossible) and observation counts."""
    symbols = list(h1.alphabet)
    B = len(seeds)
    f1, f2 = _Batch(h1, B, symbols), _Batch(h2, B, symbols)
    log_low = math.log(low)
    status = np.full(B, -1)
    obs = np.zeros(B, dtype=np.int64)
    n = 0
    for block in _stream_blocks(source, seeds, horizon * m, symbols):
        for t in range(block.shape[1]):
            f1.step(block[:, t])
            f2.step(block[:, t])
            n += 1
            open_ = status < 0
            imp = open_ & f1.zero
            status[imp], obs[imp] = 2, n
            if n % m == 0:
                open_ = status < 0
                with np.errstate(invalid="ignore"):
                    hit = open_ & (f2.zero | (f2.loglik - f1.loglik <= log_low))
                status[hit], obs[hit] = 1, n
            if not (status < 0).any():
                return status, obs
    rest = status < 0
    status[rest], obs[rest] = 0, n
    return status, obs


def batch_multi(models: Sequence[Hmc], source: Hmc, seeds: Sequence[int], plan: mon.MonitorPlan):
    """1-based chosen indices (0 when no model fits) and observation counts."""
    symbols = list(models[0].alphabet)
    L = plan.observations
    B = len(seeds)
    fs = [_Batch(h, B, symbols) for h in models]
    keep = [] if L <= mon.TIE_EXACT_MAX_LEN else None
    for block in _stream_blocks(source, seeds, L, symbols):
        if keep is not None:
            keep.append(block)
        for t in range(block.shape[1]):
            for f in fs:
                f.step(block[:, t])
    logs = np.stack([f.loglik for f in fs], axis=1)
    all_dead = np.all(np.stack([f.zero for f in fs], axis=1), axis=1)
    dead_time = np.max(np.stack([f.dead_at for f in fs], axis=1), axis=1)
    choice = np.argmax(logs, axis=1) + 1  # argmax returns the first maximum
    choice = np.where(all_dead, mon.NO_MODEL, choice)
    obs = np.where(all_dead, dead_time, L)
    if keep is not None:
        words = np.concatenate(keep, axis=1)
        best = logs.max(axis=1, keepdims=True)
        with np.errstate(invalid="ignore"):
            near = ((best - logs) <= mon.TIE_LOG_TOL) & np.isfinite(logs)
        for i in np.flatnonzero(~all_dead & (near.sum(axis=1) > 1)):
            w = _decode(symbols, words[i])
            probs = [mon._exact_pr(h, w) for h in models]
            choice[i] = probs.index(max(probs)) + 1
    return choice, obs


# --------------------------------------------------------------------------
# reports

@dataclass
class SourceResult:
    source: int
    trials: int
    error_rate: float
    bound: float
    slack: float
    passed: bool
    mean_observations: float
    p50_observations: float
    p90_observations: float
    p99_observations: float
    extra: dict = field(default_factory=dict)


@dataclass
class ErrorReport:
    kind: str
    trials: int
    seed: int
    phases: int
    phase_length: int
    c: str
    sources: list[SourceResult]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.sources)

    def to_json(self) -> dict:
        d = {"schema": SCHEMA, **asdict(self)}
        d["passed"] = self.passed
        return d


def _summary(obs: np.ndarray) -> dict:
    if obs.size == 0:
        return dict(mean_observations=0.0, p50_observations=0.0,
                    p90_observations=0.0, p99_observations=0.0)
    p50, p90, p99 = np.percentile(obs, [50, 90, 99])
    return dict(mean_observations=float(obs.mean()), p50_observations=float(p50),
                p90_observations=float(p90), p99_observations=float(p99))


def _chunks(n: int, size: int):
    return [range(i, min(n, i + size)) for i in range(0, n, size)]


def _run_chunks(fn, trials: int, master_seed: int, chunk: int, workers: int):
    """Apply ``fn(seeds)`` to consecutive trial chunks; concatenates results in trial order."""
    parts = _chunks(trials, chunk)
    seed_lists = [[trial_seed(master_seed, i) for i in r] for r in parts]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(fn, seed_lists))
    else:
        results = [fn(s) for s in seed_lists]
    return tuple(np.concatenate([r[j] for r in results]) for j in range(len(results[0])))


def _source_seed(master_seed: int, source: int) -> int:
    return trial_seed(master_seed ^ 0x5EED, source)


def one_sided_horizon(c, low) -> int:
    """Default phase horizon for the one-sided monitor: ten times the threshold phase count."""
    return max(1, 10 * mon.one_sided_threshold_phases(c, low))


def estimate_error(kind: str, models: Sequence[Hmc], trials: int = 2000, master_seed: int = 0, *,
                   eps: float | None = None, low: float | None = None, phases: int | None = None,
                   horizon: int | None = None, reports=None, chunk: int = 2000,
                   workers: int = 1) -> ErrorReport:
    """Empirical error rates of one monitor against its theoretical bound.

    Each source chain gets ``trials`` streams seeded from ``master_seed``.
    A source passes when its error rate is at most the bound plus a 3-sigma
    binomial slack. For the one-sided monitor the second chain's row records
    false alarms and the first chain's row records missed alarms, with the
    mean response time checked against :func:`monitors.expected_alarm_bound`.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown monitor kind {kind!r}; choose from {KINDS}")
    if trials < 100:
        raise ValueError("need at least 100 trials")
    models = list(models)
    if kind == "multi":
        reports = mon.pairwise_reports(models) if reports is None else reports
        plan = mon.plan_models(models, eps, reports)
    else:
        if len(models) != 2:
            raise ValueError(f"{kind} monitor needs exactly two models")
        rep = profile_constant(*models) if reports is None else reports
        if not rep.distinguishable:
            raise mon.NotDistinguishableError("the chains are not distinguishable")
        m = models[0].n + models[1].n
        if kind == "one-sided":
            if low is None:
                raise ValueError("one-sided monitor needs low")
            plan = mon.MonitorPlan(horizon or one_sided_horizon(rep.c, low), m, rep.c, low=float(low))
        else:
            if eps is None:
                raise ValueError(f"{kind} monitor needs eps")
            plan = mon.plan_two_sided(rep.c, eps, m)
    if phases is not None:
        plan = mon.MonitorPlan(phases, plan.phase_length, plan.c, plan.eps, plan.low, plan.models)
    c2 = float(plan.c) ** 2
    sources = []
    for idx, src in enumerate(models, start=1):
        ms = _source_seed(master_seed, idx)
        if kind == "two-sided":
            dec, obs = _run_chunks(lambda s: batch_m2(*models, src, s, plan), trials, ms, chunk, workers)
            bound = 2 * math.exp(-c2 * plan.phases / 18)
            wrong = dec != idx
            extra = {"output3": int((dec == mon.OUTPUT3).sum())}
        elif kind == "multi":
            dec, obs = _run_chunks(lambda s: batch_multi(models, src, s, plan), trials, ms, chunk, workers)
            bound = 2 * len(models) * math.exp(-c2 * plan.phases / 18)
            wrong = dec != idx
            extra = {"no_model": int((dec == mon.NO_MODEL).sum())}
        elif kind == "walk":
            dec, obs = _run_chunks(lambda s: _walk_rows(models, rep, src, s, plan), trials, ms, chunk, workers)
            bound = math.exp(-c2 * plan.phases / 18)
            wrong = dec != idx
            extra = {}
        else:
            st, obs = _run_chunks(lambda s: batch_m1(*models, src, s, plan.low, plan.phase_length,
                                                     plan.phases), trials, ms, chunk, workers)
            alarmed = st == 1
            if idx == 2:
                bound = plan.low
                wrong = alarmed
                extra = {"impossible": int((st == 2).sum()), "horizon_phases": plan.phases}
            else:
                bound = 0.01
                wrong = ~alarmed
                resp = float(obs[alarmed].mean()) if alarmed.any() else math.inf
                limit = mon.expected_alarm_bound(plan.c, plan.low, plan.phase_length)
                extra = {"mean_response": resp, "response_bound": limit,
                         "response_ok": resp <= limit, "horizon_phases": plan.phases}
        rate = float(wrong.mean())
        slack = binomial_slack(bound, trials)
        ok = rate <= bound + slack and extra.get("response_ok", True)
        sources.append(SourceResult(idx, trials, rate, bound, slack, bool(ok), **_summary(obs), extra=extra))
    return ErrorReport(kind, trials, master_seed, plan.phases, plan.phase_length, str(plan.c), sources)


def _walk_rows(models, rep, src, seeds, plan):
    from .sampling import sample_run
    L = mon.walk_observations(plan.phases, plan.phase_length)
    dec, obs = [], []
    for s in seeds:
        v = mon.run_m2prime(models[0], models[1], rep, sample_run(src, L, s).symbols, plan)
        dec.append(v.decision)
        obs.append(v.observations)
    return np.array(dec), np.array(obs)


# --------------------------------------------------------------------------
# exact verdict measures

@dataclass
class VerdictMeasure:
    """Exact probability of each verdict under each chain, plus the per-word table."""

    kind: str
    length: int
    under1: dict[int, Fraction]
    under2: dict[int, Fraction]
    table: list[tuple[tuple[str, ...], Fraction, Fraction, int]]

    def output1_set(self) -> list[tuple[str, ...]]:
        return [w for w, _, _, d in self.table if d == mon.OUTPUT1]


EXACT_GUARD = 1 << 20


def _words_with_probs(h1: Hmc, h2: Hmc, L: int):
    """Depth-first enumeration of all length-``L`` words with exact probabilities.

    Branches that are impossible under both chains are pruned (they carry no
    mass and the monitors answer 3 on them).
    """
    symbols = list(h1.alphabet)
    P1, P2 = h1.matrix, h2.matrix

    def start(h, a):
        return [ZERO if (s != h.init or h.obs[s] != a) else Fraction(1) for s in h.states]

    def extend(h, P, alpha, a):
        return [sum((alpha[t] * P[t][r] for t in range(h.n) if alpha[t] and P[t][r]), ZERO)
                if h.obs[h.states[r]] == a else ZERO for r in range(h.n)]

    stack = [((a,), start(h1, a), start(h2, a)) for a in reversed(symbols)]
    while stack:
        w, a1, a2 = stack.pop()
        if not any(a1) and not any(a2):
            continue
        if len(w) == L:
            yield w, sum(a1, ZERO), sum(a2, ZERO)
            continue
        for a in reversed(symbols):
            stack.append((w + (a,), extend(h1, P1, a1, a), extend(h2, P2, a2, a)))


def exact_verdict_measure(h1: Hmc, h2: Hmc, phases: int, kind: str = "two-sided",
                          report: DistinguishabilityReport | None = None,
                          guard: int = EXACT_GUARD) -> VerdictMeasure:
    """Enumerate every stream of the monitor's full length and sum exact probabilities per verdict."""
    if set(h1.alphabet) != set(h2.alphabet):
        raise ModelValidationError("chains must share an alphabet")
    m = h1.n + h2.n
    if kind == "two-sided":
        L = phases * m
    elif kind == "walk":
        L = mon.walk_observations(phases, m)
        report = profile_constant(h1, h2) if report is None else report
    else:
        raise ValueError("exact measures are available for the two-sided and walk monitors")
    if len(h1.alphabet) ** L > guard:
        raise GuardExceeded(f"{len(h1.alphabet)}^{L} words exceed the guard {guard}")
    plan = mon.MonitorPlan(phases, m, report.c if report else Fraction(1))
    under1 = {mon.OUTPUT1: ZERO, mon.OUTPUT2: ZERO, mon.OUTPUT3: ZERO}
    under2 = dict(under1)
    table = []
    for w, p1, p2 in _words_with_probs(h1, h2, L):
        if kind == "two-sided":
            d = mon.m2_decision(p1, p2)
        else:
            d = mon.run_m2prime(h1, h2, report, w, plan).decision
        under1[d] += p1
        under2[d] += p2
        table.append((w, p1, p2, d))
    return VerdictMeasure(kind, L, under1, under2, table)


def flip_gain(measure: VerdictMeasure) -> Fraction:
    """Largest increase of ``P1(W) - P2(W)`` from toggling one word in or out of the Output1 set ``W``.

    Nonpositive exactly when ``W`` maximises the difference.
    """
    best = None
    for _, p1, p2, d in measure.table:
        gain = (p2 - p1) if d == mon.OUTPUT1 else (p1 - p2)
        best = gain if best is None or gain > best else best
    return ZERO if best is None else best

