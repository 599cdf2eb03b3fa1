"""The four monitors and their planners.

* :func:`run_m2` decides by the likelihood ratio after ``N*m`` observations.
* :func:`run_m2prime` runs the bounded-step random walk driven by a profile.
* :func:`run_m1` raises an alarm once the ratio drops to ``low``; one-sided.
* :func:`run_multi` picks the most likely of ``k`` chains.

"log" is the natural logarithm throughout. A decision of 1 means the stream
is attributed to the first chain; on an exact tie ``lr == 1`` the two-sided
monitor answers 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .distinguish import DistinguishabilityReport, profile_constant, select_event
from .exact import ONE, ZERO
from .forward import ForwardFilter, StreamTracker, cd, forward_vector, pr
from .model import Hmc

OUTPUT1, OUTPUT2, OUTPUT3 = 1, 2, 3
NO_MODEL = 0  # multi-monitor: no chain could have produced the stream

TIE_LOG_TOL = 1e-9
TIE_EXACT_MAX_LEN = 64


class TruncatedStreamError(ValueError):
    pass


class NotDistinguishableError(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    decision: int
    observations: int

    _impossible: bool = field(default=False, repr=False, compare=False)

    @property
    def impossible(self) -> bool:
        return self._impossible

    def line(self) -> str:
        return f"DECISION {self.decision} AFTER {self.observations} OBS"


ALARM, NO_ALARM, IMPOSSIBLE = "alarm", "no-alarm", "impossible"


@dataclass(frozen=True)
class AlarmOutcome:
    status: str
    observations: int

    @property
    def alarmed(self) -> bool:
        return self.status == ALARM

    def line(self) -> str:
        if self.status == ALARM:
            return f"ALARM AFTER {self.observations} OBS"
        if self.status == NO_ALARM:
            return f"NO-ALARM AFTER {self.observations} OBS"
        return f"IMPOSSIBLE AFTER {self.observations} OBS"


@dataclass(frozen=True)
class MonitorPlan:
    phases: int
    phase_length: int
    c: Fraction
    eps: float | None = None
    low: float | None = None
    models: int = 2

    @property
    def observations(self) -> int:
        return self.phases * self.phase_length


# --------------------------------------------------------------------------
# planners

def _ceil(x: float) -> int:
    """Ceiling that ignores float noise just above an integer."""
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def _check_c(c) -> Fraction:
    c = Fraction(c)
    if c <= 0:
        raise NotDistinguishableError("c must be positive: the chains are not distinguishable")
    if c > 1:
        raise ValueError("c must not exceed 1")
    return c


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0 < eps < 1:
        raise ValueError("error bound must lie in (0, 1)")
    return eps


def plan_two_sided(c, eps, m: int = 1) -> MonitorPlan:
    """``N = ceil(18 / c^2 * log(2 / eps))`` phases of ``m`` observations."""
    c = _check_c(c)
    eps = _check_eps(eps)
    N = max(1, _ceil(float(18 / c ** 2) * math.log(2 / eps)))
    return MonitorPlan(N, m, c, eps=eps)


def plan_multi(c, eps, k: int, m: int = 1) -> MonitorPlan:
    """Union-bound inversion: ``N = ceil(18 / c^2 * log(2k / eps))``."""
    c = _check_c(c)
    eps = _check_eps(eps)
    if k < 1:
        raise ValueError("need at least one model")
    N = max(1, _ceil(float(18 / c ** 2) * math.log(2 * k / eps)))
    return MonitorPlan(N, m, c, eps=eps, models=k)


def one_sided_threshold_phases(c, low) -> int:
    """Smallest ``N0`` with ``exp(-c^2 N0 / 36) <= low``."""
    c = _check_c(c)
    low = float(low)
    if not 0 < low <= 1:
        raise ValueError("low must lie in (0, 1]")
    return max(0, _ceil(float(36 / c ** 2) * math.log(1 / low)))


def expected_alarm_bound(c, low, m: int) -> float:
    """Upper bound on the mean number of observations before ``M1`` alarms under chain 1."""
    c = _check_c(c)
    low = float(low)
    if not 0 < low <= 1:
        raise ValueError("low must lie in (0, 1]")
    k = float(m / c ** 2)
    return 36 * k * math.log(1 / low) + 147 * k * low + m


def plan_pair(h1: Hmc, h2: Hmc, eps, report: DistinguishabilityReport | None = None) -> MonitorPlan:
    report = profile_constant(h1, h2) if report is None else report
    if not report.distinguishable:
        raise NotDistinguishableError("the chains are not distinguishable")
    return plan_two_sided(report.c, eps, h1.n + h2.n)


def pairwise_reports(models: Sequence[Hmc]) -> dict[tuple[int, int], DistinguishabilityReport]:
    return {(i, j): profile_constant(models[i], models[j])
            for i in range(len(models)) for j in range(i + 1, len(models))}


def plan_models(models: Sequence[Hmc], eps, reports=None) -> MonitorPlan:
    reports = pairwise_reports(models) if reports is None else reports
    bad = [(i + 1, j + 1) for (i, j), r in reports.items() if not r.distinguishable]
    if bad:
        raise NotDistinguishableError(f"pairs {bad} are not distinguishable")
    c = min(r.c for r in reports.values())
    m = 2 * max(h.n for h in models)
    return plan_multi(c, eps, len(models), m)


# --------------------------------------------------------------------------

class _ExactForward:
    """Unnormalised exact forward vector; for bounded-length exact decisions."""

    def __init__(self, h: Hmc):
        self.h = h
        self.word: list[str] = []

    def step(self, a: str) -> None:
        self.word.append(a)

    @property
    def probability(self) -> Fraction:
        if not self.word:
            return ONE
        if any(a not in self.h.alphabet for a in self.word):
            return ZERO
        return sum(forward_vector(self.h, self.h.point(), self.word), ZERO)


def _exact_pr(h: Hmc, word: Sequence[str]) -> Fraction:
    if any(a not in h.alphabet for a in word):
        return ZERO
    return pr(h, h.point(), word)


def _take(stream: Iterable[str]) -> Iterator[str]:
    for a in stream:
        yield a


def run_m2(h1: Hmc, h2: Hmc, stream: Iterable[str], plan: MonitorPlan, exact: bool = False) -> Verdict:
    """Likelihood-ratio monitor with two-sided error.

    Reads ``plan.observations`` symbols and answers 1 iff ``lr <= 1``. If one
    chain's probability of the prefix hits zero the other chain is reported
    at once; if both do, the answer is 3.
    """
    L = plan.observations
    tracker = StreamTracker(h1, h2)
    word: list[str] = []
    for a in _take(stream):
        tracker.step(a)
        word.append(a)
        n = len(word)
        if tracker.zero1 and tracker.zero2:
            return Verdict(OUTPUT3, n, _impossible=True)
        if tracker.zero2:
            return Verdict(OUTPUT1, n)
        if tracker.zero1:
            return Verdict(OUTPUT2, n)
        if n == L:
            break
    else:
        raise TruncatedStreamError(f"stream ended after {len(word)} of {L} observations")
    if exact or (abs(tracker.log_lr) <= TIE_LOG_TOL and L <= TIE_EXACT_MAX_LEN):
        p1, p2 = _exact_pr(h1, word), _exact_pr(h2, word)
        return Verdict(OUTPUT1 if p2 <= p1 else OUTPUT2, L)
    return Verdict(OUTPUT1 if tracker.log_lr <= 0 else OUTPUT2, L)


def m2_decision(p1: Fraction, p2: Fraction) -> int:
    """Verdict of ``M2`` on a full-length word with exact probabilities ``p1``, ``p2``."""
    if p1 == 0 and p2 == 0:
        return OUTPUT3
    return OUTPUT1 if p2 <= p1 else OUTPUT2


# --------------------------------------------------------------------------
# random-walk monitor

def walk_step(p1: Fraction, p2: Fraction, in_event: bool) -> Fraction:
    """Change of the walk value ``x`` for one phase.

    When ``p1 + p2 <= 1`` a hit moves ``x`` down by 1 and a miss moves it up by
    ``(p1 + p2) / (2 - p1 - p2)``; otherwise a hit moves it down by
    ``(2 - p1 - p2) / (p1 + p2)`` and a miss up by 1.
    """
    s = p1 + p2
    if s <= 1:
        return -ONE if in_event else s / (2 - s)
    return -(2 - s) / s if in_event else ONE


@dataclass
class WalkState:
    x: Fraction
    psi1: dict
    psi2: dict
    phase: int = 0


class WalkMonitor:
    """Phase-by-phase driver of the random-walk monitor.

    The tracked distributions describe the state that emitted the most recent
    observation, and such a distribution assigns probabilities to words whose
    first symbol that state emitted. Each phase after the first therefore
    re-reads the previous phase's last symbol and adds ``m - 1`` fresh ones, so
    the phase word is distributed exactly as the profile assumes.
    """

    def __init__(self, h1: Hmc, h2: Hmc, report: DistinguishabilityReport):
        if not report.distinguishable:
            raise NotDistinguishableError("the random-walk monitor needs distinguishable chains")
        self.h1, self.h2 = h1, h2
        self.ts = report.testset
        self.m = report.m
        self.state = WalkState(ZERO, h1.point(), h2.point())
        self.last: str | None = None
        self.steps: list[Fraction] = []

    @property
    def fresh_per_phase(self) -> int:
        return self.m if self.last is None else self.m - 1

    def phase(self, fresh: Sequence[str]) -> int | None:
        """Consume one phase of fresh observations; returns an early decision or None."""
        if len(fresh) != self.fresh_per_phase:
            raise ValueError(f"phase needs {self.fresh_per_phase} observations, got {len(fresh)}")
        word = list(fresh) if self.last is None else [self.last, *fresh]
        st = self.state
        sel = select_event(self.ts, st.psi1, st.psi2)
        q1 = _word_pr(self.h1, st.psi1, word)
        q2 = _word_pr(self.h2, st.psi2, word)
        self.last = word[-1]
        if q1 == 0 and q2 == 0:
            return OUTPUT3
        if q2 == 0:
            return OUTPUT1
        if q1 == 0:
            return OUTPUT2
        dx = walk_step(sel.p1, sel.p2, sel.contains(word))
        self.steps.append(dx)
        st.x += dx
        st.psi1 = cd(self.h1, st.psi1, word)
        st.psi2 = cd(self.h2, st.psi2, word)
        st.phase += 1
        return None

    def decision(self) -> int:
        return OUTPUT1 if self.state.x <= 0 else OUTPUT2


def _word_pr(h: Hmc, psi, word) -> Fraction:
    if any(a not in h.alphabet for a in word):
        return ZERO
    return pr(h, psi, word)


def walk_observations(phases: int, m: int) -> int:
    """Observations read by the random-walk monitor over ``phases`` phases."""
    return 0 if phases == 0 else m + (phases - 1) * (m - 1)


def run_m2prime(h1: Hmc, h2: Hmc, report: DistinguishabilityReport, stream: Iterable[str],
                plan: MonitorPlan) -> Verdict:
    """Random-walk monitor; decides 1 iff the walk ends at ``x <= 0``."""
    mon = WalkMonitor(h1, h2, report)
    it = _take(stream)
    consumed = 0
    for _ in range(plan.phases):
        need = mon.fresh_per_phase
        fresh = []
        for a in it:
            fresh.append(a)
            if len(fresh) == need:
                break
        consumed += len(fresh)
        if len(fresh) < need:
            raise TruncatedStreamError(f"stream ended after {consumed} observations")
        early = mon.phase(fresh)
        if early is not None:
            return Verdict(early, consumed, _impossible=early == OUTPUT3)
    return Verdict(mon.decision(), consumed)


# --------------------------------------------------------------------------

def run_m1(h1: Hmc, h2: Hmc, stream: Iterable[str], low, m: int | None = None,
           horizon: int | None = None) -> AlarmOutcome:
    """One-sided monitor: alarm at the first phase boundary with ``lr <= low``.

    Never alarms once chain 1 cannot have produced the prefix (reported as
    impossible). ``horizon`` caps the number of phases.
    """
    low = float(low)
    if not 0 < low <= 1:
        raise ValueError("low must lie in (0, 1]")
    m = h1.n + h2.n if m is None else m
    log_low = math.log(low)
    tracker = StreamTracker(h1, h2)
    n = 0
    for a in _take(stream):
        tracker.step(a)
        n += 1
        if tracker.zero1:
            return AlarmOutcome(IMPOSSIBLE, n)
        if n % m == 0:
            if tracker.zero2 or tracker.log_lr <= log_low:
                return AlarmOutcome(ALARM, n)
            if horizon is not None and n // m >= horizon:
                break
    return AlarmOutcome(NO_ALARM, n)


# --------------------------------------------------------------------------

def run_multi(models: Sequence[Hmc], reports, stream: Iterable[str], plan: MonitorPlan,
              exact: bool = False) -> Verdict:
    """Return the smallest index (1-based) whose likelihood is maximal after the plan's length."""
    if reports is not None:
        bad = [key for key, r in reports.items() if not r.distinguishable]
        if bad:
            raise NotDistinguishableError(f"pairs {bad} are not distinguishable")
    L = plan.observations
    filters = [ForwardFilter(h) for h in models]
    word: list[str] = []
    for a in _take(stream):
        word.append(a)
        for f in filters:
            f.step(a)
        if all(f.zero for f in filters):
            return Verdict(NO_MODEL, len(word), _impossible=True)
        if len(word) == L:
            break
    else:
        raise TruncatedStreamError(f"stream ended after {len(word)} of {L} observations")
    logs = [f.loglik for f in filters]
    best = max(logs)
    near = [i for i, v in enumerate(logs) if v != -math.inf and best - v <= TIE_LOG_TOL]
    if exact or (len(near) > 1 and L <= TIE_EXACT_MAX_LEN):
        probs = [_exact_pr(h, word) for h in models]
        top = max(probs)
        return Verdict(probs.index(top) + 1, L)
    return Verdict(logs.index(best) + 1, L)
