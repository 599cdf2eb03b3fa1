"""Runtime verification of classified chains.

A classified chain can be monitored for "will end in a bad bottom component"
exactly when its bad-conditioned and good-conditioned versions are
distinguishable. This module builds those two chains.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .distinguish import DistinguishabilityReport, profile_constant
from .exact import ONE, ZERO, solve_linear
from .graphs import reachable_from
from .model import ClassifiedHmc, Hmc, ModelValidationError, bottom_sccs

BAD, GOOD = "bad", "good"


def bsccs(h: Hmc) -> list[frozenset[str]]:
    return bottom_sccs(h)


def reach_probabilities(c: ClassifiedHmc, target: str = BAD) -> dict[str, Fraction]:
    """Exact probability, per state, of eventually entering a ``target`` bottom component."""
    if target not in (BAD, GOOD):
        raise ValueError("target must be 'bad' or 'good'")
    h = c.hmc
    goal = c.bad if target == BAD else c.good
    other = c.good if target == BAD else c.bad
    # only states that can reach the goal get a variable; the rest are 0
    pred: dict[str, list[str]] = {s: [] for s in h.states}
    for s in h.states:
        for t in h.trans[s]:
            pred[t].append(s)
    can_reach = reachable_from(goal, lambda s: pred[s])
    unknown = [s for s in h.states if s in can_reach and s not in goal and s not in other]
    out = {s: (ONE if s in goal else ZERO) for s in h.states}
    if unknown:
        col = {s: i for i, s in enumerate(unknown)}
        A = [[ZERO] * len(unknown) for _ in unknown]
        b = [ZERO] * len(unknown)
        for i, s in enumerate(unknown):
            A[i][i] += ONE
            for t, p in h.trans[s].items():
                if t in col:
                    A[i][col[t]] -= p
                elif t in goal:
                    b[i] += p
        for s, v in zip(unknown, solve_linear(A, b)):
            out[s] = v
    return out


def _conditioned(h: Hmc, probs: dict[str, Fraction], name: str) -> Hmc:
    keep = [s for s in h.states if probs[s] > 0]
    if h.init not in keep:
        raise ModelValidationError(f"P({name}) = 0 from the initial state")
    trans = {s: {t: p * probs[t] / probs[s] for t, p in h.trans[s].items() if probs[t] > 0}
             for s in keep}
    return Hmc(states=keep, alphabet=list(h.alphabet), obs={s: h.obs[s] for s in keep},
               trans=trans, init=h.init)


def condition(c: ClassifiedHmc) -> tuple[Hmc, Hmc]:
    """Chains whose path measures are the original conditioned on Bad and on Good."""
    h = c.hmc
    return (_conditioned(h, reach_probabilities(c, BAD), "Bad"),
            _conditioned(h, reach_probabilities(c, GOOD), "Good"))


@dataclass(frozen=True)
class MonitorabilityReport:
    monitorable: bool
    h_bad: Hmc
    h_good: Hmc
    report: DistinguishabilityReport


def decide_monitorable(c: ClassifiedHmc) -> MonitorabilityReport:
    h_bad, h_good = condition(c)
    rep = profile_constant(h_bad, h_good)
    return MonitorabilityReport(rep.distinguishable, h_bad, h_good, rep)


START_SYMBOL = "^"
START_STATE = "start"


def combine(h_bad: Hmc, h_good: Hmc, start_symbol: str = START_SYMBOL) -> ClassifiedHmc:
    """Classified chain that flips a fair coin between ``h_bad`` and ``h_good``.

    A fresh initial state emits ``start_symbol`` (which must not occur in
    either alphabet) and moves to either initial state with probability 1/2.
    States are prefixed ``1.`` and ``2.``; every bottom component of the first
    chain is bad and every bottom component of the second is good.
    """
    if set(h_bad.alphabet) != set(h_good.alphabet):
        raise ModelValidationError("the two chains must share an alphabet")
    if start_symbol in h_bad.alphabet:
        raise ModelValidationError(f"start symbol {start_symbol!r} clashes with the alphabet")
    a, b = h_bad.renamed("1."), h_good.renamed("2.")
    half = Fraction(1, 2)
    trans = {START_STATE: {a.init: half, b.init: half}, **a.trans, **b.trans}
    obs = {START_STATE: start_symbol, **a.obs, **b.obs}
    h = Hmc(states=[START_STATE, *a.states, *b.states], alphabet=[start_symbol, *h_bad.alphabet],
            obs=obs, trans=trans, init=START_STATE)
    bad = frozenset().union(*bsccs(a))
    good = frozenset().union(*bsccs(b))
    return ClassifiedHmc(h, bad, good)
