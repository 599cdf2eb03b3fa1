"""Test sets, the profile constant ``c`` and the distinguishability decision.

The test set is a short list of words whose emission-probability vectors
span everything the two chains can tell apart; ``c`` lower-bounds, over all
jointly reachable pairs of conditional distributions, the largest gap in
emission probability over those words. The chains are distinguishable
exactly when ``c > 0``.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .exact import EQ, GE, LE, ONE, ZERO, Basis, LpOutcome, LpProblem, solve_lp
from .forward import step_emission
from .model import Hmc, product_reachable_pairs, shared_alphabet

Word = tuple[str, ...]


def word_str(w: Sequence[str]) -> str:
    if not w:
        return "ε"
    if all(len(a) == 1 for a in w):
        return "".join(w)
    return " ".join(w)


@dataclass
class TestSet:
    __test__ = False  # not a pytest class

    h1: Hmc
    h2: Hmc
    words: list[Word]
    eta1: dict[Word, list[Fraction]]
    eta2: dict[Word, list[Fraction]]

    @property
    def m(self) -> int:
        return self.h1.n + self.h2.n

    def __len__(self) -> int:
        return len(self.words)

    def stacked(self, w: Word) -> list[Fraction]:
        return self.eta1[w] + [-x for x in self.eta2[w]]

    def pr1(self, psi1: Mapping[str, Fraction], w: Word) -> Fraction:
        eta = self.eta1[w]
        idx = self.h1.index
        return sum((p * eta[idx[s]] for s, p in psi1.items()), ZERO)

    def pr2(self, psi2: Mapping[str, Fraction], w: Word) -> Fraction:
        eta = self.eta2[w]
        idx = self.h2.index
        return sum((p * eta[idx[s]] for s, p in psi2.items()), ZERO)

    def gaps(self, psi1, psi2) -> list[Fraction]:
        return [self.pr1(psi1, w) - self.pr2(psi2, w) for w in self.words]

    def labels(self) -> list[str]:
        return [word_str(w) for w in self.words]


def compute_test_set(h1: Hmc, h2: Hmc) -> TestSet:
    """Worklist basis construction over the stacked emission vectors.

    Words are visited first-in first-out and letters in declared alphabet
    order; a candidate ``a·w`` joins when its vector is new to the span.
    """
    alphabet = shared_alphabet(h1, h2)
    empty: Word = ()
    eta1 = {empty: [ONE] * h1.n}
    eta2 = {empty: [ONE] * h2.n}
    basis = Basis(h1.n + h2.n)
    basis.try_extend(eta1[empty] + [-ONE] * h2.n)
    words = [empty]
    i = 0
    while i < len(words):
        w = words[i]
        for a in alphabet:
            e1 = step_emission(h1, eta1[w], a)
            e2 = step_emission(h2, eta2[w], a)
            if basis.try_extend(e1 + [-x for x in e2]):
                cand = (a,) + w
                words.append(cand)
                eta1[cand] = e1
                eta2[cand] = e2
        i += 1
    return TestSet(h1, h2, words, eta1, eta2)


def _default_dists(h1, h2, psi1, psi2):
    return (h1.point() if psi1 is None else psi1,
            h2.point() if psi2 is None else psi2)


def equivalent(h1: Hmc, h2: Hmc, psi1=None, psi2=None, ts: TestSet | None = None) -> bool:
    """True iff both distributions emit every word with the same probability."""
    ts = compute_test_set(h1, h2) if ts is None else ts
    psi1, psi2 = _default_dists(h1, h2, psi1, psi2)
    return all(g == 0 for g in ts.gaps(psi1, psi2))


def dist(ts: TestSet, psi1, psi2) -> Fraction:
    return max(abs(g) for g in ts.gaps(psi1, psi2))


# --------------------------------------------------------------------------

@dataclass
class DistinguishabilityReport:
    distinguishable: bool
    c: Fraction
    testset: TestSet
    lp_outcomes: dict[str, LpOutcome] = field(default_factory=dict)
    reachable_pairs: set[tuple[str, str]] = field(default_factory=set)

    @property
    def m(self) -> int:
        return self.testset.m


def _v1(s: str) -> str:
    return "psi1:" + s


def _v2(s: str) -> str:
    return "psi2:" + s


def _gap_coeffs(ts: TestSet, w: Word) -> dict[str, Fraction]:
    coeffs = {}
    for s, e in zip(ts.h1.states, ts.eta1[w]):
        if e:
            coeffs[_v1(s)] = e
    for s, e in zip(ts.h2.states, ts.eta2[w]):
        if e:
            coeffs[_v2(s)] = coeffs.get(_v2(s), ZERO) - e
    return coeffs


def dist_lp(ts: TestSet, dominating: str | None = None,
            unreachable: Sequence[str] = ()) -> LpProblem:
    """LP minimising the test-set gap ``x`` over pairs of distributions.

    With ``dominating`` set, the first distribution must put at least as much
    weight on that state as on any other; states in ``unreachable`` get zero
    weight under the second distribution.
    """
    h1, h2 = ts.h1, ts.h2
    lp = LpProblem()
    lp.add_var("x")
    for s in h1.states:
        lp.add_var(_v1(s))
    for s in h2.states:
        lp.add_var(_v2(s))
    lp.add_constraint({_v1(s): 1 for s in h1.states}, EQ, 1)
    lp.add_constraint({_v2(s): 1 for s in h2.states}, EQ, 1)
    if dominating is not None:
        for t in h1.states:
            if t != dominating:
                lp.add_constraint({_v1(dominating): 1, _v1(t): -1}, GE, 0)
    for s2 in unreachable:
        lp.add_constraint({_v2(s2): 1}, EQ, 0)
    for w in ts.words:
        g = _gap_coeffs(ts, w)
        lp.add_constraint({**g, "x": -1}, LE, 0)
        lp.add_constraint({**g, "x": 1}, GE, 0)
    lp.minimize({"x": 1})
    return lp


def split_point(ts: TestSet, outcome: LpOutcome) -> tuple[dict, dict]:
    """Read the two distributions back out of an LP solution."""
    p = outcome.point
    psi1 = {s: p[_v1(s)] for s in ts.h1.states}
    psi2 = {s: p[_v2(s)] for s in ts.h2.states}
    return psi1, psi2


def profile_constant(h1: Hmc, h2: Hmc) -> DistinguishabilityReport:
    """Compute ``c`` as the minimum over dominating states of the per-state LP."""
    ts = compute_test_set(h1, h2)
    pairs = product_reachable_pairs(h1, h2)
    outcomes: dict[str, LpOutcome] = {}
    best = None
    for s1 in h1.states:
        unreach = [s2 for s2 in h2.states if (s1, s2) not in pairs]
        out = solve_lp(dist_lp(ts, dominating=s1, unreachable=unreach))
        outcomes[s1] = out
        if out.optimal and (best is None or out.value < best):
            best = out.value
    if best is None:
        # no jointly reachable pair: the first observation already separates them
        best = ONE
    return DistinguishabilityReport(best > 0, best, ts, outcomes, pairs)


def distinguishable(h1: Hmc, h2: Hmc) -> bool:
    return profile_constant(h1, h2).distinguishable


# --------------------------------------------------------------------------

class GuardExceeded(ValueError):
    pass


def reachable_support_pairs(h1: Hmc, h2: Hmc, limit: int | None = None) -> list[tuple[frozenset, frozenset]]:
    """Supports of jointly reachable conditional distribution pairs.

    Supports evolve deterministically with each observed symbol, so this is a
    breadth-first search over a subset construction of the product.
    """
    alphabet = shared_alphabet(h1, h2)
    if h1.obs[h1.init] != h2.obs[h2.init]:
        return []
    start = (frozenset([h1.init]), frozenset([h2.init]))
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        S1, S2 = queue.popleft()
        for a in alphabet:
            T1 = frozenset(t for s in S1 for t in h1.trans[s] if h1.obs[t] == a)
            T2 = frozenset(t for s in S2 for t in h2.trans[s] if h2.obs[t] == a)
            if T1 and T2 and (T1, T2) not in seen:
                seen.add((T1, T2))
                order.append((T1, T2))
                queue.append((T1, T2))
                if limit is not None and len(order) > limit:
                    raise GuardExceeded(
                        f"more than {limit} reachable support pairs (subset-construction blowup)")
    return order


def all_emission_vectors(h: Hmc, length: int, alphabet: Sequence[str]) -> dict[Word, list[Fraction]]:
    vecs: dict[Word, list[Fraction]] = {(): [ONE] * h.n}
    frontier = [()]
    for _ in range(length):
        nxt = []
        for w in frontier:
            for a in alphabet:
                vecs[(a,) + w] = step_emission(h, vecs[w], a)
                nxt.append((a,) + w)
        frontier = nxt
    return {w: v for w, v in vecs.items() if len(w) == length}


def refined_constant(h1: Hmc, h2: Hmc, size_guard: int = 1 << 12) -> Fraction:
    """The exponential-time constant: worst reachable support pair of the best event gap.

    For each reachable support pair, minimise ``sum_u x_u`` subject to
    ``x_u >= 0`` and ``x_u >= pr_1(psi1, u) - pr_2(psi2, u)`` over words ``u``
    of length ``m``, with the distributions confined to the supports.
    """
    alphabet = shared_alphabet(h1, h2)
    m = h1.n + h2.n
    if len(alphabet) ** m > size_guard:
        raise GuardExceeded(f"|alphabet|^m = {len(alphabet)}^{m} exceeds the guard {size_guard}")
    pairs = reachable_support_pairs(h1, h2, limit=size_guard)
    if not pairs:
        return ONE
    eta1 = all_emission_vectors(h1, m, alphabet)
    eta2 = all_emission_vectors(h2, m, alphabet)
    words = sorted(eta1)
    best = None
    for S1, S2 in pairs:
        lp = LpProblem()
        for s in h1.states:
            if s in S1:
                lp.add_var(_v1(s))
        for s in h2.states:
            if s in S2:
                lp.add_var(_v2(s))
        lp.add_constraint({_v1(s): 1 for s in S1}, EQ, 1)
        lp.add_constraint({_v2(s): 1 for s in S2}, EQ, 1)
        for k, u in enumerate(words):
            xu = lp.add_var(f"x{k}")
            coeffs = {xu: ONE}
            for s in S1:
                e = eta1[u][h1.index[s]]
                if e:
                    coeffs[_v1(s)] = -e
            for s in S2:
                e = eta2[u][h2.index[s]]
                if e:
                    coeffs[_v2(s)] = e
            lp.add_constraint(coeffs, GE, 0)
        lp.minimize({f"x{k}": 1 for k in range(len(words))})
        out = solve_lp(lp)
        if not out.optimal:
            raise RuntimeError(f"refinement LP for supports {sorted(S1)}, {sorted(S2)} is {out.status}")
        if best is None or out.value < best:
            best = out.value
    return best


# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileSelection:
    """The event chosen for a distribution pair: words of length ``m`` with
    prefix ``word`` (``direct``) or its complement."""

    word: Word
    direct: bool
    p1: Fraction
    p2: Fraction
    m: int

    @property
    def difference(self) -> Fraction:
        return self.p1 - self.p2

    def contains(self, w: Sequence[str]) -> bool:
        return event_member(self, w)


def select_event(ts: TestSet, psi1, psi2) -> ProfileSelection:
    """Pick the test word with the largest gap (earliest word on ties)."""
    best_w, best_gap = None, None
    for w in ts.words:
        g = abs(ts.pr1(psi1, w) - ts.pr2(psi2, w))
        if best_gap is None or g > best_gap:
            best_w, best_gap = w, g
    q1, q2 = ts.pr1(psi1, best_w), ts.pr2(psi2, best_w)
    if q1 > q2:
        return ProfileSelection(best_w, True, q1, q2, ts.m)
    return ProfileSelection(best_w, False, ONE - q1, ONE - q2, ts.m)


def event_member(sel: ProfileSelection, w: Sequence[str]) -> bool:
    if len(w) != sel.m:
        raise ValueError(f"event words have length {sel.m}, got {len(w)}")
    has_prefix = tuple(w[:len(sel.word)]) == sel.word
    return has_prefix if sel.direct else not has_prefix


def event_words(sel: ProfileSelection, alphabet: Sequence[str]) -> list[Word]:
    """All length-``m`` words in the selected event (enumeration, small m only)."""
    return [w for w in itertools.product(alphabet, repeat=sel.m) if event_member(sel, w)]
