import itertools
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.optimize import linprog

from hmcdist import corpus
from hmcdist.distinguish import (GuardExceeded, compute_test_set, dist, dist_lp, equivalent,
                                 event_member, event_words, profile_constant, refined_constant,
                                 select_event, split_point)
from hmcdist.exact import OPTIMAL, Basis, solve_lp
from hmcdist.forward import cd, emission_vector, pr
from hmcdist.model import Hmc
from hmcdist.sampling import sample_run
from oracles import hmcs
from test_exact import rank_by_minors

F4 = F(1, 4)


def words_of(ts):
    return ["".join(w) for w in ts.words]


def pr_equal_up_to(h1, h2, n):
    for k in range(1, n + 1):
        for w in itertools.product(h1.alphabet, repeat=k):
            if pr(h1, h1.point(), w) != pr(h2, h2.point(), w):
                return False
    return True


def split_copy(h: Hmc) -> Hmc:
    """Copy of ``h`` whose first non-initial target state is split into two half-weight twins."""
    victim = h.states[-1]
    states = [s for s in h.states] + [victim + "'"]
    obs = {**h.obs, victim + "'": h.obs[victim]}
    trans = {}
    for s in h.states:
        row = {}
        for t, p in h.trans[s].items():
            if t == victim:
                row[victim] = p / 2
                row[victim + "'"] = p / 2
            else:
                row[t] = p
        trans[s] = row
    trans[victim + "'"] = dict(trans[victim])
    return Hmc(states=states, alphabet=list(h.alphabet), obs=obs, trans=trans, init=h.init)


class TestTestSet:
    @pytest.mark.parametrize("delta", [F(1, 8), F(1, 6), F4])
    def test_fig3(self, delta):
        assert words_of(compute_test_set(*corpus.fig3(delta))) == ["", "a", "aa", "ba"]

    def test_identical_singletons(self):
        a = corpus.singleton("s0")
        assert words_of(compute_test_set(a, corpus.singleton("u0"))) == [""]

    @pytest.mark.parametrize("name", ["fig1", "fig2", "fig3", "fig4"])
    def test_vectors_are_independent_and_closed(self, name):
        h1, h2 = corpus.pairs()[name]
        ts = compute_test_set(h1, h2)
        assert len(ts) <= ts.m
        assert all(len(w) < ts.m for w in ts.words)
        rows = [ts.stacked(w) for w in ts.words]
        assert rank_by_minors(rows) == len(rows)
        assert ts.eta1[()] == [1] * h1.n
        basis = Basis(ts.m)
        for r in rows:
            basis.try_extend(r)
        for w, a in itertools.product(ts.words, h1.alphabet):
            v = emission_vector(h1, (a,) + w) + [-x for x in emission_vector(h2, (a,) + w)]
            assert basis.contains(v)

    def test_fig1_size(self):
        assert len(compute_test_set(*corpus.fig1())) <= 5


class TestEquivalence:
    def test_fig4_differs_on_aa(self):
        h1, h2 = corpus.fig4()
        assert pr(h1, h1.point(), "aa") == F(1, 2)
        assert pr(h2, h2.point(), "aa") == F(2, 3)
        assert not equivalent(h1, h2)

    @pytest.mark.parametrize("name", ["fig1", "fig2", "fig3", "fig4"])
    def test_copies_and_split_states_are_equivalent(self, name):
        for h in corpus.pairs()[name]:
            assert equivalent(h, h.renamed("c."))
            assert equivalent(h, split_copy(h))

    @settings(max_examples=60, deadline=None)
    @given(hmcs(3, prefix="s", denom=2), hmcs(3, prefix="t", denom=2))
    def test_agrees_with_word_enumeration(self, h1, h2):
        assert equivalent(h1, h2) == pr_equal_up_to(h1, h2, h1.n + h2.n + 2)

    def test_distinguishable_implies_not_equivalent(self):
        for h1, h2 in corpus.pairs().values():
            if profile_constant(h1, h2).distinguishable:
                assert not equivalent(h1, h2)


class TestDist:
    def test_fig3_reachable_pairs(self):
        for delta in (F(1, 8), F4):
            ts = compute_test_set(*corpus.fig3(delta))
            assert dist(ts, {"s0": 1}, {"t0": 1}) == 2 * delta
            assert dist(ts, {"s1": 1}, {"t1": 1}) == 2 * delta
            sel = select_event(ts, {"s0": 1}, {"t0": 1})
            assert sel.word == ("a", "a") and sel.direct and sel.difference == 2 * delta
            sel = select_event(ts, {"s1": 1}, {"t1": 1})
            assert sel.word == ("b", "a") and sel.direct and sel.difference == 2 * delta

    def test_equivalent_pair_has_zero_distance_and_picks_empty_word(self):
        h = corpus.fig3()[0]
        ts = compute_test_set(h, h.renamed("c."))
        assert dist(ts, {"s0": 1}, {"c.s0": 1}) == 0
        sel = select_event(ts, {"s0": 1}, {"c.s0": 1})
        assert sel.word == () and sel.difference == 0


class TestProfileConstant:
    @pytest.mark.parametrize("delta", [F(1, 8), F(1, 6), F4])
    def test_fig3_closed_form(self, delta):
        rep = profile_constant(*corpus.fig3(delta))
        assert rep.distinguishable
        assert rep.c == 4 * delta / (3 + 2 * delta)

    def test_verdicts(self):
        assert profile_constant(*corpus.fig1()).distinguishable
        rep = profile_constant(*corpus.fig4())
        assert not rep.distinguishable and rep.c == 0

    @pytest.mark.parametrize("name", ["fig1", "fig2", "fig3", "fig4"])
    def test_chain_against_itself(self, name):
        for h in corpus.pairs()[name]:
            other = h.renamed("c.")
            rep = profile_constant(h, other)
            assert not rep.distinguishable and rep.c == 0
            assert equivalent(h, other)

    def test_differing_first_symbols_give_constant_one(self):
        a = corpus.singleton("s0", "a", ("a", "b"))
        b = corpus.singleton("u0", "b", ("a", "b"))
        rep = profile_constant(a, b)
        assert rep.distinguishable and rep.c == 1
        assert all(not o.optimal for o in rep.lp_outcomes.values())

    def test_lps_agree_with_scipy(self):
        for h1, h2 in corpus.pairs().values():
            rep = profile_constant(h1, h2)
            for s1, out in rep.lp_outcomes.items():
                unreach = [s2 for s2 in h2.states if (s1, s2) not in rep.reachable_pairs]
                lp = dist_lp(rep.testset, dominating=s1, unreachable=unreach)
                names = lp.variables
                A_ub, b_ub, A_eq, b_eq = [], [], [], []
                for coeffs, sense, rhs in lp.constraints:
                    row = [float(coeffs.get(n, 0)) for n in names]
                    if sense == "==":
                        A_eq.append(row), b_eq.append(float(rhs))
                    elif sense == "<=":
                        A_ub.append(row), b_ub.append(float(rhs))
                    else:
                        A_ub.append([-x for x in row]), b_ub.append(-float(rhs))
                ref = linprog([float(lp.objective.get(n, 0)) for n in names],
                              A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                              A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                              bounds=[(0, None)] * len(names))
                if out.status == OPTIMAL:
                    assert ref.status == 0 and ref.fun == pytest.approx(float(out.value), abs=1e-9)
                    assert lp.is_feasible(out.point)
                else:
                    assert ref.status == 2

    def test_profile_inequality_on_sampled_reachable_pairs(self):
        rng = random.Random(8)
        checked = 0
        for name in ("fig1", "fig2", "fig3"):
            h1, h2 = corpus.pairs()[name]
            rep = profile_constant(h1, h2)
            ts = rep.testset
            target = checked + 170
            while checked < target:
                src = h1 if rng.random() < 0.5 else h2
                w = sample_run(src, rng.randint(1, 12), rng.getrandbits(32)).symbols
                psi1, psi2 = cd(h1, h1.point(), w), cd(h2, h2.point(), w)
                if psi1 is None or psi2 is None:
                    continue
                sel = select_event(ts, psi1, psi2)
                assert sel.difference == dist(ts, psi1, psi2) >= rep.c
                checked += 1
        assert checked == 510


class TestGlobalLp:
    def test_fig3_optimum_and_optimal_face(self):
        ts = compute_test_set(*corpus.fig3(F4))
        lp = dist_lp(ts)
        out = solve_lp(lp)
        assert out.status == OPTIMAL and out.value == F4
        assert lp.is_feasible(out.point)
        # the optimum is attained on a whole face; the closed-form point lies on it
        stated = {"x": F4, "psi1:s0": F(5, 8), "psi1:s1": F(3, 8), "psi2:t0": F(7, 8), "psi2:t1": F(1, 8)}
        assert lp.is_feasible(stated) and lp.evaluate(stated) == out.value
        psi1, psi2 = split_point(ts, out)
        assert dist(ts, psi1, psi2) == F4


class TestRefinedConstant:
    @staticmethod
    def point_mass_gap(h1, h2, s1, s2, m):
        total = F(0)
        for w in itertools.product(h1.alphabet, repeat=m):
            total += max(pr(h1, {s1: 1}, w) - pr(h2, {s2: 1}, w), 0)
        return total

    def test_fig3_equals_enumeration(self):
        h1, h2 = corpus.fig3(F4)
        oracle = min(self.point_mass_gap(h1, h2, "s0", "t0", 4),
                     self.point_mass_gap(h1, h2, "s1", "t1", 4))
        assert oracle == F(11, 16)
        got = refined_constant(h1, h2)
        assert got == oracle
        assert got >= profile_constant(h1, h2).c

    def test_identical_chains(self):
        h = corpus.fig3()[0]
        assert refined_constant(h, h.renamed("c.")) == 0

    def test_at_least_profile_constant(self):
        for name in ("fig3", "fig4"):
            h1, h2 = corpus.pairs()[name]
            assert refined_constant(h1, h2) >= profile_constant(h1, h2).c
        h1, h2 = corpus.fig3(F(1, 8))
        assert refined_constant(h1, h2) >= profile_constant(h1, h2).c

    def test_guard(self):
        with pytest.raises(GuardExceeded):
            refined_constant(*corpus.fig1(), size_guard=16)


class TestEvents:
    def test_membership(self):
        ts = compute_test_set(*corpus.fig3())
        sel = select_event(ts, {"s0": 1}, {"t0": 1})
        assert event_member(sel, "aaba")
        assert not event_member(sel, "abaa")
        assert len(event_words(sel, ["a", "b"])) == 4
        with pytest.raises(ValueError):
            event_member(sel, "aa")

    def test_complement_side_probabilities(self):
        h2, h1 = corpus.fig3()
        ts = compute_test_set(h1, h2)
        sel = select_event(ts, h1.point(), h2.point())
        assert not sel.direct and sel.word == ("a", "a")
        words = event_words(sel, h1.alphabet)
        assert sum(pr(h1, h1.point(), w) for w in words) == sel.p1
        assert sum(pr(h2, h2.point(), w) for w in words) == sel.p2
        assert sel.p1 - sel.p2 == dist(ts, h1.point(), h2.point())
