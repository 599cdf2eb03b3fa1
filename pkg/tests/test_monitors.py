import itertools
import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from hmcdist import corpus, monitors as mon
from hmcdist.distinguish import profile_constant
from hmcdist.forward import lr, pr
from hmcdist.sampling import sample_run

FIG3 = corpus.fig3()
REP3 = profile_constant(*FIG3)


def forced(phases, m, c=F(1)):
    return mon.MonitorPlan(phases, m, F(c))


class TestPlanners:
    def test_two_sided_examples(self):
        assert mon.plan_two_sided(1, 2 * math.exp(-18)).phases == 324
        plan = mon.plan_two_sided(F(2, 7), 0.1, 4)
        assert plan.phases == 661 and plan.observations == 2644

    def test_multi_examples(self):
        assert mon.plan_multi(F(2, 7), 0.1, 2).phases == 814
        for c, eps in [(F(1, 3), 0.05), (F(2, 7), 0.1), (F(1, 10), 0.3)]:
            assert mon.plan_multi(c, eps, 1).phases == mon.plan_two_sided(c, eps).phases

    def test_multi_grows_logarithmically_in_k(self):
        ns = [mon.plan_multi(F(1, 4), 0.1, k).phases for k in (1, 2, 4, 8, 16, 32)]
        diffs = [b - a for a, b in zip(ns, ns[1:])]
        step = 18 * 16 * math.log(2)
        assert all(abs(d - step) <= 1 for d in diffs)

    def test_smaller_eps_never_needs_fewer_phases(self):
        grid = [0.5, 0.2, 0.1, 0.05, 0.01, 1e-4]
        ns = [mon.plan_two_sided(F(1, 5), e).phases for e in grid]
        assert ns == sorted(ns)

    @pytest.mark.parametrize("c", [0, -1, F(0)])
    def test_nonpositive_constant_rejected(self, c):
        with pytest.raises(mon.NotDistinguishableError):
            mon.plan_two_sided(c, 0.1)
        with pytest.raises(mon.NotDistinguishableError):
            mon.expected_alarm_bound(c, 0.1, 4)

    def test_eps_range(self):
        for eps in (0, 1, 1.5):
            with pytest.raises(ValueError):
                mon.plan_two_sided(F(1, 2), eps)

    def test_alarm_bound_examples(self):
        assert mon.expected_alarm_bound(1, 1, 4) == 592
        expected = 1764 * math.log(20) + 147 * 4 * 49 / 4 / 20 + 4
        assert mon.expected_alarm_bound(F(2, 7), F(1, 20), 4) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(5648.62, abs=0.01)

    def test_alarm_bound_decreases_in_c(self):
        cs = [F(k, 20) for k in range(1, 21)]
        for low in (0.01, 0.3, 1):
            vals = [mon.expected_alarm_bound(c, low, 6) for c in cs]
            assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_threshold_phases(self):
        n0 = mon.one_sided_threshold_phases(F(2, 7), 0.05)
        assert math.exp(-(2 / 7) ** 2 * n0 / 36) <= 0.05 < math.exp(-(2 / 7) ** 2 * (n0 - 1) / 36)

    def test_pair_and_model_planning(self):
        plan = mon.plan_pair(*FIG3, 0.1)
        assert (plan.phases, plan.phase_length) == (661, 4)
        models = [FIG3[0], FIG3[1], corpus.fig4()[0]]
        plan = mon.plan_models(models, 0.2)
        assert plan.phase_length == 4 and plan.c == F(1, 7)
        with pytest.raises(mon.NotDistinguishableError):
            mon.plan_models(list(corpus.fig4()), 0.2)


class TestWalkStep:
    def test_rule_examples(self):
        assert mon.walk_step(F(4, 5), F(1, 10), True) == -1
        assert mon.walk_step(F(4, 5), F(1, 10), False) == F(9, 11)
        assert mon.walk_step(F(9, 10), F(3, 10), True) == -F(2, 3)
        assert mon.walk_step(F(9, 10), F(3, 10), False) == 1

    @settings(max_examples=500)
    @given(st.fractions(0, 1, max_denominator=50), st.fractions(0, 1, max_denominator=50), st.booleans())
    def test_step_size_is_at_most_one(self, p1, p2, hit):
        if p1 + p2 in (0, 2):
            return
        assert abs(mon.walk_step(p1, p2, hit)) <= 1

    @settings(max_examples=500)
    @given(st.fractions(0, 1, max_denominator=60), st.fractions(0, 1, max_denominator=60))
    def test_drift_identities(self, a, b):
        p1, p2 = max(a, b), min(a, b)
        if p1 == p2:
            return
        s = p1 + p2
        drift = p1 * mon.walk_step(p1, p2, True) + (1 - p1) * mon.walk_step(p1, p2, False)
        if s <= 1:
            assert drift == (p2 - p1) / (2 - s)
        else:
            assert drift == (p2 - p1) / s
        assert drift <= -(p1 - p2) / 2


def exact_phase_drift(h1, h2, report, psi1, psi2):
    from hmcdist.distinguish import select_event
    sel = select_event(report.testset, psi1, psi2)
    total = F(0)
    for v in itertools.product(h1.alphabet, repeat=report.m):
        q1 = pr(h1, psi1, v)
        if q1 and pr(h2, psi2, v):
            total += q1 * mon.walk_step(sel.p1, sel.p2, sel.contains(v))
    return total


def test_fig3_exact_drift_at_both_reachable_pairs():
    h1, h2 = FIG3
    for psi1, psi2 in [({"s0": 1}, {"t0": 1}), ({"s1": 1}, {"t1": 1})]:
        assert exact_phase_drift(h1, h2, REP3, psi1, psi2) <= -REP3.c / 2


class TestM2:
    def test_fig2_forced_length(self):
        h1, h2 = corpus.fig2()
        v = mon.run_m2(h1, h2, "aa", forced(1, 2))
        assert (v.decision, v.observations) == (1, 2)
        assert mon.run_m2(h1, h2, "aa", forced(1, 2), exact=True).decision == 1

    def test_identical_chains_tie_goes_to_first(self):
        h = corpus.fig1()[0]
        stream = sample_run(h, 30, 1).symbols
        assert mon.run_m2(h, h.renamed("c."), stream, forced(5, 6)).decision == 1
        assert mon.run_m2(h, h.renamed("c."), stream, forced(5, 6), exact=True).decision == 1

    def test_impossible_start(self):
        v = mon.run_m2(*FIG3, "b" * 8, forced(2, 4))
        assert (v.decision, v.observations, v.impossible) == (3, 1, True)
        assert v.line() == "DECISION 3 AFTER 1 OBS"

    def test_early_attribution_when_one_chain_dies(self):
        h1, h2 = corpus.fig4()
        # after "ab" only b follows in both; "aba" is impossible in both
        assert mon.run_m2(h1, h2, "abab", forced(1, 4)).decision == 3
        a = corpus.singleton("x", "a", ("a", "b"))
        v = mon.run_m2(h1, a, "ab" + "b" * 6, forced(2, 4))
        assert (v.decision, v.observations) == (1, 2)
        v = mon.run_m2(a, h1, "ab" + "b" * 6, forced(2, 4))
        assert (v.decision, v.observations) == (2, 2)

    def test_truncated_stream(self):
        with pytest.raises(mon.TruncatedStreamError):
            mon.run_m2(*FIG3, "aaa", forced(1, 4))

    def test_float_and_exact_modes_agree(self):
        h1, h2 = FIG3
        for seed in range(30):
            src = FIG3[seed % 2]
            stream = sample_run(src, 40, seed).symbols
            assert (mon.run_m2(h1, h2, stream, forced(10, 4)).decision
                    == mon.run_m2(h1, h2, stream, forced(10, 4), exact=True).decision)

    def test_output1_set_maximises_probability_gap(self):
        h1, h2 = FIG3
        plan = forced(2, 4)
        gain = F(-1)
        for w in itertools.product("ab", repeat=8):
            p1, p2 = pr(h1, h1.point(), w), pr(h2, h2.point(), w)
            if not p1 and not p2:
                continue
            inside = mon.run_m2(h1, h2, w, plan, exact=True).decision == 1
            gain = max(gain, (p2 - p1) if inside else (p1 - p2))
        assert gain <= 0

    def test_low_ratio_prefixes_are_accepted(self):
        h1, h2 = FIG3
        N = 2
        threshold = math.exp(-float(REP3.c) ** 2 * N / 36)
        seen = 0
        for w in itertools.product("ab", repeat=N * 4):
            r = lr(h1, h2, w)
            if r is not None and r != math.inf and r <= threshold:
                seen += 1
                assert mon.run_m2(h1, h2, w, forced(N, 4)).decision == 1
        assert seen > 0


class TestM2Prime:
    def test_observation_count_and_step_bound(self):
        h1, h2 = FIG3
        for seed in range(6):
            stream = sample_run(FIG3[seed % 2], 400, seed).symbols
            w = mon.WalkMonitor(h1, h2, REP3)
            it = iter(stream)
            for _ in range(20):
                fresh = [next(it) for _ in range(w.fresh_per_phase)]
                assert w.phase(fresh) is None
            assert len(w.steps) == 20 and all(abs(d) <= 1 for d in w.steps)
            assert sum(w.steps) == w.state.x
            v = mon.run_m2prime(h1, h2, REP3, stream, forced(20, 4))
            assert v.observations == mon.walk_observations(20, 4) == 61
            assert v.decision == w.decision()

    def test_impossible_start_and_truncation(self):
        v = mon.run_m2prime(*FIG3, REP3, "bbbb", forced(3, 4))
        assert (v.decision, v.observations) == (3, 4)
        with pytest.raises(mon.TruncatedStreamError):
            mon.run_m2prime(*FIG3, REP3, "aaaab", forced(3, 4))

    def test_early_exit_when_one_chain_dies(self):
        h1 = corpus.fig4()[0]
        a = corpus.singleton("x", "a", ("a", "b"))
        stream = "ab" + "b" * 20
        rep = profile_constant(h1, a)
        v = mon.run_m2prime(h1, a, rep, stream, forced(3, rep.m))
        assert (v.decision, v.observations) == (1, rep.m)
        rep = profile_constant(a, h1)
        v = mon.run_m2prime(a, h1, rep, stream, forced(3, rep.m))
        assert (v.decision, v.observations) == (2, rep.m)

    def test_needs_distinguishable_pair(self):
        with pytest.raises(mon.NotDistinguishableError):
            mon.WalkMonitor(*corpus.fig4(), profile_constant(*corpus.fig4()))

    def test_phase_length_validation(self):
        w = mon.WalkMonitor(*FIG3, REP3)
        with pytest.raises(ValueError):
            w.phase("aaa")
        w.phase("aaaa")
        assert w.fresh_per_phase == 3

    def test_sources_are_recognised(self):
        h1, h2 = FIG3
        plan = forced(120, 4)
        for idx, src in enumerate(FIG3, start=1):
            got = [mon.run_m2prime(h1, h2, REP3, sample_run(src, 400, s).symbols, plan).decision
                   for s in range(10)]
            assert got == [idx] * 10


class TestM1:
    def test_alternating_stream_first_phase(self):
        h1, h2 = FIG3
        stream = "abab" * 5
        out = mon.run_m1(h1, h2, stream, 1)
        assert (lr(h1, h2, "abab") <= 1) == (out.status == mon.ALARM and out.observations == 4)
        for k in range(1, 6):
            r = lr(h1, h2, stream[:4 * k])
            if r <= 1:
                break
        else:
            assert out.status == mon.NO_ALARM and out.observations == 20
            assert out.line() == "NO-ALARM AFTER 20 OBS"

    def test_identical_chains_alarm_at_first_phase(self):
        h = corpus.fig1()[0]
        out = mon.run_m1(h, h.renamed("c."), sample_run(h, 12, 0).symbols, 1)
        assert (out.status, out.observations) == (mon.ALARM, 6)
        assert out.line() == "ALARM AFTER 6 OBS"

    def test_never_alarms_on_streams_impossible_for_first_chain(self):
        a = corpus.singleton("x", "a", ("a", "b"))
        h2 = corpus.fig4()[1]
        out = mon.run_m1(a, h2, "abbbbbbb", 1, m=2)
        assert out.status == mon.IMPOSSIBLE and out.observations == 2
        assert not out.alarmed

    def test_alarm_when_second_chain_dies(self):
        a = corpus.singleton("x", "a", ("a", "b"))
        h1 = corpus.fig4()[0]
        out = mon.run_m1(h1, a, "abbb", 0.01, m=2)
        assert (out.status, out.observations) == (mon.ALARM, 2)

    def test_horizon(self):
        h1, h2 = FIG3
        stream = sample_run(h2, 100, 3).symbols
        out = mon.run_m1(h1, h2, stream, 1e-6, horizon=5)
        assert out.status == mon.NO_ALARM and out.observations == 20

    def test_threshold_range(self):
        with pytest.raises(ValueError):
            mon.run_m1(*FIG3, "a", 0)

    def test_exact_lr_at_each_phase(self):
        h1, h2 = FIG3
        for seed in range(10):
            stream = sample_run(h2, 60, seed).symbols
            out = mon.run_m1(h1, h2, stream, 0.2)
            first = next((k for k in range(4, 61, 4) if lr(h1, h2, stream[:k]) <= F(1, 5)), None)
            if first is None:
                assert out.status == mon.NO_ALARM
            else:
                assert out.status == mon.ALARM and out.observations == first


class TestMulti:
    def test_two_models_match_m2_on_every_stream(self):
        h1, h2 = FIG3
        reports = mon.pairwise_reports([h1, h2])
        plan = forced(2, 4)
        for w in itertools.product("ab", repeat=8):
            a = mon.run_multi([h1, h2], reports, w, plan, exact=True).decision
            b = mon.run_m2(h1, h2, w, plan, exact=True).decision
            if b != 3:
                assert a == b
        h = corpus.fig1()[0]
        same = [h, h.renamed("c.")]
        stream = sample_run(h, 12, 2).symbols
        assert mon.run_multi(same, None, stream, forced(2, 6)).decision == 1

    def test_float_mode_matches_exact(self):
        models = [FIG3[0], FIG3[1], corpus.fig4()[0]]
        for seed in range(12):
            stream = sample_run(models[seed % 3], 48, seed).symbols
            a = mon.run_multi(models, None, stream, forced(12, 4))
            b = mon.run_multi(models, None, stream, forced(12, 4), exact=True)
            assert a.decision == b.decision

    def test_impossible_everywhere(self):
        models = [FIG3[0], FIG3[1], corpus.fig4()[0]]
        v = mon.run_multi(models, None, "bbbb", forced(1, 4))
        assert (v.decision, v.observations, v.impossible) == (mon.NO_MODEL, 1, True)

    def test_rejects_indistinguishable_pairs(self):
        models = list(corpus.fig4())
        with pytest.raises(mon.NotDistinguishableError):
            mon.run_multi(models, mon.pairwise_reports(models), "aaaa", forced(1, 4))

    def test_truncated(self):
        with pytest.raises(mon.TruncatedStreamError):
            mon.run_multi(list(FIG3), None, "aa", forced(1, 4))
