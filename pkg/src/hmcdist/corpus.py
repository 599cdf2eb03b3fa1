"""Small reference chains used by the tests, the acceptance suite and the CLI demos."""

from __future__ import annotations

from fractions import Fraction

from .model import ClassifiedHmc, Hmc

F = Fraction


def _hmc(alphabet, states, edges, init):
    trans: dict = {}
    for s, t, p in edges:
        trans.setdefault(s, {})[t] = F(p)
    return Hmc(states=[s for s, _ in states], alphabet=alphabet,
               obs=dict(states), trans=trans, init=init)


def fig1() -> tuple[Hmc, Hmc]:
    """Distinguishable but only through long-run symbol frequencies."""
    h1 = _hmc(["a", "b"], [("s0", "a"), ("s1", "a"), ("s2", "b")],
              [("s0", "s0", "1/4"), ("s0", "s2", "1/2"), ("s0", "s1", "1/4"),
               ("s1", "s0", 1), ("s2", "s0", 1)], "s0")
    h2 = _hmc(["a", "b"], [("t0", "a"), ("t1", "b")],
              [("t0", "t0", "1/2"), ("t0", "t1", "1/2"), ("t1", "t0", 1)], "t0")
    return h1, h2


def fig2() -> tuple[Hmc, Hmc]:
    """Pair whose log-likelihood ratio jumps by unbounded amounts."""
    h1 = _hmc(["a", "b"], [("s0", "a"), ("s1", "a"), ("s2", "b")],
              [("s0", "s0", "1/3"), ("s0", "s2", "1/3"), ("s0", "s1", "1/3"),
               ("s1", "s1", 1), ("s2", "s0", "1/2"), ("s2", "s2", "1/2")], "s0")
    h2 = _hmc(["a", "b"], [("t0", "a"), ("t1", "b")],
              [("t0", "t0", "1/2"), ("t0", "t1", "1/2"), ("t1", "t1", "1/2"), ("t1", "t0", "1/2")], "t0")
    return h1, h2


def fig3(delta=F(1, 4)) -> tuple[Hmc, Hmc]:
    """Biased a/b generators; ``delta`` in (0, 1/4] sets the bias."""
    d = F(delta)
    if not 0 < d <= F(1, 4):
        raise ValueError("delta must lie in (0, 1/4]")
    hi, lo = F(1, 2) + d, F(1, 2) - d
    h1 = _hmc(["a", "b"], [("s0", "a"), ("s1", "b")],
              [("s0", "s0", hi), ("s0", "s1", lo), ("s1", "s0", hi), ("s1", "s1", lo)], "s0")
    h2 = _hmc(["a", "b"], [("t0", "a"), ("t1", "b")],
              [("t0", "t0", lo), ("t0", "t1", hi), ("t1", "t0", lo), ("t1", "t1", hi)], "t0")
    return h1, h2


def fig4() -> tuple[Hmc, Hmc]:
    """Not equivalent, yet not distinguishable: both end in an all-b loop."""
    h1 = _hmc(["a", "b"], [("s0", "a"), ("s1", "b")],
              [("s0", "s0", "1/2"), ("s0", "s1", "1/2"), ("s1", "s1", 1)], "s0")
    h2 = _hmc(["a", "b"], [("t0", "a"), ("t1", "b")],
              [("t0", "t0", "2/3"), ("t0", "t1", "1/3"), ("t1", "t1", 1)], "t0")
    return h1, h2


def singleton(name="s0", symbol="a", alphabet=("a",)) -> Hmc:
    return _hmc(list(alphabet), [(name, symbol)], [(name, name, 1)], name)


def absorbing_split() -> ClassifiedHmc:
    """Transient ``s0`` loops with 1/2 and falls into good ``g`` or bad ``b`` with 1/4 each."""
    h = _hmc(["a", "g", "b"], [("s0", "a"), ("g", "g"), ("b", "b")],
             [("s0", "s0", "1/2"), ("s0", "g", "1/4"), ("s0", "b", "1/4"),
              ("g", "g", 1), ("b", "b", 1)], "s0")
    return ClassifiedHmc(h, frozenset({"b"}), frozenset({"g"}))


def pairs() -> dict[str, tuple[Hmc, Hmc]]:
    return {"fig1": fig1(), "fig2": fig2(), "fig3": fig3(), "fig4": fig4()}
