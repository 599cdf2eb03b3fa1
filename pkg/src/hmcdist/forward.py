"""Emission probabilities, conditional state distributions and likelihood ratios.

Words are sequences of alphabet symbols; a plain ``str`` is read one
character per symbol. The state carrying a distribution ``psi`` emits the
*first* symbol of a word, so ``pr(h, psi, "a")`` is the weight of the states
labelled ``a`` and ``cd(h, psi, u)`` is the distribution of the state that
emitted the *last* symbol of ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .exact import ONE, ZERO
from .model import Dist, Hmc

Word = Sequence[str]


def _symbol(h: Hmc, a: str) -> str:
    if a not in h.alphabet:
        raise ValueError(f"symbol {a!r} is not in the alphabet {h.alphabet}")
    return a


@dataclass(frozen=True)
class SubMatrix:
    """``entries[s][t]`` = probability of emitting the word from ``s`` and ending in ``t``."""

    hmc: Hmc
    length: int
    entries: tuple[tuple[Fraction, ...], ...]

    def __getitem__(self, key: tuple[str, str]) -> Fraction:
        s, t = key
        return self.entries[self.hmc.index[s]][self.hmc.index[t]]

    def row(self, s: str) -> dict[str, Fraction]:
        return dict(zip(self.hmc.states, self.entries[self.hmc.index[s]]))


def sub_start(h: Hmc, a: str) -> SubMatrix:
    _symbol(h, a)
    n = h.n
    E = tuple(tuple(ONE if (s == t and h.obs[h.states[s]] == a) else ZERO for t in range(n))
              for s in range(n))
    return SubMatrix(h, 1, E)


def sub_extend(h: Hmc, m: SubMatrix, a: str) -> SubMatrix:
    if m.hmc is not h and m.hmc != h:
        raise ValueError("sub-matrix belongs to a different chain")
    _symbol(h, a)
    P = h.matrix
    emits = [h.obs[r] == a for r in h.states]
    rows = []
    for srow in m.entries:
        rows.append(tuple(sum((srow[t] * P[t][r] for t in range(h.n) if srow[t]), ZERO) if emits[r] else ZERO
                          for r in range(h.n)))
    return SubMatrix(h, m.length + 1, tuple(rows))


def sub(h: Hmc, u: Word) -> SubMatrix:
    if len(u) == 0:
        raise ValueError("sub is defined for nonempty words only")
    m = sub_start(h, u[0])
    for a in u[1:]:
        m = sub_extend(h, m, a)
    return m


def emission_vector(h: Hmc, u: Word) -> list[Fraction]:
    """Per-state probability of emitting ``u`` (all ones for the empty word).

    Built right to left: the vector for ``a·w`` is ``M(a)`` times the one for
    ``w``, where ``M(a)[s][t] = P[s][t]`` if ``s`` emits ``a`` and 0 otherwise.
    """
    eta = [ONE] * h.n
    for a in reversed(u):
        eta = step_emission(h, eta, a)
    return eta


def step_emission(h: Hmc, eta: Sequence[Fraction], a: str) -> list[Fraction]:
    """Emission vector of ``a·w`` given the vector ``eta`` of ``w``."""
    P = h.matrix
    return [sum((P[i][j] * eta[j] for j in range(h.n) if eta[j] and P[i][j]), ZERO)
            if h.obs[s] == a else ZERO
            for i, s in enumerate(h.states)]


def pr(h: Hmc, psi: Mapping[str, Fraction], u: Word) -> Fraction:
    """Probability that ``h`` emits ``u`` when started from ``psi``."""
    if len(u) == 0:
        return ONE
    eta = emission_vector(h, u)
    return sum((w * eta[h.index[s]] for s, w in psi.items() if w), ZERO)


def forward_vector(h: Hmc, psi: Mapping[str, Fraction], u: Word) -> list[Fraction]:
    """Unnormalised ``sum_s psi(s) * sub(s, u, t)`` for every ``t``."""
    if len(u) == 0:
        raise ValueError("forward_vector needs a nonempty word")
    alpha = [ZERO] * h.n
    for s, w in psi.items():
        if h.obs[s] == u[0]:
            alpha[h.index[s]] = Fraction(w)
    P = h.matrix
    for a in u[1:]:
        alpha = [sum((alpha[t] * P[t][r] for t in range(h.n) if alpha[t] and P[t][r]), ZERO)
                 if h.obs[h.states[r]] == a else ZERO
                 for r in range(h.n)]
    return alpha


def cd(h: Hmc, psi: Mapping[str, Fraction], u: Word) -> Dist | None:
    """Conditional distribution of the state emitting the last symbol of ``u``.

    Returns None when ``u`` has probability zero from ``psi``.
    """
    alpha = forward_vector(h, psi, u)
    total = sum(alpha, ZERO)
    if total == 0:
        return None
    return {s: a / total for s, a in zip(h.states, alpha) if a}


def lr(h1: Hmc, h2: Hmc, u: Word) -> Fraction | float | None:
    """``pr_2(u) / pr_1(u)`` from the initial states.

    ``math.inf`` when only the denominator vanishes, None when both do.
    """
    p1 = pr(h1, h1.point(), u)
    p2 = pr(h2, h2.point(), u)
    if p1 == 0:
        return None if p2 == 0 else math.inf
    return p2 / p1


# --------------------------------------------------------------------------
# streaming, floating point

def filter_update(probs: np.ndarray, support: np.ndarray, emit_mask: np.ndarray,
                  first: bool, P: np.ndarray, adjacency: np.ndarray):
    """One normalised forward step, vectorised over any leading batch axes.

    ``emit_mask`` marks the states emitting the observed symbol. Returns the
    new normalised probabilities, the new support, the log of the step's
    emission probability, and a flag for rows whose support became empty.
    Emptiness is decided on the support alone, never on float magnitudes.
    """
    if first:
        cand, supp = probs, support
    else:
        cand = probs @ P
        supp = (support.astype(float) @ adjacency) > 0
    cand = cand * emit_mask
    supp = supp & emit_mask
    dead = ~supp.any(axis=-1)
    total = cand.sum(axis=-1)
    if np.any(~dead & (total <= 0)):
        raise FloatingPointError("forward probabilities underflowed on a nonempty support")
    safe = np.where(dead, 1.0, total)
    out = cand / np.expand_dims(safe, -1)
    with np.errstate(divide="ignore"):
        logz = np.where(dead, -np.inf, np.log(safe))
    return out, supp, logz, dead


class ForwardFilter:
    """Normalised filtering distribution and log-likelihood of one chain."""

    def __init__(self, h: Hmc, psi: Mapping[str, Fraction] | None = None):
        self.hmc = h
        psi = h.point() if psi is None else psi
        self.probs = np.array([float(x) for x in h.vector(psi)])
        self.support = np.array([x > 0 for x in h.vector(psi)])
        self.loglik = 0.0
        self.zero = False
        self.count = 0

    def step(self, a: str) -> None:
        h = self.hmc
        first = self.count == 0
        self.count += 1
        if self.zero:
            return
        if a in h.alphabet:
            mask = h.emission_masks[h.alphabet.index(a)]
        else:
            mask = np.zeros(h.n, dtype=bool)
        probs, supp, logz, dead = filter_update(self.probs, self.support, mask, first,
                                                h.float_matrix, h.adjacency)
        if dead:
            self.zero = True
            self.loglik = -math.inf
            return
        self.probs, self.support = probs, supp
        self.loglik += float(logz)

    def distribution(self) -> dict[str, float]:
        return {s: float(p) for s, p in zip(self.hmc.states, self.probs) if p}


class StreamTracker:
    """Tracks ``log lr(u)`` and both conditional distributions along a stream."""

    def __init__(self, h1: Hmc, h2: Hmc):
        self.f1 = ForwardFilter(h1)
        self.f2 = ForwardFilter(h2)

    @property
    def count(self) -> int:
        return self.f1.count

    @property
    def zero1(self) -> bool:
        return self.f1.zero

    @property
    def zero2(self) -> bool:
        return self.f2.zero

    @property
    def log_lr(self) -> float:
        """Natural log of ``lr``; +inf / -inf / nan mirror the exact cases."""
        if self.f1.zero:
            return math.nan if self.f2.zero else math.inf
        return self.f2.loglik - self.f1.loglik

    def step(self, a: str) -> "StreamTracker":
        self.f1.step(a)
        self.f2.step(a)
        return self
