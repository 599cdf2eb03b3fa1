"""Hidden Markov chains: the model types, the text format, and product reachability."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping

import numpy as np

from .exact import ONE, ZERO, as_rat
from .graphs import reachable_from, strongly_connected_components

Dist = dict  # state -> Fraction, summing to exactly 1


class ModelError(ValueError):
    pass


class ModelSyntaxError(ModelError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class ModelValidationError(ModelError):
    pass


@dataclass(frozen=True, eq=False)
class Hmc:
    """Finite hidden Markov chain with exact rational transition probabilities.

    ``trans[s]`` maps each successor of ``s`` to its probability; only the
    listed pairs are edges. The state emitting the first observation is
    ``init``.
    """

    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    obs: Mapping[str, str]
    trans: Mapping[str, Mapping[str, Fraction]]
    init: str

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "obs", dict(self.obs))
        object.__setattr__(self, "trans", {s: {t: as_rat(p) for t, p in row.items()}
                                           for s, row in self.trans.items()})
        self._validate()

    def _validate(self):
        if not self.states:
            raise ModelValidationError("model has no states")
        if len(set(self.states)) != len(self.states):
            raise ModelValidationError("duplicate state name")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ModelValidationError("duplicate alphabet symbol")
        if self.init not in self.states:
            raise ModelValidationError(f"initial state {self.init!r} is not a state")
        known = set(self.states)
        for s in self.states:
            if s not in self.obs:
                raise ModelValidationError(f"state {s!r} has no observation")
            if self.obs[s] not in self.alphabet:
                raise ModelValidationError(f"unknown symbol {self.obs[s]!r} at state {s!r}")
        for s, row in self.trans.items():
            if s not in known:
                raise ModelValidationError(f"edge from unknown state {s!r}")
            for t, p in row.items():
                if t not in known:
                    raise ModelValidationError(f"edge to unknown state {t!r}")
                if not ZERO < p <= ONE:
                    raise ModelValidationError(f"edge {s}->{t} has probability {p} outside (0,1]")
        for s in self.states:
            row = self.trans.get(s)
            if not row:
                raise ModelValidationError(f"state {s!r} has no outgoing edge")
            total = sum(row.values(), ZERO)
            if total != ONE:
                raise ModelValidationError(f"row not stochastic: state {s!r} sums to {total}")

    def __eq__(self, other):
        if not isinstance(other, Hmc):
            return NotImplemented
        return (self.states == other.states and self.alphabet == other.alphabet
                and self.obs == other.obs and self.trans == other.trans
                and self.init == other.init)

    __hash__ = None

    @property
    def n(self) -> int:
        return len(self.states)

    @cached_property
    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def matrix(self) -> list[list[Fraction]]:
        """Dense exact transition matrix in ``states`` order."""
        P = [[ZERO] * self.n for _ in self.states]
        for s, row in self.trans.items():
            for t, p in row.items():
                P[self.index[s]][self.index[t]] = p
        return P

    @cached_property
    def obs_index(self) -> list[int]:
        sym = {a: k for k, a in enumerate(self.alphabet)}
        return [sym[self.obs[s]] for s in self.states]

    @cached_property
    def float_matrix(self) -> np.ndarray:
        return np.array([[float(p) for p in row] for row in self.matrix])

    @cached_property
    def adjacency(self) -> np.ndarray:
        return np.array([[1.0 if p else 0.0 for p in row] for row in self.matrix])

    @cached_property
    def emission_masks(self) -> np.ndarray:
        """``masks[k, s]`` is True iff state ``s`` emits alphabet symbol ``k``."""
        masks = np.zeros((len(self.alphabet), self.n), dtype=bool)
        for s, k in enumerate(self.obs_index):
            masks[k, s] = True
        return masks

    def successors(self, s: str):
        return self.trans[s].keys()

    def point(self, s: str | None = None) -> Dist:
        """The point distribution on ``s`` (default: the initial state)."""
        s = self.init if s is None else s
        if s not in self.index:
            raise KeyError(s)
        return {s: ONE}

    def vector(self, psi: Mapping[str, Fraction]) -> list[Fraction]:
        """Dense exact vector of a distribution given as a mapping."""
        unknown = set(psi) - set(self.index)
        if unknown:
            raise ValueError(f"distribution mentions unknown states {sorted(unknown)}")
        return [as_rat(psi.get(s, 0)) for s in self.states]

    def renamed(self, prefix: str) -> "Hmc":
        ren = {s: prefix + s for s in self.states}
        return Hmc(states=[ren[s] for s in self.states], alphabet=self.alphabet,
                   obs={ren[s]: a for s, a in self.obs.items()},
                   trans={ren[s]: {ren[t]: p for t, p in row.items()} for s, row in self.trans.items()},
                   init=ren[self.init])


def check_dist(psi: Mapping[str, Fraction], h: Hmc) -> None:
    if any(s not in h.index for s in psi):
        raise ValueError("distribution support is not inside the chain's states")
    if any(as_rat(w) < 0 for w in psi.values()):
        raise ValueError("distribution has a negative weight")
    if sum((as_rat(w) for w in psi.values()), ZERO) != ONE:
        raise ValueError("distribution weights do not sum to 1")


def bottom_sccs(h: Hmc) -> list[frozenset[str]]:
    """Strongly connected components without outgoing edges, in ``states`` order."""
    out = []
    for comp in strongly_connected_components(h.states, h.successors):
        cs = set(comp)
        if all(t in cs for s in comp for t in h.trans[s]):
            out.append(frozenset(comp))
    out.sort(key=lambda c: min(h.index[s] for s in c))
    return out


@dataclass(frozen=True, eq=False)
class ClassifiedHmc:
    """An Hmc whose bottom SCCs are each labelled bad or good."""

    hmc: Hmc
    bad: frozenset[str]
    good: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "bad", frozenset(self.bad))
        object.__setattr__(self, "good", frozenset(self.good))
        h = self.hmc
        unknown = (self.bad | self.good) - set(h.states)
        if unknown:
            raise ModelValidationError(f"classification names unknown states {sorted(unknown)}")
        if self.bad & self.good:
            raise ModelValidationError(f"states labelled both bad and good: {sorted(self.bad & self.good)}")
        covered = set()
        for comp in bottom_sccs(h):
            if comp <= self.bad or comp <= self.good:
                covered |= comp
            else:
                raise ModelValidationError(
                    f"unlabeled BSCC {sorted(comp)}: every bottom component must lie entirely in bad or good")
        transient = (self.bad | self.good) - covered
        if transient:
            raise ModelValidationError(f"transient states may not be labelled: {sorted(transient)}")
        reach = reachable_from([h.init], h.successors)
        if not reach & self.bad:
            raise ModelValidationError("P(Bad) = 0: no bad BSCC is reachable from the initial state")
        if not reach & self.good:
            raise ModelValidationError("P(Good) = 0: no good BSCC is reachable from the initial state")

    def __eq__(self, other):
        if not isinstance(other, ClassifiedHmc):
            return NotImplemented
        return self.hmc == other.hmc and self.bad == other.bad and self.good == other.good

    __hash__ = None


# --------------------------------------------------------------------------
# text format

def _parse_rational(tok: str, lineno: int) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ModelSyntaxError(lineno, f"bad rational {tok!r} (use p/q or a decimal)") from None


def parse_model(text: str) -> Hmc | ClassifiedHmc:
    """Parse the line-oriented model format (``hmc`` or ``chmc`` header)."""
    kind = None
    alphabet = None
    states: list[str] = []
    obs: dict[str, str] = {}
    init = None
    trans: dict[str, dict[str, Fraction]] = {}
    bad = good = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if kind is None:
            if toks not in (["hmc"], ["chmc"]):
                raise ModelSyntaxError(lineno, "expected header 'hmc' or 'chmc'")
            kind = toks[0]
            continue
        head = toks[0]
        if head == "alphabet:":
            if alphabet is not None:
                raise ModelSyntaxError(lineno, "alphabet declared twice")
            if len(toks) < 2:
                raise ModelSyntaxError(lineno, "empty alphabet")
            alphabet = toks[1:]
        elif head == "state":
            if len(toks) not in (3, 4) or not toks[2].startswith("obs=") or len(toks[2]) == 4:
                raise ModelSyntaxError(lineno, "expected: state NAME obs=SYMBOL [init]")
            name = toks[1]
            if name in obs:
                raise ModelSyntaxError(lineno, f"state {name!r} declared twice")
            states.append(name)
            obs[name] = toks[2][4:]
            if len(toks) == 4:
                if toks[3] != "init":
                    raise ModelSyntaxError(lineno, f"unexpected token {toks[3]!r}")
                if init is not None:
                    raise ModelSyntaxError(lineno, "more than one init state")
                init = name
        elif head == "edge":
            if len(toks) != 5 or toks[2] != "->":
                raise ModelSyntaxError(lineno, "expected: edge FROM -> TO RATIONAL")
            src, dst = toks[1], toks[3]
            row = trans.setdefault(src, {})
            if dst in row:
                raise ModelSyntaxError(lineno, f"duplicate edge {src}->{dst}")
            row[dst] = _parse_rational(toks[4], lineno)
        elif head in ("bad:", "good:"):
            if kind != "chmc":
                raise ModelSyntaxError(lineno, f"{head} is only allowed in chmc files")
            if len(toks) < 2:
                raise ModelSyntaxError(lineno, f"{head} needs at least one state")
            if head == "bad:":
                if bad is not None:
                    raise ModelSyntaxError(lineno, "bad: given twice")
                bad = toks[1:]
            else:
                if good is not None:
                    raise ModelSyntaxError(lineno, "good: given twice")
                good = toks[1:]
        else:
            raise ModelSyntaxError(lineno, f"unknown directive {head!r}")

    if kind is None:
        raise ModelSyntaxError(1, "empty model file")
    if alphabet is None:
        raise ModelValidationError("missing alphabet: line")
    if init is None:
        raise ModelValidationError("no state is marked init")
    h = Hmc(states=states, alphabet=alphabet, obs=obs, trans=trans, init=init)
    if kind == "chmc":
        if bad is None or good is None:
            raise ModelValidationError("chmc needs both bad: and good: lines")
        return ClassifiedHmc(h, frozenset(bad), frozenset(good))
    return h


def format_model(model: Hmc | ClassifiedHmc) -> str:
    h = model.hmc if isinstance(model, ClassifiedHmc) else model
    lines = ["chmc" if isinstance(model, ClassifiedHmc) else "hmc",
             "alphabet: " + " ".join(h.alphabet)]
    for s in h.states:
        lines.append(f"state {s} obs={h.obs[s]}" + (" init" if s == h.init else ""))
    for s in h.states:
        for t, p in h.trans[s].items():
            lines.append(f"edge {s} -> {t} {p}")
    if isinstance(model, ClassifiedHmc):
        order = h.index
        lines.append("bad: " + " ".join(sorted(model.bad, key=order.get)))
        lines.append("good: " + " ".join(sorted(model.good, key=order.get)))
    return "\n".join(lines) + "\n"


def load_model(path) -> Hmc | ClassifiedHmc:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


# --------------------------------------------------------------------------

def shared_alphabet(h1: Hmc, h2: Hmc) -> tuple[str, ...]:
    """The common alphabet, in ``h1``'s declared order."""
    if set(h1.alphabet) != set(h2.alphabet):
        raise ValueError(f"alphabets differ: {h1.alphabet} vs {h2.alphabet}")
    return h1.alphabet


def product_reachable_pairs(h1: Hmc, h2: Hmc) -> set[tuple[str, str]]:
    """State pairs jointly reachable by some common nonempty observation word.

    Breadth-first search over the synchronised product; a pair ``(t1, t2)``
    means both chains can emit the same word and end in ``t1`` resp. ``t2``.
    """
    shared_alphabet(h1, h2)
    seed = (h1.init, h2.init)
    if h1.obs[h1.init] != h2.obs[h2.init]:
        return set()
    seen = {seed}
    queue = deque([seed])
    while queue:
        s1, s2 = queue.popleft()
        for t1 in h1.trans[s1]:
            a = h1.obs[t1]
            for t2 in h2.trans[s2]:
                if h2.obs[t2] == a and (t1, t2) not in seen:
                    seen.add((t1, t2))
                    queue.append((t1, t2))
    return seen
