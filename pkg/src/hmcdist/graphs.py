"""Graph helpers: strongly connected components and reachability."""

from __future__ import annotations

from collections import deque
from typing import Callable, Hashable, Iterable


def strongly_connected_components(vertices: Iterable[Hashable],
                                  successors: Callable[[Hashable], Iterable[Hashable]]):
    """Tarjan's algorithm, iterative so deep chains do not hit the recursion limit.

    Components are yielded in reverse topological order (sinks first).
    """
    index: dict = {}
    lowlink: dict = {}
    on_stack: set = set()
    stack: list = []
    counter = 0

    for root in vertices:
        if root in index:
            continue
        work = [(root, iter(successors(root)))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                yield comp


def reachable_from(sources: Iterable[Hashable], successors) -> set:
    seen = set(sources)
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for w in successors(v):
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen
