"""Structural graph analysis for MDPs and Markov chains.

Provides strongly connected components, the maximal end component
decomposition, the unichain test and bottom SCCs of Markov chains.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .model import MarkovChain, Mdp


@dataclass(frozen=True)
class EndComponent:
    """A closed, strongly connected sub-MDP (state set with action set)."""

    states: frozenset[int]
    actions: frozenset[int]


@dataclass
class MecDecomposition:
    mecs: list[EndComponent]
    mec_states: set[int]
    state_to_mec: dict[int, int]


def sccs(vertices, successors) -> list[list]:
    """Strongly connected components, in reverse topological order.

    `successors` maps each vertex to an iterable of successor vertices.
    Iterative Tarjan; the emission order of Tarjan is already reverse
    topological (a component is emitted only after everything it can
    reach).
    """
    index_of: dict = {}
    lowlink: dict = {}
    on_stack: set = set()
    stack: list = []
    components: list[list] = []
    counter = itertools.count()

    for root in vertices:
        if root in index_of:
            continue
        # Explicit DFS stack of (vertex, iterator over successors).
        work = [(root, iter(successors.get(root, ())))]
        index_of[root] = lowlink[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index_of:
                    index_of[w] = lowlink[w] = next(counter)
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    if index_of[w] < lowlink[v]:
                        lowlink[v] = index_of[w]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if lowlink[v] < lowlink[parent]:
                    lowlink[parent] = lowlink[v]
            if lowlink[v] == index_of[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.remove(w)
                    comp.append(w)
                    if w == v:
                        break
                components.append(comp)
    return components


def mec_decomposition(mdp: Mdp) -> MecDecomposition:
    """Maximal end components by iterative SCC refinement.

    Repeatedly: compute SCCs of the remaining sub-MDP, delete actions
    leaving their SCC, delete states left without actions, until a
    fixpoint.  The surviving SCCs (with their internal actions) are the
    MECs.
    """
    alive_states = set(range(mdp.n_states))
    alive_actions = set(range(mdp.n_actions))

    while True:
        succ = {
            s: sorted({t for a in mdp.enabled[s] if a in alive_actions
                       for t, _ in mdp.actions[a].successors})
            for s in sorted(alive_states)
        }
        comp_of: dict[int, int] = {}
        for ci, comp in enumerate(sccs(sorted(alive_states), succ)):
            for s in comp:
                comp_of[s] = ci
        removed = False
        for a in sorted(alive_actions):
            act = mdp.actions[a]
            if act.source not in alive_states:
                alive_actions.discard(a)
                removed = True
                continue
            home = comp_of[act.source]
            if any(t not in alive_states or comp_of[t] != home
                   for t, _ in act.successors):
                alive_actions.discard(a)
                removed = True
        for s in sorted(alive_states):
            if not any(a in alive_actions for a in mdp.enabled[s]):
                alive_states.discard(s)
                removed = True
        if not removed:
            break

    groups: dict[int, list[int]] = {}
    succ = {
        s: sorted({t for a in mdp.enabled[s] if a in alive_actions
                   for t, _ in mdp.actions[a].successors})
        for s in sorted(alive_states)
    }
    for comp in sccs(sorted(alive_states), succ):
        groups[min(comp)] = comp
    mecs = []
    for key in sorted(groups):
        states = frozenset(groups[key])
        actions = frozenset(a for a in alive_actions
                            if mdp.actions[a].source in states)
        mecs.append(EndComponent(states=states, actions=actions))
    state_to_mec = {s: i for i, ec in enumerate(mecs) for s in ec.states}
    return MecDecomposition(mecs=mecs,
                            mec_states=set().union(*[ec.states for ec in mecs]) if mecs else set(),
                            state_to_mec=state_to_mec)


def is_unichain(mdp: Mdp) -> bool:
    """True iff every full action selection keeps the whole state space
    one end component.

    Checking deterministic selections (one action per state) suffices:
    a mixed selection only adds edges to some deterministic
    sub-selection, so strong connectivity fails for a mixed selection
    iff it fails for one of its deterministic refinements.
    """
    n = mdp.n_states
    for selection in itertools.product(*mdp.enabled):
        succ = {s: sorted({t for t, _ in mdp.actions[selection[s]].successors})
                for s in range(n)}
        if len(sccs(list(range(n)), succ)) != 1:
            return False
    return True


def bsccs(chain: MarkovChain) -> tuple[list[list[int]], set[int]]:
    """Bottom SCCs of a Markov chain plus the set of transient states."""
    n = chain.n_states
    succ = {s: sorted({tr.target for tr in chain.transitions[s]})
            for s in range(n)}
    bottoms = []
    for comp in sccs(list(range(n)), succ):
        members = set(comp)
        if all(t in members for s in comp for t in succ[s]):
            bottoms.append(sorted(comp))
    bottoms.sort(key=lambda c: c[0])
    transient = set(range(n)) - {s for c in bottoms for s in c}
    return bottoms, transient
