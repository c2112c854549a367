"""Linear systems answering multi-objective mean-payoff questions.

The existence question ("is there a strategy with expected mean payoff
at least v_i for every reward i?") is decided by one linear program over
three variable families:

  y_a  expected transient frequency of action a,
  y_s  probability mass that stops transitioning and commits to the
       recurrent behaviour upon entering s (only MEC states carry mass),
  x_a  long-run frequency of action a.

The memoryless variant strengthens the same system with a per-state
coupling row and one disjunctive side condition per action, solved
exactly by `lp.solve_disjunctive`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .graph import MecDecomposition, mec_decomposition
from .lp import Atom, DisjunctiveProgram, LinearProgram, solve_disjunctive, solve_lp
from .model import Mdp, RewardStructure

RewardSpec = tuple[RewardStructure, Fraction]  # structure with its threshold


@dataclass
class FlowSolution:
    """Values of the y_a / y_s / x_a families from a feasible system."""

    ya: dict[int, Fraction]
    ys: dict[int, Fraction]
    xa: dict[int, Fraction]


class VariableNames:
    """LP variable names for an MDP: y_<action>, y_<state>, x_<action>.

    Collisions (an action named like a state, say) are disambiguated
    deterministically with a numeric suffix.
    """

    def __init__(self, mdp: Mdp):
        taken: set[str] = set()

        def fresh(candidate: str) -> str:
            name = candidate
            k = 2
            while name in taken:
                name = f"{candidate}~{k}"
                k += 1
            taken.add(name)
            return name

        self.ya = [fresh(f"y_{a.name}") for a in mdp.actions]
        self.ys = [fresh(f"y_{s}") for s in mdp.state_names]
        self.xa = [fresh(f"x_{a.name}") for a in mdp.actions]

    def declare_all(self, lp: LinearProgram):
        for name in self.ya + self.ys + self.xa:
            lp.add_variable(name)


def _incoming(mdp: Mdp, s: int):
    """(action, probability) pairs with delta(a)(s) > 0."""
    for idx, act in enumerate(mdp.actions):
        for target, prob in act.successors:
            if target == s:
                yield idx, prob


def _flow_rows(mdp: Mdp, lp: LinearProgram, names: VariableNames):
    """Transient flow balance: inflow (plus source mass) equals outflow
    plus the mass that commits at s, for every state."""
    for s in range(mdp.n_states):
        coeffs: dict[str, Fraction] = {}
        for a, prob in _incoming(mdp, s):
            coeffs[names.ya[a]] = coeffs.get(names.ya[a], Fraction(0)) + prob
        for a in mdp.enabled[s]:
            coeffs[names.ya[a]] = coeffs.get(names.ya[a], Fraction(0)) - 1
        coeffs[names.ys[s]] = coeffs.get(names.ys[s], Fraction(0)) - 1
        rhs = Fraction(-1) if s == mdp.initial else Fraction(0)
        lp.add_constraint({v: c for v, c in coeffs.items() if c != 0}, "=", rhs,
                          name=f"flow_{s}")


def _recurrent_rows(mdp: Mdp, lp: LinearProgram, names: VariableNames):
    """Long-run frequencies are invariant: x-inflow equals x-outflow."""
    for s in range(mdp.n_states):
        coeffs: dict[str, Fraction] = {}
        for a, prob in _incoming(mdp, s):
            coeffs[names.xa[a]] = coeffs.get(names.xa[a], Fraction(0)) + prob
        for a in mdp.enabled[s]:
            coeffs[names.xa[a]] = coeffs.get(names.xa[a], Fraction(0)) - 1
        lp.add_constraint({v: c for v, c in coeffs.items() if c != 0}, "=",
                          Fraction(0), name=f"rec_{s}")


def _threshold_rows(lp: LinearProgram, names: VariableNames,
                    rewards: list[RewardSpec]):
    for i, (struct, threshold) in enumerate(rewards):
        coeffs = {names.xa[a]: r for a, r in struct.rewards.items() if r != 0}
        lp.add_constraint(coeffs, ">=", Fraction(threshold), name=f"rew_{i}")


def build_existence_lp(mdp: Mdp, rewards: list[RewardSpec],
                       mecdec: MecDecomposition) -> tuple[LinearProgram, VariableNames]:
    """The full existence system: flow rows, unit commit mass over MEC
    states, per-MEC coupling of commit mass to recurrent frequencies,
    recurrent invariance, and one threshold row per reward."""
    if not rewards:
        raise ValueError("at least one reward structure is required")
    lp = LinearProgram()
    names = VariableNames(mdp)
    names.declare_all(lp)
    _flow_rows(mdp, lp, names)
    lp.add_constraint({names.ys[s]: Fraction(1) for s in sorted(mecdec.mec_states)},
                      "=", Fraction(1), name="commit_mass")
    for j, ec in enumerate(mecdec.mecs):
        coeffs = {names.ys[s]: Fraction(1) for s in sorted(ec.states)}
        for a in sorted(ec.actions):
            coeffs[names.xa[a]] = Fraction(-1)
        lp.add_constraint(coeffs, "=", Fraction(0), name=f"mec_{j}")
    _recurrent_rows(mdp, lp, names)
    _threshold_rows(lp, names, rewards)
    return lp, names


def _extract(assignment: dict[str, Fraction], mdp: Mdp,
             names: VariableNames) -> FlowSolution:
    return FlowSolution(
        ya={a: assignment[names.ya[a]] for a in range(mdp.n_actions)},
        ys={s: assignment[names.ys[s]] for s in range(mdp.n_states)},
        xa={a: assignment[names.xa[a]] for a in range(mdp.n_actions)},
    )


def check_existence(mdp: Mdp, rewards: list[RewardSpec],
                    mecdec: MecDecomposition | None = None) -> FlowSolution | None:
    """Yes (a witness solution) iff some strategy meets every threshold."""
    mecdec = mecdec or mec_decomposition(mdp)
    lp, names = build_existence_lp(mdp, rewards, mecdec)
    out = solve_lp(lp)
    if not out.is_feasible:
        return None
    return _extract(out.assignment, mdp, names)


def optimize_weighted(mdp: Mdp,
                      objectives: list[tuple[RewardStructure, Fraction]],
                      constraints: list[RewardSpec],
                      mecdec: MecDecomposition | None = None,
                      ) -> tuple[list[Fraction], FlowSolution] | None:
    """Maximise a nonnegative weighted sum of long-run rewards subject to
    the threshold constraints; returns each objective's achieved value.

    None means the constraints alone are unsatisfiable.  The feasible
    region bounds every x_a by 1, so the optimum always exists.
    """
    if not objectives or any(w < 0 for _, w in objectives) or \
            all(w == 0 for _, w in objectives):
        raise ValueError("weights must be nonnegative and not all zero")
    mecdec = mecdec or mec_decomposition(mdp)
    base_rewards = constraints if constraints else []
    lp = LinearProgram()
    names = VariableNames(mdp)
    names.declare_all(lp)
    _flow_rows(mdp, lp, names)
    lp.add_constraint({names.ys[s]: Fraction(1) for s in sorted(mecdec.mec_states)},
                      "=", Fraction(1), name="commit_mass")
    for j, ec in enumerate(mecdec.mecs):
        coeffs = {names.ys[s]: Fraction(1) for s in sorted(ec.states)}
        for a in sorted(ec.actions):
            coeffs[names.xa[a]] = Fraction(-1)
        lp.add_constraint(coeffs, "=", Fraction(0), name=f"mec_{j}")
    _recurrent_rows(mdp, lp, names)
    _threshold_rows(lp, names, constraints)

    objective: dict[str, Fraction] = {}
    for struct, weight in objectives:
        for a, r in struct.rewards.items():
            if r == 0:
                continue
            key = names.xa[a]
            objective[key] = objective.get(key, Fraction(0)) + weight * r
    lp.set_objective(objective, "max")
    out = solve_lp(lp)
    if out.status == "infeasible":
        return None
    if out.status != "optimal":
        raise RuntimeError(f"unexpected solver status {out.status} on a bounded system")
    solution = _extract(out.assignment, mdp, names)
    values = [sum((solution.xa[a] * r for a, r in struct.rewards.items()),
                  Fraction(0)) for struct, _ in objectives]
    return values, solution


def build_memoryless_system(mdp: Mdp, rewards: list[RewardSpec],
                            mecdec: MecDecomposition,
                            prune: bool = True,
                            ) -> tuple[DisjunctiveProgram, VariableNames]:
    """The memoryless variant: the per-MEC coupling rows are replaced by
    per-state rows y_s = sum of x over Act(s), and each action b gets the
    side condition

        y_b = 0   or   x_b > 0   or   sum of x over Act(Src(b)) = 0.

    With `prune`, actions owned by non-MEC states drop their clause: the
    recurrent-invariance rows force x to vanish outside MECs, so the
    third disjunct is implied (validated against the unpruned system in
    tests).
    """
    if not rewards:
        raise ValueError("at least one reward structure is required")
    lp = LinearProgram()
    names = VariableNames(mdp)
    names.declare_all(lp)
    _flow_rows(mdp, lp, names)
    lp.add_constraint({names.ys[s]: Fraction(1) for s in sorted(mecdec.mec_states)},
                      "=", Fraction(1), name="commit_mass")
    _recurrent_rows(mdp, lp, names)
    _threshold_rows(lp, names, rewards)
    for s in range(mdp.n_states):
        coeffs = {names.ys[s]: Fraction(1)}
        for a in mdp.enabled[s]:
            coeffs[names.xa[a]] = Fraction(-1)
        lp.add_constraint(coeffs, "=", Fraction(0), name=f"couple_{s}")

    dp = DisjunctiveProgram(lp)
    for b in range(mdp.n_actions):
        src = mdp.actions[b].source
        if prune and src not in mecdec.mec_states:
            continue
        total_x = {names.xa[a]: Fraction(1) for a in mdp.enabled[src]}
        dp.add_clause([
            [Atom.make({names.ya[b]: Fraction(1)}, "=", 0)],
            [Atom.make({names.xa[b]: Fraction(1)}, ">", 0)],
            [Atom.make(total_x, "=", 0)],
        ])
    return dp, names


def check_memoryless_existence(mdp: Mdp, rewards: list[RewardSpec],
                               mecdec: MecDecomposition | None = None,
                               prune: bool = True) -> FlowSolution | None:
    """Existence restricted to memoryless (randomised) strategies."""
    mecdec = mecdec or mec_decomposition(mdp)
    dp, names = build_memoryless_system(mdp, rewards, mecdec, prune=prune)
    out = solve_disjunctive(dp)
    if not out.is_feasible:
        return None
    return _extract(out.assignment, mdp, names)
