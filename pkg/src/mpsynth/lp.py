"""Exact linear programming over rationals.

The solver is a two-phase primal simplex with Bland's anti-cycling rule.
There is no floating point anywhere: the public interface speaks
`Fraction`, and internally each tableau row is a list of integers with a
single positive denominator, so a pivot is pure integer
cross-multiplication followed by one gcd pass.

On top of the LP solver sits `solve_disjunctive`, a small DPLL-style
search for boolean combinations of linear constraints (conjunctions of
disjunctions of atoms, where atoms may be strict `expr > 0`).  Strict
atoms are decided exactly by maximising an auxiliary slack, never with
epsilon constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction


OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_RELATIONS = ("<=", "=", ">=")


class ExportError(Exception):
    pass


@dataclass(frozen=True)
class LpOutcome:
    status: str
    assignment: dict[str, Fraction] | None = None
    value: Fraction | None = None

    @property
    def is_feasible(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE)


@dataclass
class Constraint:
    coeffs: dict[str, Fraction]
    relation: str
    rhs: Fraction
    name: str = ""


class LinearProgram:
    """Named variables (nonnegative by default, optionally free),
    linear constraints and an optional linear objective."""

    def __init__(self):
        self.variables: list[str] = []
        self.free: set[str] = set()
        self.constraints: list[Constraint] = []
        self.objective: tuple[dict[str, Fraction], str] | None = None
        self._declared: set[str] = set()

    def add_variable(self, name: str, free: bool = False) -> str:
        if name in self._declared:
            raise ValueError(f"variable {name} declared twice")
        self._declared.add(name)
        self.variables.append(name)
        if free:
            self.free.add(name)
        return name

    def _check_coeffs(self, coeffs: dict[str, Fraction]):
        for var in coeffs:
            if var not in self._declared:
                raise ValueError(f"unknown variable {var}")

    def add_constraint(self, coeffs: dict[str, Fraction], relation: str,
                       rhs: Fraction, name: str = ""):
        if relation not in _RELATIONS:
            raise ValueError(f"bad relation {relation!r}")
        self._check_coeffs(coeffs)
        self.constraints.append(Constraint(dict(coeffs), relation, Fraction(rhs), name))

    def set_objective(self, coeffs: dict[str, Fraction], direction: str):
        if direction not in ("max", "min"):
            raise ValueError(f"bad direction {direction!r}")
        self._check_coeffs(coeffs)
        self.objective = (dict(coeffs), direction)

    def copy(self) -> "LinearProgram":
        out = LinearProgram()
        out.variables = list(self.variables)
        out.free = set(self.free)
        out.constraints = [Constraint(dict(c.coeffs), c.relation, c.rhs, c.name)
                           for c in self.constraints]
        out.objective = (dict(self.objective[0]), self.objective[1]) if self.objective else None
        out._declared = set(self._declared)
        return out


# ---------------------------------------------------------------------------
# simplex core

def _normalize_row(nums: list[int], den: int) -> tuple[list[int], int]:
    if den < 0:
        nums = [-v for v in nums]
        den = -den
    g = den
    for v in nums:
        if v:
            g = math.gcd(g, v)
            if g == 1:
                return nums, den
    if g > 1:
        nums = [v // g for v in nums]
        den //= g
    return nums, den


class _Tableau:
    """Dense simplex tableau; row i is nums/den with den > 0, RHS last."""

    def __init__(self, rows: list[tuple[list[int], int]], basis: list[int], ncols: int):
        self.rows = rows
        self.basis = basis
        self.ncols = ncols  # number of variable columns (RHS sits at index ncols)
        self.obj: tuple[list[int], int] | None = None

    def set_costs(self, costs: list[Fraction]):
        """Install reduced costs for the given per-column cost vector."""
        red = list(costs)
        z = Fraction(0)
        for i, col in enumerate(self.basis):
            cb = costs[col]
            if cb == 0:
                continue
            nums, den = self.rows[i]
            for j in range(self.ncols):
                if nums[j]:
                    red[j] -= cb * Fraction(nums[j], den)
            z += cb * Fraction(nums[self.ncols], den)
        den = 1
        for v in red:
            den = den * v.denominator // math.gcd(den, v.denominator)
        den = den * z.denominator // math.gcd(den, z.denominator)
        nums = [int(v * den) for v in red] + [int(-z * den)]
        self.obj = _normalize_row(nums, den)

    def objective_value(self) -> Fraction:
        nums, den = self.obj
        return -Fraction(nums[self.ncols], den)

    def pivot(self, row: int, col: int):
        pn, pd = self.rows[row]
        pc = pn[col]
        assert pc != 0
        targets = [i for i in range(len(self.rows)) if i != row and self.rows[i][0][col]]
        for i in targets:
            n_i, d_i = self.rows[i]
            rc = n_i[col]
            nums = [a * pc - rc * b for a, b in zip(n_i, pn)]
            self.rows[i] = _normalize_row(nums, d_i * pc)
        on, od = self.obj
        rc = on[col]
        if rc:
            nums = [a * pc - rc * b for a, b in zip(on, pn)]
            self.obj = _normalize_row(nums, od * pc)
        self.rows[row] = _normalize_row(list(pn), pc)
        self.basis[row] = col

    def run(self, enterable: list[bool]) -> str:
        """Bland's rule until optimal or unbounded."""
        ncols = self.ncols
        while True:
            on, _ = self.obj
            col = next((j for j in range(ncols) if enterable[j] and on[j] < 0), None)
            if col is None:
                return OPTIMAL
            best = None  # (num, den, basis_var, row)
            for i, (nums, _d) in enumerate(self.rows):
                a = nums[col]
                if a > 0:
                    num = nums[ncols]
                    if best is None or num * best[1] < best[0] * a or \
                            (num * best[1] == best[0] * a and self.basis[i] < best[2]):
                        best = (num, a, self.basis[i], i)
            if best is None:
                return UNBOUNDED
            self.pivot(best[3], col)

    def column_value(self, col: int) -> Fraction:
        for i, b in enumerate(self.basis):
            if b == col:
                nums, den = self.rows[i]
                return Fraction(nums[self.ncols], den)
        return Fraction(0)


def _to_int_row(coeffs: list[Fraction], rhs: Fraction) -> tuple[list[int], int]:
    den = 1
    for v in coeffs:
        den = den * v.denominator // math.gcd(den, v.denominator)
    den = den * rhs.denominator // math.gcd(den, rhs.denominator)
    nums = [int(v * den) for v in coeffs] + [int(rhs * den)]
    return _normalize_row(nums, den)


def solve_lp(lp: LinearProgram) -> LpOutcome:
    """Exact two-phase simplex.  With an objective the outcome is
    Optimal / Infeasible / Unbounded; without one it is Feasible or
    Infeasible, and any returned assignment satisfies every constraint
    exactly."""
    # Column layout: one column per nonneg variable, two (plus/minus) per
    # free variable, then slacks, then artificials.
    col_plus: dict[str, int] = {}
    col_minus: dict[str, int] = {}
    nstruct = 0
    for v in lp.variables:
        col_plus[v] = nstruct
        nstruct += 1
        if v in lp.free:
            col_minus[v] = nstruct
            nstruct += 1

    prepared = []  # (dense struct coeffs, relation, rhs) with rhs >= 0
    for con in lp.constraints:
        dense = [Fraction(0)] * nstruct
        for var, coeff in con.coeffs.items():
            if coeff == 0:
                continue
            dense[col_plus[var]] += coeff
            if var in col_minus:
                dense[col_minus[var]] -= coeff
        rel, rhs = con.relation, con.rhs
        if rhs < 0:
            dense = [-c for c in dense]
            rhs = -rhs
            rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
        prepared.append((dense, rel, rhs))

    nslack = sum(1 for _, rel, _ in prepared if rel != "=")
    nart = sum(1 for _, rel, _ in prepared if rel != "<=")
    ncols = nstruct + nslack + nart

    rows: list[tuple[list[int], int]] = []
    basis: list[int] = []
    slack_at = nstruct
    art_at = nstruct + nslack
    art_cols = []
    for dense, rel, rhs in prepared:
        full = dense + [Fraction(0)] * (ncols - nstruct)
        if rel == "<=":
            full[slack_at] = Fraction(1)
            basis.append(slack_at)
            slack_at += 1
        elif rel == ">=":
            full[slack_at] = Fraction(-1)
            slack_at += 1
            full[art_at] = Fraction(1)
            basis.append(art_at)
            art_cols.append(art_at)
            art_at += 1
        else:
            full[art_at] = Fraction(1)
            basis.append(art_at)
            art_cols.append(art_at)
            art_at += 1
        rows.append(_to_int_row(full, rhs))

    tab = _Tableau(rows, basis, ncols)
    enterable = [True] * ncols
    for c in art_cols:
        enterable[c] = False

    if art_cols:
        costs = [Fraction(0)] * ncols
        for c in art_cols:
            costs[c] = Fraction(1)
        tab.set_costs(costs)
        tab.run(enterable)
        if tab.objective_value() != 0:
            return LpOutcome(INFEASIBLE)
        # Drive leftover artificials out of the basis, dropping rows that
        # turned out redundant.
        art_set = set(art_cols)
        for i in range(len(tab.basis) - 1, -1, -1):
            if tab.basis[i] not in art_set:
                continue
            nums, _den = tab.rows[i]
            col = next((j for j in range(nstruct + nslack) if nums[j]), None)
            if col is None:
                del tab.rows[i]
                del tab.basis[i]
            else:
                tab.pivot(i, col)
        # Truncate the artificial block (it sits just before the RHS).
        for i, (nums, den) in enumerate(tab.rows):
            tab.rows[i] = (nums[:art_at - len(art_cols)] + [nums[ncols]], den)
        on, od = tab.obj
        tab.obj = (on[:art_at - len(art_cols)] + [on[ncols]], od)
        tab.ncols = ncols - len(art_cols)
        enterable = enterable[:tab.ncols]

    def assignment() -> dict[str, Fraction]:
        out = {}
        for v in lp.variables:
            val = tab.column_value(col_plus[v])
            if v in col_minus:
                val -= tab.column_value(col_minus[v])
            out[v] = val
        return out

    if lp.objective is None:
        return LpOutcome(FEASIBLE, assignment=assignment())

    coeffs, direction = lp.objective
    costs = [Fraction(0)] * tab.ncols
    for var, coeff in coeffs.items():
        sign = -coeff if direction == "max" else coeff  # internal minimisation
        costs[col_plus[var]] += sign
        if var in col_minus:
            costs[col_minus[var]] -= sign
    tab.set_costs(costs)
    status = tab.run(enterable)
    if status == UNBOUNDED:
        return LpOutcome(UNBOUNDED)
    value = tab.objective_value()
    if direction == "max":
        value = -value
    return LpOutcome(OPTIMAL, assignment=assignment(), value=value)


# ---------------------------------------------------------------------------
# boolean combinations of linear constraints

@dataclass(frozen=True)
class Atom:
    """A single linear relation; `>` is allowed only as `expr > 0`."""

    coeffs: tuple[tuple[str, Fraction], ...]
    relation: str
    rhs: Fraction

    @staticmethod
    def make(coeffs: dict[str, Fraction], relation: str, rhs) -> "Atom":
        rhs = Fraction(rhs)
        if relation == ">":
            if rhs != 0:
                raise ValueError("strict atoms must have the form expr > 0")
        elif relation not in _RELATIONS:
            raise ValueError(f"bad relation {relation!r}")
        items = tuple(sorted((v, Fraction(c)) for v, c in coeffs.items() if c != 0))
        return Atom(items, relation, rhs)

    def value_at(self, point: dict[str, Fraction]) -> Fraction:
        return sum((c * point.get(v, Fraction(0)) for v, c in self.coeffs), Fraction(0))

    def holds_at(self, point: dict[str, Fraction]) -> bool:
        e = self.value_at(point)
        if self.relation == "<=":
            return e <= self.rhs
        if self.relation == ">=":
            return e >= self.rhs
        if self.relation == "=":
            return e == self.rhs
        return e > 0


@dataclass
class DisjunctiveProgram:
    """A base LP plus clauses; each clause is a disjunction of
    conjunctions of atoms and must be satisfied by the solution."""

    base: LinearProgram
    clauses: list[list[list[Atom]]] = field(default_factory=list)

    def add_clause(self, disjuncts: list[list[Atom]]):
        if not disjuncts:
            raise ValueError("empty clause")
        self.clauses.append([list(d) for d in disjuncts])


def _clause_holds(point: dict[str, Fraction], clause: list[list[Atom]]) -> bool:
    return any(all(a.holds_at(point) for a in disjunct) for disjunct in clause)


def _assemble(base: LinearProgram, chosen: list[list[Atom]],
              certify: bool) -> tuple[LinearProgram, str | None]:
    lp = base.copy()
    lp.objective = None  # feasibility search; a base objective could mask it as unbounded
    tvar = None
    strict = [a for d in chosen for a in d if a.relation == ">"]
    if certify and strict:
        tvar = "_t"
        while tvar in lp._declared:
            tvar += "_"
        lp.add_variable(tvar)
        lp.add_constraint({tvar: Fraction(1)}, "<=", Fraction(1))
        lp.set_objective({tvar: Fraction(1)}, "max")
    for disjunct in chosen:
        for atom in disjunct:
            coeffs = dict(atom.coeffs)
            if atom.relation == ">":
                if tvar is None:
                    lp.add_constraint(coeffs, ">=", Fraction(0))  # relaxation
                else:
                    coeffs[tvar] = coeffs.get(tvar, Fraction(0)) - 1
                    lp.add_constraint(coeffs, ">=", Fraction(0))
            else:
                lp.add_constraint(coeffs, atom.relation, atom.rhs)
    return lp, tvar


def solve_disjunctive(dp: DisjunctiveProgram) -> LpOutcome:
    """Feasibility of the base LP under every clause.

    Depth-first branching over clauses in input order, disjuncts in
    input order; a branch is pruned when its LP relaxation (strict atoms
    weakened to >=) is infeasible.  A complete branch with strict atoms
    is certified by maximising a fresh variable t with `expr >= t` for
    every strict atom and `t <= 1`; the branch is feasible iff the
    optimum is positive.  As a shortcut, any relaxation point that
    already satisfies every clause exactly is returned immediately.
    """
    clauses = dp.clauses

    def search(chosen: list[list[Atom]]) -> dict[str, Fraction] | None:
        lp, _ = _assemble(dp.base, chosen, certify=False)
        out = solve_lp(lp)
        if not out.is_feasible:
            return None
        if all(_clause_holds(out.assignment, cl) for cl in clauses):
            return out.assignment
        if len(chosen) == len(clauses):
            lp, tvar = _assemble(dp.base, chosen, certify=True)
            leaf = solve_lp(lp)
            if not leaf.is_feasible:
                return None
            if tvar is None:
                return leaf.assignment
            if leaf.value is None or leaf.value <= 0:
                return None
            point = dict(leaf.assignment)
            del point[tvar]
            return point
        for disjunct in clauses[len(chosen)]:
            res = search(chosen + [disjunct])
            if res is not None:
                return res
        return None

    point = search([])
    if point is None:
        return LpOutcome(INFEASIBLE)
    return LpOutcome(FEASIBLE, assignment=point)


# ---------------------------------------------------------------------------
# CPLEX LP file export

def _sanitize_names(names: list[str]) -> dict[str, str]:
    used: set[str] = set()
    out: dict[str, str] = {}
    for name in names:
        clean = "".join(ch if ch.isalnum() or ch == "_" else "_" for ch in name)
        if not clean or clean[0].isdigit():
            clean = "v_" + clean
        candidate = clean
        k = 2
        while candidate in used:
            candidate = f"{clean}_{k}"
            k += 1
        used.add(candidate)
        out[name] = candidate
    return out


def render_decimal(f: Fraction, sig_digits: int = 30) -> tuple[str, bool]:
    """Exact decimal text when the denominator is 2^a*5^b, else a rounded
    `sig_digits`-significant-digit decimal flagged as inexact."""
    den = f.denominator
    two = five = 0
    while den % 2 == 0:
        den //= 2
        two += 1
    while den % 5 == 0:
        den //= 5
        five += 1
    if den == 1:
        m = max(two, five)
        scaled = abs(f.numerator) * (10 ** m // f.denominator)
        sign = "-" if f.numerator < 0 else ""
        if m == 0:
            return sign + str(scaled), True
        digits = str(scaled).rjust(m + 1, "0")
        text = sign + digits[:-m] + "." + digits[-m:]
        return text.rstrip("0").rstrip(".") if "." in text else text, True
    import decimal
    with decimal.localcontext() as ctx:
        ctx.prec = sig_digits
        d = decimal.Decimal(f.numerator) / decimal.Decimal(f.denominator)
    return str(d), False


def _render_terms(coeffs: dict[str, Fraction], order: list[str],
                  names: dict[str, str], sig_digits: int) -> tuple[str, bool]:
    parts = []
    exact = True
    for var in order:
        c = coeffs.get(var, Fraction(0))
        if c == 0:
            continue
        mag = abs(c)
        sign = "-" if c < 0 else "+"
        if mag == 1:
            body = names[var]
        else:
            text, ok = render_decimal(mag, sig_digits)
            exact = exact and ok
            body = f"{text} {names[var]}"
        if not parts:
            parts.append(body if sign == "+" else f"- {body}")
        else:
            parts.append(f"{sign} {body}")
    if not parts:
        return "0 " + names[order[0]] if order else "0", True
    return " ".join(parts), exact


def export_lp_format(program, big_m: Fraction | None = None,
                     strict_eps: Fraction = Fraction(1, 10 ** 6),
                     sig_digits: int = 30) -> str:
    """Serialize a LinearProgram or DisjunctiveProgram as CPLEX LP text.

    Disjunctions are compiled with one binary indicator per disjunct and
    big-M relaxation rows; because the systems built here have unbounded
    y-variables, the caller must supply `big_m`.  Strict atoms use
    `strict_eps` as the indicator-on lower bound, so the exported MILP
    is a cross-check aid rather than the exact decision procedure.
    """
    if isinstance(program, DisjunctiveProgram):
        return _export_disjunctive(program, big_m, strict_eps, sig_digits)

    lp: LinearProgram = program
    names = _sanitize_names(lp.variables)
    lines = []
    inexact_any = False

    if lp.objective is not None:
        coeffs, direction = lp.objective
        lines.append("Maximize" if direction == "max" else "Minimize")
        terms, exact = _render_terms(coeffs, lp.variables, names, sig_digits)
        lines.append(f" obj: {terms}" + ("" if exact else " \\ inexact"))
        inexact_any |= not exact
    else:
        lines.append("Minimize")
        lines.append(" obj:")

    lines.append("Subject To")
    for i, con in enumerate(lp.constraints):
        terms, exact1 = _render_terms(con.coeffs, lp.variables, names, sig_digits)
        rhs_text, exact2 = render_decimal(con.rhs, sig_digits)
        label = con.name or f"c{i}"
        label = _sanitize_names([label])[label]
        comment = "" if exact1 and exact2 else " \\ inexact"
        lines.append(f" {label}: {terms} {con.relation} {rhs_text}{comment}")
        inexact_any |= bool(comment)

    lines.append("Bounds")
    for var in lp.variables:
        if var in lp.free:
            lines.append(f" {names[var]} free")
        else:
            lines.append(f" {names[var]} >= 0")
    binaries = [v for v in lp.variables if v.startswith("_bin_")]
    if binaries:
        lines.append("Binary")
        for v in binaries:
            lines.append(f" {names[v]}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _export_disjunctive(dp: DisjunctiveProgram, big_m, strict_eps, sig_digits) -> str:
    if big_m is None and dp.clauses:
        raise ExportError("big-M required: disjunct atoms range over unbounded variables")
    big_m = Fraction(big_m) if big_m is not None else Fraction(0)
    lp = dp.base.copy()
    # One binary per disjunct; z = 1 forces the disjunct's atoms.
    for ci, clause in enumerate(dp.clauses):
        zs = []
        for di, disjunct in enumerate(clause):
            z = f"_bin_{ci}_{di}"
            lp.add_variable(z)
            lp.add_constraint({z: Fraction(1)}, "<=", Fraction(1))
            zs.append(z)
            for ai, atom in enumerate(disjunct):
                coeffs = dict(atom.coeffs)
                if atom.relation == ">":
                    # expr >= eps - M(1-z)
                    coeffs[z] = coeffs.get(z, Fraction(0)) - (strict_eps + big_m)
                    lp.add_constraint(coeffs, ">=", -big_m,
                                      name=f"ind_{ci}_{di}_{ai}")
                    continue
                if atom.relation in ("<=", "="):
                    row = dict(coeffs)
                    row[z] = row.get(z, Fraction(0)) + big_m
                    lp.add_constraint(row, "<=", atom.rhs + big_m,
                                      name=f"ind_{ci}_{di}_{ai}a")
                if atom.relation in (">=", "="):
                    row = dict(coeffs)
                    row[z] = row.get(z, Fraction(0)) - big_m
                    lp.add_constraint(row, ">=", atom.rhs - big_m,
                                      name=f"ind_{ci}_{di}_{ai}b")
        lp.add_constraint({z: Fraction(1) for z in zs}, ">=", Fraction(1),
                          name=f"clause_{ci}")
    return export_lp_format(lp, sig_digits=sig_digits)
