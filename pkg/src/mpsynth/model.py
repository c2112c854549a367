"""Core MDP data structures and the explicit text model format.

Every numeric quantity in the pipeline is a `fractions.Fraction`, so
probabilities, rewards and thresholds survive parsing and all downstream
computation exactly.  Decimal literals in input files are converted to
exact rationals (0.25 becomes 1/4).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction


class ParseError(Exception):
    """Syntax error in a model document, with 1-based location."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class ValidationError(Exception):
    """A model violates a structural invariant; carries all diagnostics."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


def parse_rational(text: str) -> Fraction:
    """Parse 'p/q', an integer, or a decimal literal into an exact Fraction."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad rational literal {text!r}: {exc}") from None


@dataclass(frozen=True)
class MdpAction:
    """One action: owned by a single source state, with a successor distribution."""

    name: str
    source: int
    successors: tuple[tuple[int, Fraction], ...]


@dataclass(frozen=True)
class Mdp:
    """Explicit finite MDP.

    States and actions are dense indices in declaration order; display
    names live in side tables.  Instances are immutable after
    construction and safe to share between threads.
    """

    state_names: tuple[str, ...]
    actions: tuple[MdpAction, ...]
    enabled: tuple[tuple[int, ...], ...]  # per state, action ids in declaration order
    initial: int

    @classmethod
    def build(cls, state_names, actions, initial) -> "Mdp":
        """Construct an Mdp, deriving the per-state enabled lists."""
        enabled: list[list[int]] = [[] for _ in state_names]
        for idx, act in enumerate(actions):
            if 0 <= act.source < len(state_names):
                enabled[act.source].append(idx)
        return cls(
            state_names=tuple(state_names),
            actions=tuple(actions),
            enabled=tuple(tuple(e) for e in enabled),
            initial=initial,
        )

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def state_index(self, name: str) -> int:
        return self.state_names.index(name)

    def action_index(self, name: str) -> int:
        for i, a in enumerate(self.actions):
            if a.name == name:
                return i
        raise KeyError(name)


@dataclass
class RewardStructure:
    """Named per-action rewards; actions without an entry earn 0."""

    name: str
    rewards: dict[int, Fraction] = field(default_factory=dict)

    def reward(self, action: int) -> Fraction:
        return self.rewards.get(action, Fraction(0))

    def negated(self, name: str | None = None) -> "RewardStructure":
        return RewardStructure(name or ("-" + self.name),
                               {a: -r for a, r in self.rewards.items()})


@dataclass(frozen=True)
class ChainTransition:
    target: int
    prob: Fraction
    action: int | None  # id of the originating MDP action, None for synthetic edges
    label: str


@dataclass(frozen=True)
class MarkovChain:
    """Finite Markov chain with per-transition action annotations.

    `initial` is a distribution (list of (state, probability)); a chain
    started in a single state uses the one-entry distribution.  Parallel
    edges are kept separate so each remembers the MDP action it came from.
    """

    state_names: tuple[str, ...]
    transitions: tuple[tuple[ChainTransition, ...], ...]
    initial: tuple[tuple[int, Fraction], ...]

    @property
    def n_states(self) -> int:
        return len(self.state_names)


def validate(mdp: Mdp) -> list[str]:
    """Check all Mdp invariants; returns one diagnostic per violation."""
    diags: list[str] = []
    n = mdp.n_states
    if not (0 <= mdp.initial < n):
        diags.append(f"initial state id {mdp.initial} out of range")
    owners: dict[str, int] = {}
    for idx, act in enumerate(mdp.actions):
        if not (0 <= act.source < n):
            diags.append(f"action {act.name}: source state id {act.source} out of range")
            continue
        if act.name in owners:
            diags.append(f"action name {act.name} declared twice")
        owners[act.name] = idx
        if not act.successors:
            diags.append(f"action {act.name}: empty successor distribution")
            continue
        seen: set[int] = set()
        total = Fraction(0)
        for target, prob in act.successors:
            if not (0 <= target < n):
                diags.append(f"action {act.name}: successor id {target} is not a valid state")
                continue
            if target in seen:
                diags.append(f"action {act.name}: duplicate successor {mdp.state_names[target]}")
            seen.add(target)
            if prob <= 0:
                diags.append(f"action {act.name}: probability {prob} not positive")
            total += prob
        if total != 1:
            diags.append(f"action {act.name}: distribution sums to {total}")
    for s in range(n):
        if not mdp.enabled[s]:
            diags.append(f"state {mdp.state_names[s]} has empty Act")
    for s in range(n):
        for a in mdp.enabled[s]:
            if mdp.actions[a].source != s:
                diags.append(f"action {mdp.actions[a].name} enabled at "
                             f"{mdp.state_names[s]} but owned by another state")
    return diags


def validate_chain(chain: MarkovChain) -> list[str]:
    """Row-stochasticity and positivity diagnostics for a Markov chain."""
    diags: list[str] = []
    n = chain.n_states
    for s in range(n):
        total = Fraction(0)
        for tr in chain.transitions[s]:
            if not (0 <= tr.target < n):
                diags.append(f"state {chain.state_names[s]}: bad successor id {tr.target}")
            if tr.prob <= 0:
                diags.append(f"state {chain.state_names[s]}: probability {tr.prob} not positive")
            total += tr.prob
        if total != 1:
            diags.append(f"state {chain.state_names[s]}: row sums to {total}")
    init_total = sum((p for _, p in chain.initial), Fraction(0))
    if init_total != 1:
        diags.append(f"initial distribution sums to {init_total}")
    return diags


# ---------------------------------------------------------------------------
# Explicit model format
#
#   mdp
#   state <name>
#   action <name> from <state> [reward <rname>=<rat> ...] -> <state>:<rat> [, ...]
#   initial <state>
#
# '#' starts a comment.  Rationals are p/q or decimal literals.

_TOKEN_RE = re.compile(r"->|-?(?:\d+(?:\.\d+)?(?:/\d+)?|\.\d+)|[A-Za-z_][A-Za-z0-9_.]*|[=:,]")

_NUMBER_RE = re.compile(r"-?(?:\d+(?:\.\d+)?(?:/\d+)?|\.\d+)$")


def _tokenize_line(text: str, lineno: int) -> list[tuple[str, int]]:
    """Tokens with 1-based columns; comments stripped."""
    hash_pos = text.find("#")
    if hash_pos >= 0:
        text = text[:hash_pos]
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        tokens.append((m.group(0), pos + 1))
        pos = m.end()
    return tokens


class _LineParser:
    def __init__(self, tokens: list[tuple[str, int]], lineno: int):
        self.tokens = tokens
        self.lineno = lineno
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def _column(self) -> int:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][1]
        return self.tokens[-1][1] + len(self.tokens[-1][0]) if self.tokens else 1

    def error(self, message: str):
        raise ParseError(message, self.lineno, self._column())

    def take(self, expected: str | None = None) -> str:
        if self.pos >= len(self.tokens):
            self.error(f"expected {expected!r}" if expected else "unexpected end of line")
        tok, _ = self.tokens[self.pos]
        if expected is not None and tok != expected:
            self.error(f"expected {expected!r}, found {tok!r}")
        self.pos += 1
        return tok

    def take_name(self, what: str) -> str:
        tok = self.take(None)
        if not re.match(r"[A-Za-z_][A-Za-z0-9_.]*$", tok):
            self.pos -= 1
            self.error(f"expected {what}, found {tok!r}")
        return tok

    def take_rational(self) -> Fraction:
        tok = self.take(None)
        if not _NUMBER_RE.match(tok):
            self.pos -= 1
            self.error(f"expected rational, found {tok!r}")
        try:
            return parse_rational(tok)
        except ValueError as exc:
            self.pos -= 1
            self.error(str(exc))

    def expect_end(self):
        if self.pos < len(self.tokens):
            self.error(f"trailing input {self.tokens[self.pos][0]!r}")


def load_explicit_model(text: str) -> tuple[Mdp, dict[str, RewardStructure]]:
    """Parse an explicit-format document into a validated Mdp plus rewards.

    Raises ParseError with line/column on syntax problems and
    ValidationError naming every violated invariant otherwise.
    """
    state_ids: dict[str, int] = {}
    state_names: list[str] = []
    actions: list[MdpAction] = []
    action_ids: dict[str, int] = {}
    rewards: dict[str, RewardStructure] = {}
    initial_name: str | None = None
    saw_header = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize_line(raw, lineno)
        if not tokens:
            continue
        lp = _LineParser(tokens, lineno)
        if not saw_header:
            lp.take("mdp")
            lp.expect_end()
            saw_header = True
            continue
        keyword = lp.take(None)
        if keyword == "state":
            name = lp.take_name("state name")
            lp.expect_end()
            if name in state_ids:
                raise ParseError(f"state {name} declared twice", lineno, tokens[1][1])
            state_ids[name] = len(state_names)
            state_names.append(name)
        elif keyword == "action":
            name = lp.take_name("action name")
            if name in action_ids:
                raise ParseError(f"action {name} declared twice", lineno, tokens[1][1])
            lp.take("from")
            src = lp.take_name("state name")
            if src not in state_ids:
                lp.pos -= 1
                lp.error(f"unknown state {src}")
            action_rewards: list[tuple[str, Fraction]] = []
            while lp.peek() == "reward":
                lp.take("reward")
                rname = lp.take_name("reward structure name")
                lp.take("=")
                action_rewards.append((rname, lp.take_rational()))
            lp.take("->")
            successors: list[tuple[int, Fraction]] = []
            while True:
                tgt = lp.take_name("state name")
                if tgt not in state_ids:
                    lp.pos -= 1
                    lp.error(f"unknown state {tgt}")
                lp.take(":")
                successors.append((state_ids[tgt], lp.take_rational()))
                if lp.peek() != ",":
                    break
                lp.take(",")
            lp.expect_end()
            action_id = len(actions)
            action_ids[name] = action_id
            actions.append(MdpAction(name, state_ids[src], tuple(successors)))
            for rname, value in action_rewards:
                rewards.setdefault(rname, RewardStructure(rname)).rewards[action_id] = value
        elif keyword == "initial":
            initial_name = lp.take_name("state name")
            if initial_name not in state_ids:
                lp.pos -= 1
                lp.error(f"unknown state {initial_name}")
            lp.expect_end()
        else:
            raise ParseError(f"unknown keyword {keyword!r}", lineno, tokens[0][1])

    if not saw_header:
        raise ParseError("expected 'mdp' header", 1, 1)
    if not state_names:
        raise ParseError("document declares no states", 1, 1)
    initial = state_ids[initial_name] if initial_name is not None else 0
    mdp = Mdp.build(state_names, actions, initial)
    diags = validate(mdp)
    if diags:
        raise ValidationError(diags)
    return mdp, rewards


def serialize_explicit(mdp: Mdp, rewards: dict[str, RewardStructure]) -> str:
    """Render an Mdp back into the explicit format, preserving order."""
    lines = ["mdp"]
    for name in mdp.state_names:
        lines.append(f"state {name}")
    for idx, act in enumerate(mdp.actions):
        parts = [f"action {act.name} from {mdp.state_names[act.source]}"]
        for rname, struct in rewards.items():
            if idx in struct.rewards:
                parts.append(f"reward {rname}={struct.rewards[idx]}")
        succ = ", ".join(f"{mdp.state_names[t]}:{p}" for t, p in act.successors)
        lines.append(" ".join(parts) + " -> " + succ)
    lines.append(f"initial {mdp.state_names[mdp.initial]}")
    return "\n".join(lines) + "\n"
