"""LTL syntax, lasso-word semantics, and FSM policy synthesis.

Formulas parse into a core of {true, atom, and, not, next, until}; the sugar
or/implies/eventually/always expands at parse time.  Satisfaction over a
lasso word (finite prefix plus repeated loop) is exact: each subformula is
tabulated over the prefix+loop positions, with a least fixpoint for until
around the loop.  Policy synthesis solves an accepting-lasso search over the
product of a fully-controlled deterministic FSM with a supplied Buchi
automaton.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .gts import Gts

__all__ = [
    "LogicError",
    "LtlSyntaxError",
    "SynthesisError",
    "Ltl",
    "TrueF",
    "Atom",
    "Not",
    "And",
    "Next",
    "Until",
    "parse_ltl",
    "atoms_of",
    "LassoWord",
    "eval_lasso",
    "BuchiAutomaton",
    "LassoPlan",
    "synthesize_policy",
]


class LogicError(ValueError):
    pass


class LtlSyntaxError(LogicError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class SynthesisError(LogicError):
    pass


class Ltl:
    pass


@dataclass(frozen=True)
class TrueF(Ltl):
    pass


@dataclass(frozen=True)
class Atom(Ltl):
    name: str


@dataclass(frozen=True)
class Not(Ltl):
    operand: Ltl


@dataclass(frozen=True)
class And(Ltl):
    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Next(Ltl):
    operand: Ltl


@dataclass(frozen=True)
class Until(Ltl):
    left: Ltl
    right: Ltl


_TOKEN = re.compile(
    r"\s*(?:(?P<lpar>\()|(?P<rpar>\))|(?P<arrow>->)|(?P<and>&)|(?P<or>\|)"
    r"|(?P<not>!)|(?P<word>[A-Za-z_][A-Za-z0-9_]*))"
)
_UNARY = {"X": Next, "F": None, "G": None}
_KEYWORDS = {"X", "F", "G", "U", "true", "false"}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == m.start():
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise LtlSyntaxError(f"unexpected character {stripped[0]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent; precedence: unary > U (right-assoc) > & > | > ->."""

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str):
        tok = self.take()
        if tok[0] != kind:
            raise LtlSyntaxError(f"expected {kind}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> Ltl:
        f = self.implies()
        tok = self.peek()
        if tok[0] != "end":
            raise LtlSyntaxError(f"trailing input {tok[1]!r}", tok[2])
        return f

    def implies(self) -> Ltl:
        left = self.disjunct()
        if self.peek()[0] == "arrow":
            self.take()
            right = self.implies()
            # a -> b  ==  !(a & !b)
            return Not(And(left, Not(right)))
        return left

    def disjunct(self) -> Ltl:
        f = self.conjunct()
        while self.peek()[0] == "or":
            self.take()
            g = self.conjunct()
            f = Not(And(Not(f), Not(g)))
        return f

    def conjunct(self) -> Ltl:
        f = self.until()
        while self.peek()[0] == "and":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Ltl:
        left = self.unary()
        tok = self.peek()
        if tok[0] == "word" and tok[1] == "U":
            self.take()
            return Until(left, self.until())
        return left

    def unary(self) -> Ltl:
        tok = self.peek()
        if tok[0] == "not":
            self.take()
            return Not(self.unary())
        if tok[0] == "word" and tok[1] in ("X", "F", "G"):
            self.take()
            inner = self.unary()
            if tok[1] == "X":
                return Next(inner)
            if tok[1] == "F":
                return Until(TrueF(), inner)
            return Not(Until(TrueF(), Not(inner)))
        return self.primary()

    def primary(self) -> Ltl:
        tok = self.take()
        if tok[0] == "lpar":
            f = self.implies()
            self.expect("rpar")
            return f
        if tok[0] == "word":
            if tok[1] == "true":
                return TrueF()
            if tok[1] == "false":
                return Not(TrueF())
            if tok[1] in _KEYWORDS:
                raise LtlSyntaxError(f"misplaced operator {tok[1]!r}", tok[2])
            return Atom(tok[1])
        raise LtlSyntaxError(f"expected a formula, found {tok[1]!r}", tok[2])


def parse_ltl(text: str) -> Ltl:
    """Parse an LTL formula into the normalized core syntax."""
    return _Parser(text).parse()


def atoms_of(phi: Ltl) -> frozenset:
    match phi:
        case TrueF():
            return frozenset()
        case Atom(name):
            return frozenset([name])
        case Not(f) | Next(f):
            return atoms_of(f)
        case And(l, r) | Until(l, r):
            return atoms_of(l) | atoms_of(r)
    raise LogicError(f"not an LTL formula: {phi!r}")


@dataclass(frozen=True)
class LassoWord:
    """Infinite word prefix.loop^omega over AP-subsets."""

    prefix: tuple
    loop: tuple

    def __init__(self, prefix, loop):
        prefix = tuple(frozenset(s) for s in prefix)
        loop = tuple(frozenset(s) for s in loop)
        if not loop:
            raise LogicError("lasso loop must be nonempty")
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "loop", loop)

    @property
    def ap(self) -> frozenset:
        out = frozenset()
        for s in self.prefix + self.loop:
            out |= s
        return out

    def at(self, k: int) -> frozenset:
        if k < len(self.prefix):
            return self.prefix[k]
        return self.loop[(k - len(self.prefix)) % len(self.loop)]


def eval_lasso(phi: Ltl, w: LassoWord) -> bool:
    """Exact satisfaction of prefix.loop^omega |= phi.

    Tabulates each subformula over the m+p distinct suffix positions; until
    is the least fixpoint of v = phi2 or (phi1 and Xv) around the loop.
    """
    m, p = len(w.prefix), len(w.loop)
    n = m + p

    def succ(i: int) -> int:
        return i + 1 if i + 1 < n else m

    table: dict = {}

    def val(f: Ltl) -> list:
        if f in table:
            return table[f]
        match f:
            case TrueF():
                v = [True] * n
            case Atom(name):
                v = [name in w.at(i) for i in range(n)]
            case Not(g):
                v = [not x for x in val(g)]
            case And(l, r):
                vl, vr = val(l), val(r)
                v = [a and b for a, b in zip(vl, vr)]
            case Next(g):
                vg = val(g)
                v = [vg[succ(i)] for i in range(n)]
            case Until(l, r):
                vl, vr = val(l), val(r)
                v = list(vr)
                for _ in range(n + 1):
                    changed = False
                    for i in range(n - 1, -1, -1):
                        nv = v[i] or (vl[i] and v[succ(i)])
                        if nv != v[i]:
                            v[i] = nv
                            changed = True
                    if not changed:
                        break
            case _:
                raise LogicError(f"not an LTL formula: {f!r}")
        table[f] = v
        return v

    return val(phi)[0]


@dataclass(frozen=True)
class BuchiAutomaton:
    """Buchi automaton whose transition guards are explicit AP-subsets."""

    states: frozenset
    initial: object
    transitions: tuple  # of (state, frozenset-of-AP-subsets, state)
    accepting: frozenset
    ap: frozenset

    def __init__(self, states, initial, transitions, accepting, ap):
        states = frozenset(states)
        ap = frozenset(ap)
        trans = []
        for (q, guard, q2) in transitions:
            guard = frozenset(frozenset(g) for g in guard)
            for subset in guard:
                if not subset <= ap:
                    raise LogicError(f"guard {set(subset)} mentions undeclared atoms")
            if q not in states or q2 not in states:
                raise LogicError(f"transition endpoints {q!r}->{q2!r} outside state set")
            trans.append((q, guard, q2))
        if initial not in states:
            raise LogicError(f"initial state {initial!r} not a state")
        accepting = frozenset(accepting)
        if not accepting <= states:
            raise LogicError("accepting set must be a subset of states")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transitions", tuple(trans))
        object.__setattr__(self, "accepting", accepting)
        object.__setattr__(self, "ap", ap)

    def step(self, q, subset: frozenset) -> list:
        subset = frozenset(subset)
        return sorted(
            (q2 for (a, guard, q2) in self.transitions if a == q and subset in guard),
            key=repr,
        )


@dataclass(frozen=True)
class LassoPlan:
    """A cell schedule: prefix then infinitely repeated loop.

    cells[k] is the k-th cell entered (cells[0] is the start cell); the loop
    consists of cells[loop_start:].  The commanded transitions are the
    consecutive pairs, wrapping from the end back to loop_start.
    """

    cells: tuple
    loop_start: int

    def __post_init__(self):
        if not (0 <= self.loop_start < len(self.cells)):
            raise LogicError("loop_start out of range")

    @property
    def prefix(self) -> tuple:
        return self.cells[: self.loop_start]

    @property
    def loop(self) -> tuple:
        return self.cells[self.loop_start:]

    def cell_at(self, k: int):
        if k < len(self.cells):
            return self.cells[k]
        body = self.loop
        return body[(k - self.loop_start) % len(body)]

    def command_at(self, k: int) -> tuple:
        """FSM input (current, next) for the k-th executed transition."""
        return (self.cell_at(k), self.cell_at(k + 1))

    def word(self, labels: dict) -> LassoWord:
        """Label word of the plan under a cell -> AP-subset labeling."""
        lab = lambda c: frozenset(labels.get(c, frozenset()))
        loop = self.loop
        # The repeated part of the label word starts at the loop's first cell.
        return LassoWord([lab(c) for c in self.prefix], [lab(c) for c in loop])


def synthesize_policy(fsm: Gts, buchi: BuchiAutomaton, labels: dict) -> LassoPlan:
    """Accepting-lasso search over the product of the cell FSM and the automaton.

    The FSM is deterministic and fully controlled, so acceptance reduces to
    reachability of an accepting product state that can reach itself on a
    cycle.  The plan's word (with the start cell's label first) is a lasso
    accepted by the automaton.
    """
    labels = {c: frozenset(labels.get(c, frozenset())) for c in fsm.states}
    for c, lab in labels.items():
        if not lab <= buchi.ap:
            raise SynthesisError(f"cell {c!r} labeled with undeclared atoms {set(lab)}")

    def product_succ(node):
        cell, q = node
        out = []
        for u in sorted(fsm.enabled(cell), key=repr):
            for c2 in sorted(fsm.post(cell, u), key=repr):
                for q2 in buchi.step(q, labels[c2]):
                    out.append((c2, q2))
        return out

    starts = []
    for c0 in sorted(fsm.initial, key=repr):
        for q1 in buchi.step(buchi.initial, labels[c0]):
            starts.append((c0, q1))
    if not starts:
        raise SynthesisError("no automaton transition reads the initial cell's label")

    # BFS forest from the start nodes.
    parent: dict = {s: None for s in starts}
    order = list(starts)
    i = 0
    while i < len(order):
        node = order[i]
        i += 1
        for nxt in product_succ(node):
            if nxt not in parent:
                parent[nxt] = node
                order.append(nxt)

    reachable_accepting = [n for n in order if n[1] in buchi.accepting]
    if not reachable_accepting:
        raise SynthesisError(
            "no reachable accepting state in the product (unreachable accepting SCC)"
        )

    def path_from_parent(par: dict, end) -> list:
        path = [end]
        while par[path[-1]] is not None:
            path.append(par[path[-1]])
        return list(reversed(path))

    # Prefer simple cycles (no cell revisited, length >= 3): they command no
    # velocity reversal, which the tracking layer's speed guard excludes.
    for simple_only in (True, False):
        for acc in reachable_accepting:
            loop_nodes = _cycle_through(acc, product_succ, simple_only)
            if loop_nodes is None:
                continue
            stem = path_from_parent(parent, acc)
            cells = [n[0] for n in stem] + [n[0] for n in loop_nodes[1:]]
            return LassoPlan(tuple(cells), loop_start=len(stem) - 1)
    raise SynthesisError("accepting states reachable but none lies on a cycle")


def _cycle_through(acc, product_succ, simple_only: bool):
    """Shortest cycle acc -> ... -> acc, as the node list [acc, ..., last].

    With simple_only the search keeps cells pairwise distinct along the
    cycle and requires length >= 3, so the schedule never immediately
    backtracks (including across the wrap-around).
    """
    if simple_only:
        start = (acc, frozenset([acc[0]]))
        par: dict = {start: None}
        queue = [start]
        j = 0
        while j < len(queue):
            state = queue[j]
            j += 1
            node, visited = state
            for nxt in product_succ(node):
                if nxt == acc and len(visited) >= 3:
                    rev = [state]
                    while par[rev[-1]] is not None:
                        rev.append(par[rev[-1]])
                    return [s[0] for s in reversed(rev)]
                if nxt[0] in visited:
                    continue
                nstate = (nxt, visited | {nxt[0]})
                if nstate not in par:
                    par[nstate] = state
                    queue.append(nstate)
        return None
    par2: dict = {acc: None}
    queue = [acc]
    closing = None
    j = 0
    while j < len(queue) and closing is None:
        node = queue[j]
        j += 1
        for nxt in product_succ(node):
            if nxt == acc:
                closing = node
                break
            if nxt not in par2:
                par2[nxt] = node
                queue.append(nxt)
    if closing is None:
        return None
    rev = [closing]
    while par2[rev[-1]] is not None:
        rev.append(par2[rev[-1]])
    return list(reversed(rev))
