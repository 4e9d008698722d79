"""Hand-rolled SMILES reader for the organic subset plus bracket atoms.

Covers bare organic-subset atoms, aromatic lowercase atoms, bracket atoms
with isotope / chirality / hydrogen-count / charge fields, branches, ring
closures (including ``%nn``), dot-separated fragments, and the bond symbols
``- = # : / \\``. Stereo markers are consumed and dropped: none of the
downstream features read chirality.
"""

from __future__ import annotations

from .elements import (
    AROMATIC_SUBSET_SYMBOLS,
    ATOMIC_NUMBERS,
    DEFAULT_METALS,
    ORGANIC_ELEMENTS,
    ORGANIC_SUBSET_SYMBOLS,
)
from .errors import (
    EmptyInput,
    ParseError,
    UnbalancedParenthesis,
    UnknownElement,
    UnmatchedRingBond,
)
from .molgraph import Atom, Bond, MolecularGraph

_BOND_SYMBOLS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic",
                 "/": "single", "\\": "single"}


def write_smiles(g: MolecularGraph) -> str:
    """Serialize a graph back to SMILES (fragments joined by dots).

    Bracket atoms stay bracketed so hydrogen counts survive the round
    trip; bond symbols are emitted only where the SMILES defaults would
    read differently (single between aromatic atoms, aromatic between
    non-aromatic ones, and all double/triple bonds).
    """
    n = g.n_atoms
    adj: list[list[tuple[int, object]]] = [[] for _ in range(n)]
    for b in g.bonds:
        adj[b.i].append((b.j, b))
        adj[b.j].append((b.i, b))

    visited = [False] * n
    fragments = []
    for root in range(n):
        if not visited[root]:
            fragments.append(_write_fragment(g, adj, root, visited))
    return ".".join(fragments)


def _bond_symbol(g: MolecularGraph, bond) -> str:
    both_aromatic = g.atoms[bond.i].aromatic and g.atoms[bond.j].aromatic
    if bond.order == "single":
        return "-" if both_aromatic else ""
    if bond.order == "aromatic":
        return "" if both_aromatic else ":"
    return {"double": "=", "triple": "#"}[bond.order]


def _atom_token(atom) -> str:
    from .elements import symbol_for

    sym = symbol_for(atom.element)
    if atom.aromatic:
        sym = sym.lower()
    if atom.explicit_h is None and atom.formal_charge == 0:
        return sym
    h = atom.explicit_h or 0
    h_part = "" if h == 0 else ("H" if h == 1 else f"H{h}")
    c = atom.formal_charge
    if c == 0:
        c_part = ""
    else:
        sign = "+" if c > 0 else "-"
        c_part = sign if abs(c) == 1 else f"{sign}{abs(c)}"
    return f"[{sym}{h_part}{c_part}]"


def _ring_digit(num: int) -> str:
    if num < 10:
        return str(num)
    if num < 100:
        return f"%{num:02d}"
    raise ParseError(f"more than 99 ring closures ({num})")


def _write_fragment(g, adj, root: int, visited: list[bool]) -> str:
    # pass 1: spanning tree + back edges in DFS discovery order
    parent: dict[int, tuple[int, object]] = {}
    children: dict[int, list[tuple[int, object]]] = {root: []}
    closures: dict[int, list[tuple[str, object]]] = {}
    next_digit = [1]
    seen_edges = set()
    order = []
    stack = [root]
    visited[root] = True
    while stack:
        u = stack.pop()
        order.append(u)
        for v, b in adj[u]:
            if id(b) in seen_edges:
                continue
            if not visited[v]:
                seen_edges.add(id(b))
                visited[v] = True
                parent[v] = (u, b)
                children[u].append((v, b))
                children[v] = []
                stack.append(v)
            elif v in children:  # back edge inside this fragment
                seen_edges.add(id(b))
                digit = _ring_digit(next_digit[0])
                next_digit[0] += 1
                closures.setdefault(u, []).append((digit, b))
                closures.setdefault(v, []).append((digit, b))

    # pass 2: emit depth-first, branches in parentheses
    out: list[str] = []
    emit_stack: list[tuple[str, int | None, object | None]] = [("atom", root, None)]
    while emit_stack:
        kind, payload, bond = emit_stack.pop()
        if kind == "text":
            out.append(payload)
            continue
        u = payload
        if bond is not None:
            out.append(_bond_symbol(g, bond))
        out.append(_atom_token(g.atoms[u]))
        for digit, rb in closures.get(u, []):
            out.append(_bond_symbol(g, rb) + digit)
        kids = children[u]
        # last child continues the chain; earlier ones become branches
        for i in range(len(kids) - 1, -1, -1):
            v, vb = kids[i]
            if i < len(kids) - 1:
                emit_stack.append(("text", ")", None))
                emit_stack.append(("atom", v, vb))
                emit_stack.append(("text", "(", None))
            else:
                emit_stack.append(("atom", v, vb))
    return "".join(out)


def parse_smiles(text: str) -> MolecularGraph:
    """Parse one SMILES string into a molecular graph.

    The result may contain several fragments (dot-separated input) and
    explicit hydrogen atoms; ``ingest.preprocess`` reduces both.
    """
    if text is None or text.strip() == "":
        raise EmptyInput("empty SMILES string", position=0)
    return _Parser(text.strip()).run()


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.atoms: list[Atom] = []
        self.bonds: list[Bond] = []
        self.prev: int | None = None
        self.branch_stack: list[tuple[int | None, int]] = []
        self.pending_bond: str | None = None
        self.pending_pos = 0
        # ring number -> (atom index, bond symbol or None, open position)
        self.open_rings: dict[int, tuple[int, str | None, int]] = {}

    def run(self) -> MolecularGraph:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in _BOND_SYMBOLS:
                if self.pending_bond is not None:
                    raise ParseError("two bond symbols in a row", self.pos)
                self.pending_bond = _BOND_SYMBOLS[ch]
                self.pending_pos = self.pos
                self.pos += 1
            elif ch == "(":
                self.branch_stack.append((self.prev, self.pos))
                self.pos += 1
            elif ch == ")":
                if not self.branch_stack:
                    raise UnbalancedParenthesis("')' without matching '('", self.pos)
                if self.pending_bond is not None:
                    raise ParseError("dangling bond before ')'", self.pending_pos)
                self.prev, _ = self.branch_stack.pop()
                self.pos += 1
            elif ch == ".":
                if self.pending_bond is not None:
                    raise ParseError("bond symbol before '.'", self.pending_pos)
                self.prev = None
                self.pos += 1
            elif ch.isdigit() or ch == "%":
                self.ring_closure()
            elif ch == "[":
                self.bracket_atom()
            else:
                self.organic_atom()

        if self.pending_bond is not None:
            raise ParseError("dangling bond at end of input", self.pending_pos)
        if self.branch_stack:
            raise UnbalancedParenthesis("unclosed '('", self.branch_stack[-1][1])
        if self.open_rings:
            num, (_, _, where) = next(iter(self.open_rings.items()))
            raise UnmatchedRingBond(f"ring bond {num} never closed", where)
        try:
            return MolecularGraph(atoms=self.atoms, bonds=self.bonds).finalize()
        except ValueError as exc:
            raise ParseError(str(exc), self.pos) from exc

    # -- atoms ---------------------------------------------------------------

    def add_atom(self, atom: Atom) -> None:
        idx = len(self.atoms)
        self.atoms.append(atom)
        if self.prev is None and self.pending_bond is not None:
            raise ParseError("bond symbol with no preceding atom",
                             self.pending_pos)
        if self.prev is not None:
            order = self.pending_bond
            if order is None:
                both_aromatic = self.atoms[self.prev].aromatic and atom.aromatic
                order = "aromatic" if both_aromatic else "single"
            self.bonds.append(Bond(self.prev, idx, order))
        self.pending_bond = None
        self.prev = idx

    def organic_atom(self) -> None:
        start = self.pos
        for sym in ORGANIC_SUBSET_SYMBOLS:  # two-char symbols listed first
            if self.text.startswith(sym, start):
                self.pos += len(sym)
                self.add_atom(Atom(element=ATOMIC_NUMBERS[sym]))
                return
        for sym in AROMATIC_SUBSET_SYMBOLS:
            if len(sym) == 1 and self.text.startswith(sym, start):
                self.pos += 1
                self.add_atom(Atom(element=ATOMIC_NUMBERS[sym.capitalize()],
                                   aromatic=True))
                return
        raise UnknownElement(
            f"unrecognized symbol {self.text[start]!r}", start)

    def bracket_atom(self) -> None:
        start = self.pos
        self.pos += 1  # consume '['
        self._digits()  # isotope, ignored

        sym_start = self.pos
        element, aromatic = self._bracket_symbol()

        while self.pos < len(self.text) and self.text[self.pos] == "@":
            self.pos += 1  # chirality, ignored

        hcount = 0
        if self.pos < len(self.text) and self.text[self.pos] == "H":
            self.pos += 1
            digits = self._digits()
            hcount = int(digits) if digits else 1

        charge = 0
        if self.pos < len(self.text) and self.text[self.pos] in "+-":
            sign = 1 if self.text[self.pos] == "+" else -1
            symbol = self.text[self.pos]
            self.pos += 1
            digits = self._digits()
            if digits:
                charge = sign * int(digits)
            else:
                charge = sign
                while self.pos < len(self.text) and self.text[self.pos] == symbol:
                    charge += sign
                    self.pos += 1

        if self.pos < len(self.text) and self.text[self.pos] == ":":
            self.pos += 1
            self._digits()  # atom class, ignored

        if self.pos >= len(self.text) or self.text[self.pos] != "]":
            raise ParseError("bracket atom not closed with ']'", start)
        self.pos += 1

        if element not in ORGANIC_ELEMENTS and element not in DEFAULT_METALS:
            raise UnknownElement(f"unsupported element in brackets", sym_start)
        self.add_atom(Atom(element=element, formal_charge=charge,
                           aromatic=aromatic, explicit_h=hcount))

    def _bracket_symbol(self) -> tuple[int, bool]:
        t, i = self.text, self.pos
        if i >= len(t):
            raise ParseError("truncated bracket atom", i)
        if t[i] == "*":
            raise UnknownElement("wildcard atom not supported", i)
        for sym in sorted(AROMATIC_SUBSET_SYMBOLS, key=len, reverse=True):
            if t.startswith(sym, i):
                self.pos += len(sym)
                return ATOMIC_NUMBERS[sym.capitalize()], True
        if t[i].isupper():
            two = t[i:i + 2]
            if len(two) == 2 and two[1].islower() and two in ATOMIC_NUMBERS:
                self.pos += 2
                return ATOMIC_NUMBERS[two], False
            if t[i] in ATOMIC_NUMBERS:
                self.pos += 1
                return ATOMIC_NUMBERS[t[i]], False
        raise UnknownElement(f"unknown element symbol at {t[i:i + 2]!r}", i)

    def _digits(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        return self.text[start:self.pos]

    # -- ring closures ---------------------------------------------------------

    def ring_closure(self) -> None:
        where = self.pos
        if self.text[self.pos] == "%":
            if self.pos + 2 >= len(self.text) or not self.text[
                self.pos + 1:self.pos + 3].isdigit():
                raise UnmatchedRingBond("'%' needs two digits", where)
            num = int(self.text[self.pos + 1:self.pos + 3])
            self.pos += 3
        else:
            num = int(self.text[self.pos])
            self.pos += 1

        if self.prev is None:
            raise UnmatchedRingBond("ring digit before any atom", where)

        symbol = self.pending_bond
        self.pending_bond = None

        if num not in self.open_rings:
            self.open_rings[num] = (self.prev, symbol, where)
            return

        other, other_symbol, _ = self.open_rings.pop(num)
        if other == self.prev:
            raise UnmatchedRingBond(f"ring bond {num} closes on its own atom", where)
        if symbol is not None and other_symbol is not None and symbol != other_symbol:
            raise UnmatchedRingBond(
                f"conflicting bond orders on ring closure {num}", where)
        order = symbol or other_symbol
        if order is None:
            both_aromatic = (self.atoms[other].aromatic
                             and self.atoms[self.prev].aromatic)
            order = "aromatic" if both_aromatic else "single"
        if any({b.i, b.j} == {other, self.prev} for b in self.bonds):
            raise UnmatchedRingBond(
                f"ring closure {num} duplicates an existing bond", where)
        self.bonds.append(Bond(other, self.prev, order))
