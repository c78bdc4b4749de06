"""Line-based EL axiom format: expression trees, parsing, canonical printing.

One axiom per line, ``#`` starts a comment, blank lines are ignored::

    axiom   := subClassOf(concept, concept)
             | equivalentClasses(concept, concept)
             | disjointWith(concept, concept)
    concept := NAME | top | bottom | nominal(NAME)
             | and(concept, concept) | some(NAME, concept)

NAME is a run of characters excluding whitespace, parentheses, commas and
``#``.  Whitespace between tokens is not significant.  ``top`` and ``bottom``
are reserved: they always parse to the distinguished variants, never to a
named class.  ``disjointWith(C,D)`` is sugar for
``subClassOf(and(C,D),bottom)`` and is desugared while parsing, so the
in-memory representation has a single canonical form for disjointness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

DEFAULT_MAX_DEPTH = 64

_FORBIDDEN_IN_NAMES = set("(),#")
_RESERVED = ("top", "bottom")


class ParseError(Exception):
    """Syntax or nesting error, with 1-based line/column of the offence."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


def _check_name(name: str, what: str) -> None:
    if not name:
        raise ValueError(f"{what} must be non-empty")
    if any(ch.isspace() or ch in _FORBIDDEN_IN_NAMES for ch in name):
        raise ValueError(f"{what} {name!r} contains whitespace, parens, comma or '#'")


@dataclass(frozen=True, slots=True)
class Atomic:
    name: str

    def __post_init__(self):
        _check_name(self.name, "class name")
        if self.name in _RESERVED:
            raise ValueError(f"{self.name!r} is reserved and cannot name a class")


@dataclass(frozen=True, slots=True)
class Top:
    pass


@dataclass(frozen=True, slots=True)
class Bottom:
    pass


@dataclass(frozen=True, slots=True)
class Nominal:
    individual: str

    def __post_init__(self):
        _check_name(self.individual, "individual name")


@dataclass(frozen=True, slots=True)
class Intersection:
    left: "Concept"
    right: "Concept"


@dataclass(frozen=True, slots=True)
class Existential:
    role: str
    filler: "Concept"

    def __post_init__(self):
        _check_name(self.role, "role name")


Concept = Union[Atomic, Top, Bottom, Nominal, Intersection, Existential]

TOP = Top()
BOTTOM = Bottom()


@dataclass(frozen=True, slots=True)
class SubClassOf:
    sub: Concept
    sup: Concept


@dataclass(frozen=True, slots=True)
class EquivalentClasses:
    a: Concept
    b: Concept


RawAxiom = Union[SubClassOf, EquivalentClasses]


@dataclass(frozen=True, slots=True)
class OntologyStats:
    axiom_count: int
    class_count: int
    relation_count: int
    individual_count: int


def concept_to_text(c: Concept) -> str:
    """Canonical printing: no spaces, reparses to an equal tree."""
    if isinstance(c, Atomic):
        return c.name
    if isinstance(c, Top):
        return "top"
    if isinstance(c, Bottom):
        return "bottom"
    if isinstance(c, Nominal):
        return f"nominal({c.individual})"
    if isinstance(c, Intersection):
        return f"and({concept_to_text(c.left)},{concept_to_text(c.right)})"
    if isinstance(c, Existential):
        return f"some({c.role},{concept_to_text(c.filler)})"
    raise TypeError(f"not a concept: {c!r}")


def axiom_to_text(ax: RawAxiom) -> str:
    if isinstance(ax, SubClassOf):
        return f"subClassOf({concept_to_text(ax.sub)},{concept_to_text(ax.sup)})"
    if isinstance(ax, EquivalentClasses):
        return f"equivalentClasses({concept_to_text(ax.a)},{concept_to_text(ax.b)})"
    raise TypeError(f"not an axiom: {ax!r}")


def concept_size(c: Concept) -> int:
    """Number of nodes in the expression tree."""
    if isinstance(c, Intersection):
        return 1 + concept_size(c.left) + concept_size(c.right)
    if isinstance(c, Existential):
        return 1 + concept_size(c.filler)
    return 1


class _Cursor:
    """Single-line token cursor with column tracking."""

    def __init__(self, text: str, line: int, max_depth: int):
        self.text = text
        self.pos = 0
        self.line = line
        self.max_depth = max_depth

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.line, self.pos + 1)

    def _skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        got = self.peek()
        if got != ch:
            shown = repr(got) if got else "end of line"
            raise self.error(f"expected {ch!r}, found {shown}")
        self.pos += 1

    def name(self) -> str:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch.isspace() or ch in _FORBIDDEN_IN_NAMES:
                break
            self.pos += 1
        if self.pos == start:
            got = self.text[start] if start < len(self.text) else ""
            shown = repr(got) if got else "end of line"
            raise self.error(f"expected a name, found {shown}")
        return self.text[start:self.pos]

    def at_end(self) -> bool:
        self._skip_ws()
        return self.pos >= len(self.text)

    def concept(self, depth: int = 0) -> Concept:
        if depth >= self.max_depth:
            raise self.error(f"nesting deeper than the limit of {self.max_depth}")
        tok = self.name()
        if tok == "top":
            return TOP
        if tok == "bottom":
            return BOTTOM
        # Keyword heads are only special when a '(' follows; otherwise they
        # are ordinary names.
        if self.peek() == "(" and tok in ("and", "some", "nominal"):
            self.expect("(")
            if tok == "nominal":
                individual = self.name()
                self.expect(")")
                return Nominal(individual)
            if tok == "some":
                role = self.name()
                self.expect(",")
                filler = self.concept(depth + 1)
                self.expect(")")
                return Existential(role, filler)
            left = self.concept(depth + 1)
            self.expect(",")
            right = self.concept(depth + 1)
            self.expect(")")
            return Intersection(left, right)
        return Atomic(tok)

    def axiom(self) -> RawAxiom:
        head = self.name()
        if head not in ("subClassOf", "equivalentClasses", "disjointWith"):
            raise self.error(
                f"expected subClassOf, equivalentClasses or disjointWith, found {head!r}"
            )
        self.expect("(")
        first = self.concept(1)
        self.expect(",")
        second = self.concept(1)
        self.expect(")")
        if head == "subClassOf":
            return SubClassOf(first, second)
        if head == "equivalentClasses":
            return EquivalentClasses(first, second)
        return SubClassOf(Intersection(first, second), BOTTOM)


def parse_concept(text: str, max_depth: int = DEFAULT_MAX_DEPTH, line: int = 1) -> Concept:
    cur = _Cursor(text, line, max_depth)
    c = cur.concept()
    if not cur.at_end():
        raise cur.error(f"trailing input {cur.text[cur.pos:].strip()!r}")
    return c


def parse_axiom(text: str, max_depth: int = DEFAULT_MAX_DEPTH, line: int = 1) -> RawAxiom:
    cur = _Cursor(text, line, max_depth)
    ax = cur.axiom()
    if not cur.at_end():
        raise cur.error(f"trailing input {cur.text[cur.pos:].strip()!r}")
    return ax


def _collect_names(c: Concept, classes: set, relations: set, individuals: set) -> None:
    if isinstance(c, Atomic):
        classes.add(c.name)
    elif isinstance(c, Nominal):
        individuals.add(c.individual)
    elif isinstance(c, Intersection):
        _collect_names(c.left, classes, relations, individuals)
        _collect_names(c.right, classes, relations, individuals)
    elif isinstance(c, Existential):
        relations.add(c.role)
        _collect_names(c.filler, classes, relations, individuals)


def compute_stats(axioms: list) -> OntologyStats:
    classes: set = set()
    relations: set = set()
    individuals: set = set()
    for ax in axioms:
        pair = (ax.sub, ax.sup) if isinstance(ax, SubClassOf) else (ax.a, ax.b)
        for c in pair:
            _collect_names(c, classes, relations, individuals)
    return OntologyStats(
        axiom_count=len(axioms),
        class_count=len(classes),
        relation_count=len(relations),
        individual_count=len(individuals),
    )


def parse_ontology(
    lines: Iterable[str], max_depth: int = DEFAULT_MAX_DEPTH
) -> tuple[list[RawAxiom], OntologyStats]:
    """Parse a whole axiom file; the first syntax error aborts the run.

    Returns axioms in file order plus counts of distinct classes, relations
    and individuals seen anywhere in them.
    """
    axioms: list[RawAxiom] = []
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        axioms.append(parse_axiom(stripped, max_depth=max_depth, line=lineno))
    return axioms, compute_stats(axioms)
