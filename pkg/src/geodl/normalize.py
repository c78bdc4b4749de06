"""Flatten parsed axioms into normal forms over atomic class/relation ids.

Every axiom is rewritten into one of six shapes, introducing fresh helper
classes (``__nf_<k>``) for complex sub-expressions:

    NF1(c, d)        C <= D
    NF2(c, d, e)     C and D <= E
    NF3(c, r, d)     C <= some R. D
    NF4(r, c, d)     some R. C <= D
    Disjoint(c, d)   C and D <= nothing
    BottomSub(c)     C <= nothing

``top`` becomes an ordinary class id; nominals become classes flagged
``is_nominal`` (their table name is the canonical ``nominal(x)`` text, so
round-tripping through the axiom format keeps the flag).  Identical complex
sub-expressions share one fresh class, memoized by canonical text.
Tautologies with an empty left-hand side are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .parser import (
    Atomic,
    Bottom,
    Concept,
    EquivalentClasses,
    Existential,
    Intersection,
    Nominal,
    RawAxiom,
    SubClassOf,
    Top,
    concept_to_text,
)

FRESH_PREFIX = "__nf_"


@dataclass(frozen=True, slots=True)
class NF1:
    c: int
    d: int


@dataclass(frozen=True, slots=True)
class NF2:
    c: int
    d: int
    e: int


@dataclass(frozen=True, slots=True)
class NF3:
    c: int
    r: int
    d: int


@dataclass(frozen=True, slots=True)
class NF4:
    r: int
    c: int
    d: int


@dataclass(frozen=True, slots=True)
class Disjoint:
    c: int
    d: int


@dataclass(frozen=True, slots=True)
class BottomSub:
    c: int


NormalAxiom = Union[NF1, NF2, NF3, NF4, Disjoint, BottomSub]


@dataclass(frozen=True, slots=True)
class ClassInfo:
    name: str
    is_fresh: bool = False
    is_nominal: bool = False


@dataclass(frozen=True, slots=True)
class RelationInfo:
    name: str


@dataclass
class NormalizedOntology:
    axioms: list[NormalAxiom]
    classes: list[ClassInfo]
    relations: list[RelationInfo]
    class_index: dict[str, int] = field(default_factory=dict)
    relation_index: dict[str, int] = field(default_factory=dict)
    # fresh class name -> canonical text of the sub-expression it stands for
    fresh_definitions: dict[str, str] = field(default_factory=dict)

    def class_name(self, c: int) -> str:
        return self.classes[c].name

    def relation_name(self, r: int) -> str:
        return self.relations[r].name

    @property
    def fresh_count(self) -> int:
        return sum(1 for info in self.classes if info.is_fresh)


def _is_basic(c: Concept) -> bool:
    return isinstance(c, (Atomic, Top, Nominal))


class _Normalizer:
    def __init__(self):
        self.classes: list[ClassInfo] = []
        self.relations: list[RelationInfo] = []
        self.class_index: dict[str, int] = {}
        self.relation_index: dict[str, int] = {}
        self.fresh_definitions: dict[str, str] = {}
        self.out: list[NormalAxiom] = []
        self._fresh_counter = 0
        # (canonical text, side) pairs whose defining axioms were emitted;
        # side is "left" for expr <= A, "right" for A <= expr
        self._defined: set[tuple[str, str]] = set()

    def class_id(self, c: Concept) -> int:
        key = concept_to_text(c)
        idx = self.class_index.get(key)
        if idx is None:
            idx = len(self.classes)
            self.class_index[key] = idx
            self.classes.append(
                ClassInfo(
                    name=key,
                    is_fresh=key.startswith(FRESH_PREFIX),
                    is_nominal=isinstance(c, Nominal),
                )
            )
        return idx

    def relation_id(self, name: str) -> int:
        idx = self.relation_index.get(name)
        if idx is None:
            idx = len(self.relations)
            self.relation_index[name] = idx
            self.relations.append(RelationInfo(name))
        return idx

    def _register_concept(self, c: Concept) -> None:
        if _is_basic(c):
            self.class_id(c)
        elif isinstance(c, Intersection):
            self._register_concept(c.left)
            self._register_concept(c.right)
        elif isinstance(c, Existential):
            self.relation_id(c.role)
            self._register_concept(c.filler)

    def _fresh_for(self, expr: Concept, side: str) -> Atomic:
        """Fresh class standing for *expr*, defining axioms emitted once per side."""
        key = concept_to_text(expr)
        idx = self.class_index.get(key)
        if idx is None:
            name = f"{FRESH_PREFIX}{self._fresh_counter}"
            self._fresh_counter += 1
            while name in self.class_index:  # input may reuse the prefix
                name = f"{FRESH_PREFIX}{self._fresh_counter}"
                self._fresh_counter += 1
            idx = len(self.classes)
            self.class_index[key] = idx
            self.classes.append(ClassInfo(name=name, is_fresh=True))
            self.fresh_definitions[name] = key
        ref = Atomic(self.classes[idx].name)
        # Re-register under the fresh name too so references resolve.
        self.class_index.setdefault(ref.name, idx)
        if (key, side) not in self._defined:
            self._defined.add((key, side))
            if side == "left":
                self._norm(expr, ref)
            else:
                self._norm(ref, expr)
        return ref

    def _norm(self, sub: Concept, sup: Concept) -> None:
        # Conjunction on the right splits into independent axioms.
        if isinstance(sup, Intersection):
            self._norm(sub, sup.left)
            self._norm(sub, sup.right)
            return
        if _is_basic(sub) or isinstance(sub, Bottom):
            self._norm_basic_left(sub, sup)
        else:
            self._norm_complex_left(sub, sup)

    def _norm_basic_left(self, sub: Concept, sup: Concept) -> None:
        if isinstance(sub, Bottom):
            return  # nothing <= X holds vacuously
        c = self.class_id(sub)
        if isinstance(sup, Bottom):
            self.out.append(BottomSub(c))
        elif _is_basic(sup):
            self.out.append(NF1(c, self.class_id(sup)))
        elif isinstance(sup, Existential):
            r = self.relation_id(sup.role)
            filler = sup.filler
            if isinstance(filler, Bottom):
                # some R. nothing is empty, so the axiom collapses
                self.out.append(BottomSub(c))
                return
            if not _is_basic(filler):
                filler = self._fresh_for(filler, side="right")
            self.out.append(NF3(c, r, self.class_id(filler)))
        else:  # pragma: no cover - Intersection handled by caller
            raise AssertionError("conjunction on the right must be split first")

    def _norm_complex_left(self, sub: Concept, sup: Concept) -> None:
        if not (_is_basic(sup) or isinstance(sup, Bottom)):
            # Both sides complex: route through a fresh middle class.
            mid = self._fresh_for(sub, side="left")
            self._norm(mid, sup)
            return
        if isinstance(sub, Intersection):
            conjuncts = []
            for part in (sub.left, sub.right):
                if isinstance(part, Bottom):
                    return  # the left side is empty; the axiom is vacuous
                if not _is_basic(part):
                    part = self._fresh_for(part, side="left")
                conjuncts.append(self.class_id(part))
            c, d = conjuncts
            if isinstance(sup, Bottom):
                self.out.append(Disjoint(c, d))
            else:
                self.out.append(NF2(c, d, self.class_id(sup)))
            return
        # sub is an existential
        assert isinstance(sub, Existential)
        filler = sub.filler
        if isinstance(filler, Bottom):
            return  # some R. nothing is empty; the axiom is vacuous
        if not _is_basic(filler):
            filler = self._fresh_for(filler, side="left")
        r = self.relation_id(sub.role)
        f = self.class_id(filler)
        if isinstance(sup, Bottom):
            # some R. F <= nothing, folded through a fresh name so the
            # bottom form stays unary
            helper = self._fresh_for(sub, side="left")
            self.out.append(BottomSub(self.class_id(helper)))
        else:
            self.out.append(NF4(r, f, self.class_id(sup)))


def normalize(axioms: list[RawAxiom]) -> NormalizedOntology:
    """Rewrite raw axioms into normal forms; total for any parsed input."""
    norm = _Normalizer()
    # Register every original name first so dropped tautologies still leave
    # their classes and relations in the tables.
    for ax in axioms:
        pair = (ax.sub, ax.sup) if isinstance(ax, SubClassOf) else (ax.a, ax.b)
        for side in pair:
            norm._register_concept(side)
    for ax in axioms:
        if isinstance(ax, EquivalentClasses):
            norm._norm(ax.a, ax.b)
            norm._norm(ax.b, ax.a)
        else:
            norm._norm(ax.sub, ax.sup)
    return NormalizedOntology(
        axioms=norm.out,
        classes=norm.classes,
        relations=norm.relations,
        class_index=norm.class_index,
        relation_index=norm.relation_index,
        fresh_definitions=norm.fresh_definitions,
    )


def _valid_id(x, limit: int) -> bool:
    return type(x) is int and 0 <= x < limit


def verify_normal(onto: NormalizedOntology) -> bool:
    """Self-check: every axiom is one of the six shapes over table-backed ids."""
    nc = len(onto.classes)
    nr = len(onto.relations)
    for ax in onto.axioms:
        if isinstance(ax, NF1):
            ok = _valid_id(ax.c, nc) and _valid_id(ax.d, nc)
        elif isinstance(ax, NF2):
            ok = _valid_id(ax.c, nc) and _valid_id(ax.d, nc) and _valid_id(ax.e, nc)
        elif isinstance(ax, NF3):
            ok = _valid_id(ax.c, nc) and _valid_id(ax.r, nr) and _valid_id(ax.d, nc)
        elif isinstance(ax, NF4):
            ok = _valid_id(ax.r, nr) and _valid_id(ax.c, nc) and _valid_id(ax.d, nc)
        elif isinstance(ax, Disjoint):
            ok = _valid_id(ax.c, nc) and _valid_id(ax.d, nc)
        elif isinstance(ax, BottomSub):
            ok = _valid_id(ax.c, nc)
        else:
            ok = False
        if not ok:
            return False
    return True


def normal_axiom_to_text(ax: NormalAxiom, onto: NormalizedOntology) -> str:
    """Print a normal axiom back into the line-based grammar."""
    cn = onto.class_name
    rn = onto.relation_name
    if isinstance(ax, NF1):
        return f"subClassOf({cn(ax.c)},{cn(ax.d)})"
    if isinstance(ax, NF2):
        return f"subClassOf(and({cn(ax.c)},{cn(ax.d)}),{cn(ax.e)})"
    if isinstance(ax, NF3):
        return f"subClassOf({cn(ax.c)},some({rn(ax.r)},{cn(ax.d)}))"
    if isinstance(ax, NF4):
        return f"subClassOf(some({rn(ax.r)},{cn(ax.c)}),{cn(ax.d)})"
    if isinstance(ax, Disjoint):
        return f"disjointWith({cn(ax.c)},{cn(ax.d)})"
    if isinstance(ax, BottomSub):
        return f"subClassOf({cn(ax.c)},bottom)"
    raise TypeError(f"not a normal axiom: {ax!r}")
