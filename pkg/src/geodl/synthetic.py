"""Bundled synthetic ontologies for experiments and stress tests.

Two generators:

* ``hub_spoke_lines`` - one source class linked through a single relation to
  several pairwise-disjoint targets.  The disjointness forces the targets
  apart, so a single translation vector cannot reach all of them; this is the
  canonical many-to-many stress case.

* ``surrogate_lines`` - a connected ~2000-class subclass hierarchy with a
  handful of relations used in hub patterns (few sources, shared target
  pools), standing in for a large biomedical ontology when none is bundled.
"""

from __future__ import annotations

import numpy as np


def hub_spoke_lines(n_targets: int = 8, relation: str = "linksTo") -> list[str]:
    """Hub <= some R. Ti for each target, plus pairwise disjoint targets."""
    targets = [f"T{i}" for i in range(1, n_targets + 1)]
    lines = [f"subClassOf(Hub,some({relation},{t}))" for t in targets]
    for i in range(n_targets):
        for j in range(i + 1, n_targets):
            lines.append(f"disjointWith({targets[i]},{targets[j]})")
    return lines


def surrogate_lines(
    n_classes: int = 2000,
    n_relations: int = 10,
    seed: int = 0,
    max_shortcuts: int = 2,
    role_probability: float = 0.8,
    target_pool_size: int = 25,
    n_disjoint: int = 80,
    n_complex: int = 40,
) -> list[str]:
    """Seeded surrogate ontology: an ancestor-redundant subclass DAG plus
    hub-shaped role axioms.

    Each class gets a tree parent (keeping the graph connected) and up to
    ``max_shortcuts`` extra subclass edges to strict ancestors, so held-out
    subclass pairs usually stay derivable from surviving chains, as in real
    biomedical hierarchies.  Most classes also get one existential role edge
    into a small per-relation target pool, giving every relation the
    many-target pressure that separates the variance-aware variant from the
    base model.  No axiom line is emitted twice.
    """
    rng = np.random.default_rng(seed)
    names = [f"c{i:04d}" for i in range(n_classes)]
    parent = [0] * n_classes
    subclass_pairs = set()
    lines = []

    def add_subclass(child: int, sup: int) -> None:
        if (child, sup) not in subclass_pairs:
            subclass_pairs.add((child, sup))
            lines.append(f"subClassOf({names[child]},{names[sup]})")

    for i in range(1, n_classes):
        parent[i] = int(rng.integers(0, i))
        add_subclass(i, parent[i])
    for i in range(1, n_classes):
        ancestors = []
        j = parent[i]
        while j != 0:
            ancestors.append(j)
            j = parent[j]
        ancestors.append(0)
        beyond_parent = ancestors[1:]
        if not beyond_parent:
            continue
        k = min(len(beyond_parent), int(rng.integers(1, max_shortcuts + 1)))
        picks = rng.choice(len(beyond_parent), size=k, replace=False)
        for p in picks:
            add_subclass(i, beyond_parent[int(p)])

    pools = [
        rng.choice(n_classes, size=target_pool_size, replace=False)
        for _ in range(n_relations)
    ]
    for i in range(n_classes):
        if rng.random() < role_probability:
            k = int(rng.integers(0, n_relations))
            t = int(pools[k][int(rng.integers(0, target_pool_size))])
            if t != i:
                lines.append(f"subClassOf({names[i]},some(role{k},{names[t]}))")
    for _ in range(n_disjoint):
        a, b = (int(x) for x in rng.choice(n_classes, size=2, replace=False))
        lines.append(f"disjointWith({names[a]},{names[b]})")
    for _ in range(n_complex):
        a, b, c = (int(x) for x in rng.choice(n_classes, size=3, replace=False))
        rel = f"role{int(rng.integers(0, n_relations))}"
        shape = int(rng.integers(0, 3))
        if shape == 0:
            lines.append(f"subClassOf(and({names[a]},{names[b]}),{names[c]})")
        elif shape == 1:
            lines.append(
                f"subClassOf({names[a]},and({names[b]},some({rel},{names[c]})))"
            )
        else:
            lines.append(f"subClassOf(some({rel},{names[a]}),{names[b]})")
    return lines


def random_raw_lines(
    rng: np.random.Generator,
    n_axioms: int = 60,
    n_names: int = 20,
    n_roles: int = 4,
    n_individuals: int = 4,
    max_depth: int = 3,
) -> list[str]:
    """Random well-formed axiom lines covering every grammar production."""
    names = [f"A{i}" for i in range(n_names)]
    roles = [f"r{i}" for i in range(n_roles)]
    individuals = [f"ind{i}" for i in range(n_individuals)]

    def concept(depth: int) -> str:
        choices = ["atomic", "atomic", "atomic", "top", "bottom", "nominal"]
        if depth < max_depth:
            choices += ["and", "and", "some", "some"]
        kind = choices[int(rng.integers(0, len(choices)))]
        if kind == "atomic":
            return names[int(rng.integers(0, n_names))]
        if kind == "top":
            return "top"
        if kind == "bottom":
            return "bottom"
        if kind == "nominal":
            return f"nominal({individuals[int(rng.integers(0, n_individuals))]})"
        if kind == "and":
            return f"and({concept(depth + 1)},{concept(depth + 1)})"
        role = roles[int(rng.integers(0, n_roles))]
        return f"some({role},{concept(depth + 1)})"

    lines = []
    for _ in range(n_axioms):
        head = ("subClassOf", "subClassOf", "subClassOf",
                "equivalentClasses", "disjointWith")[int(rng.integers(0, 5))]
        lines.append(f"{head}({concept(1)},{concept(1)})")
    return lines
