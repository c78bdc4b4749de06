"""Ball embeddings: parameters, loss terms, analytic gradients, persistence.

Each class is an n-ball (center vector + radius), each relation a translation
vector; in the variance-extended variant every relation also carries a scalar
slack that widens the admissible region after translation, so one relation can
reach many targets.  Radii and slacks are stored as raw reals whose effective
value is the absolute value, which keeps them non-negative without projection.

Loss terms are hinges on ball containment/overlap plus a soft unit-sphere
penalty P(x) = | ||center(x)|| - 1 | on every class mentioned.  Components are
summed in a fixed order (hinges, then penalties in argument order, then the
slack regularizer) so results are bit-reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

CLASS_CENTER = "class_center"
CLASS_RADIUS = "class_radius"
RELATION_VECTOR = "relation_vector"
RELATION_SIGMA = "relation_sigma"


class Variant(enum.Enum):
    EMEL = "EmEl"
    EMEL_VAR = "EmElVar"


def parse_variant(text: str) -> Variant:
    key = text.strip().lower().replace("_", "-")
    if key in ("emel", "base"):
        return Variant.EMEL
    if key in ("emel-var", "emelvar", "var"):
        return Variant.EMEL_VAR
    raise ValueError(f"unknown variant {text!r} (expected emel or emel-var)")


@dataclass
class EmbeddingState:
    class_centers: np.ndarray  # [num_classes, dim]
    class_radii_raw: np.ndarray  # [num_classes]
    relation_vectors: np.ndarray  # [num_relations, dim]
    relation_sigmas_raw: np.ndarray  # [num_relations]

    @property
    def dim(self) -> int:
        return self.class_centers.shape[1]

    @property
    def num_classes(self) -> int:
        return self.class_centers.shape[0]

    @property
    def num_relations(self) -> int:
        return self.relation_vectors.shape[0]

    def radius(self, c: int) -> float:
        return abs(float(self.class_radii_raw[c]))

    def sigma(self, r: int) -> float:
        return abs(float(self.relation_sigmas_raw[r]))

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(
            self.class_centers.copy(),
            self.class_radii_raw.copy(),
            self.relation_vectors.copy(),
            self.relation_sigmas_raw.copy(),
        )

    def all_finite(self) -> bool:
        return bool(
            np.isfinite(self.class_centers).all()
            and np.isfinite(self.class_radii_raw).all()
            and np.isfinite(self.relation_vectors).all()
            and np.isfinite(self.relation_sigmas_raw).all()
        )

    @staticmethod
    def initialize(
        num_classes: int, num_relations: int, dim: int, rng: np.random.Generator
    ) -> "EmbeddingState":
        """Centers uniform in [-1,1]^n scaled onto the unit sphere; radii 0.1;
        relation vectors uniform in [-0.5,0.5]^n; raw slacks 0.01."""
        centers = rng.uniform(-1.0, 1.0, size=(num_classes, dim))
        norms = np.linalg.norm(centers, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        centers /= norms
        radii = np.full(num_classes, 0.1)
        rel = rng.uniform(-0.5, 0.5, size=(num_relations, dim))
        sigmas = np.full(num_relations, 0.01)
        return EmbeddingState(centers, radii, rel, sigmas)


@dataclass
class GradientAccumulator:
    class_centers: np.ndarray
    class_radii_raw: np.ndarray
    relation_vectors: np.ndarray
    relation_sigmas_raw: np.ndarray

    @staticmethod
    def zeros_like(state: EmbeddingState) -> "GradientAccumulator":
        return GradientAccumulator(
            np.zeros_like(state.class_centers),
            np.zeros_like(state.class_radii_raw),
            np.zeros_like(state.relation_vectors),
            np.zeros_like(state.relation_sigmas_raw),
        )

    def add(self, other: "GradientAccumulator") -> None:
        self.class_centers += other.class_centers
        self.class_radii_raw += other.class_radii_raw
        self.relation_vectors += other.relation_vectors
        self.relation_sigmas_raw += other.relation_sigmas_raw

    def scale(self, factor: float) -> None:
        self.class_centers *= factor
        self.class_radii_raw *= factor
        self.relation_vectors *= factor
        self.relation_sigmas_raw *= factor


@dataclass
class LossTerm:
    """One loss term: non-negative value, its hinge component, and gradients
    keyed by (parameter block, row index)."""

    value: float
    hinge: float
    grads: dict


def _unit_penalty(centers: np.ndarray):
    """P = | ||x|| - 1 | per row, with its gradient rows."""
    norms = np.linalg.norm(centers, axis=1)
    values = np.abs(norms - 1.0)
    direction = np.zeros_like(centers)
    np.divide(centers, norms[:, None], out=direction, where=norms[:, None] > 0.0)
    grads = np.sign(norms - 1.0)[:, None] * direction
    return values, grads


def _safe_unit(vectors: np.ndarray, norms: np.ndarray) -> np.ndarray:
    out = np.zeros_like(vectors)
    np.divide(vectors, norms[:, None], out=out, where=norms[:, None] > 0.0)
    return out


def nf1_batch(
    state: EmbeddingState,
    C: np.ndarray,
    D: np.ndarray,
    gamma: float,
    acc: Optional[GradientAccumulator] = None,
):
    """C <= D: the C-ball must sit inside the D-ball."""
    fc = state.class_centers[C]
    fd = state.class_centers[D]
    raw_rc = state.class_radii_raw[C]
    raw_rd = state.class_radii_raw[D]
    u = fc - fd
    dist = np.linalg.norm(u, axis=1)
    h = dist + np.abs(raw_rc) - np.abs(raw_rd) - gamma
    hinge = np.maximum(h, 0.0)
    pc, pc_grad = _unit_penalty(fc)
    pd, pd_grad = _unit_penalty(fd)
    values = hinge + pc + pd
    if acc is not None:
        active = (h > 0.0).astype(float)
        uhat = _safe_unit(u, dist)
        np.add.at(acc.class_centers, C, active[:, None] * uhat + pc_grad)
        np.add.at(acc.class_centers, D, -active[:, None] * uhat + pd_grad)
        np.add.at(acc.class_radii_raw, C, active * np.sign(raw_rc))
        np.add.at(acc.class_radii_raw, D, -active * np.sign(raw_rd))
    return values, hinge


def nf2_batch(
    state: EmbeddingState,
    C: np.ndarray,
    D: np.ndarray,
    E: np.ndarray,
    gamma: float,
    acc: Optional[GradientAccumulator] = None,
):
    """C and D <= E: C,D overlap and E's center lies in both balls."""
    fc = state.class_centers[C]
    fd = state.class_centers[D]
    fe = state.class_centers[E]
    raw_rc = state.class_radii_raw[C]
    raw_rd = state.class_radii_raw[D]
    rc = np.abs(raw_rc)
    rd = np.abs(raw_rd)
    u1 = fc - fd
    u2 = fc - fe
    u3 = fd - fe
    d1 = np.linalg.norm(u1, axis=1)
    d2 = np.linalg.norm(u2, axis=1)
    d3 = np.linalg.norm(u3, axis=1)
    h1 = d1 - rc - rd - gamma
    h2 = d2 - rc - gamma
    h3 = d3 - rd - gamma
    hinge = np.maximum(h1, 0.0) + np.maximum(h2, 0.0) + np.maximum(h3, 0.0)
    pc, pc_grad = _unit_penalty(fc)
    pd, pd_grad = _unit_penalty(fd)
    pe, pe_grad = _unit_penalty(fe)
    values = hinge + pc + pd + pe
    if acc is not None:
        a1 = (h1 > 0.0).astype(float)
        a2 = (h2 > 0.0).astype(float)
        a3 = (h3 > 0.0).astype(float)
        u1h = _safe_unit(u1, d1)
        u2h = _safe_unit(u2, d2)
        u3h = _safe_unit(u3, d3)
        np.add.at(
            acc.class_centers, C, a1[:, None] * u1h + a2[:, None] * u2h + pc_grad
        )
        np.add.at(
            acc.class_centers, D, -a1[:, None] * u1h + a3[:, None] * u3h + pd_grad
        )
        np.add.at(
            acc.class_centers, E, -a2[:, None] * u2h - a3[:, None] * u3h + pe_grad
        )
        np.add.at(acc.class_radii_raw, C, -(a1 + a2) * np.sign(raw_rc))
        np.add.at(acc.class_radii_raw, D, -(a1 + a3) * np.sign(raw_rd))
    return values, hinge


def _sigma_terms(state: EmbeddingState, R: np.ndarray, variant: Variant):
    raw = state.relation_sigmas_raw[R]
    if variant is Variant.EMEL_VAR:
        return raw, np.abs(raw)
    return raw, np.zeros_like(raw)


def nf3_batch(
    state: EmbeddingState,
    C: np.ndarray,
    R: np.ndarray,
    D: np.ndarray,
    gamma: float,
    variant: Variant,
    acc: Optional[GradientAccumulator] = None,
    sigma_reg: float = 1.0,
):
    """C <= some R. D: C's center translated by R lands within the D-ball,
    up to the relation slack.

    sigma_reg scales the slack regularizer.  At the default 1.0 every active
    hinge (-1) is cancelled by its own regularizer (+1), so the slack can
    plateau but never grow; a weight below 1 lets relations with several
    active targets buy slack.
    """
    fc = state.class_centers[C]
    fr = state.relation_vectors[R]
    fd = state.class_centers[D]
    raw_rc = state.class_radii_raw[C]
    raw_rd = state.class_radii_raw[D]
    raw_sig, sig = _sigma_terms(state, R, variant)
    t = fc + fr - fd
    dist = np.linalg.norm(t, axis=1)
    h = dist + np.abs(raw_rc) - np.abs(raw_rd) - sig - gamma
    hinge = np.maximum(h, 0.0)
    pc, pc_grad = _unit_penalty(fc)
    pd, pd_grad = _unit_penalty(fd)
    values = hinge + pc + pd
    if variant is Variant.EMEL_VAR:
        values = values + sigma_reg * sig
    if acc is not None:
        active = (h > 0.0).astype(float)
        that = _safe_unit(t, dist)
        np.add.at(acc.class_centers, C, active[:, None] * that + pc_grad)
        np.add.at(acc.class_centers, D, -active[:, None] * that + pd_grad)
        np.add.at(acc.relation_vectors, R, active[:, None] * that)
        np.add.at(acc.class_radii_raw, C, active * np.sign(raw_rc))
        np.add.at(acc.class_radii_raw, D, -active * np.sign(raw_rd))
        if variant is Variant.EMEL_VAR:
            np.add.at(
                acc.relation_sigmas_raw, R,
                (sigma_reg - active) * np.sign(raw_sig),
            )
    return values, hinge


def nf4_batch(
    state: EmbeddingState,
    R: np.ndarray,
    C: np.ndarray,
    D: np.ndarray,
    gamma: float,
    variant: Variant,
    acc: Optional[GradientAccumulator] = None,
    sigma_reg: float = 1.0,
):
    """some R. C <= D: translation runs backwards and the balls must meet,
    up to the relation slack."""
    fc = state.class_centers[C]
    fr = state.relation_vectors[R]
    fd = state.class_centers[D]
    raw_rc = state.class_radii_raw[C]
    raw_rd = state.class_radii_raw[D]
    raw_sig, sig = _sigma_terms(state, R, variant)
    t = fc - fr - fd
    dist = np.linalg.norm(t, axis=1)
    h = dist - np.abs(raw_rc) - np.abs(raw_rd) - sig - gamma
    hinge = np.maximum(h, 0.0)
    pc, pc_grad = _unit_penalty(fc)
    pd, pd_grad = _unit_penalty(fd)
    values = hinge + pc + pd
    if variant is Variant.EMEL_VAR:
        values = values + sigma_reg * sig
    if acc is not None:
        active = (h > 0.0).astype(float)
        that = _safe_unit(t, dist)
        np.add.at(acc.class_centers, C, active[:, None] * that + pc_grad)
        np.add.at(acc.class_centers, D, -active[:, None] * that + pd_grad)
        np.add.at(acc.relation_vectors, R, -active[:, None] * that)
        np.add.at(acc.class_radii_raw, C, -active * np.sign(raw_rc))
        np.add.at(acc.class_radii_raw, D, -active * np.sign(raw_rd))
        if variant is Variant.EMEL_VAR:
            np.add.at(
                acc.relation_sigmas_raw, R,
                (sigma_reg - active) * np.sign(raw_sig),
            )
    return values, hinge


def disjoint_batch(
    state: EmbeddingState,
    C: np.ndarray,
    D: np.ndarray,
    gamma: float,
    acc: Optional[GradientAccumulator] = None,
):
    """C and D <= nothing: the two balls must separate by at least the margin."""
    fc = state.class_centers[C]
    fd = state.class_centers[D]
    raw_rc = state.class_radii_raw[C]
    raw_rd = state.class_radii_raw[D]
    u = fc - fd
    dist = np.linalg.norm(u, axis=1)
    h = np.abs(raw_rc) + np.abs(raw_rd) - dist + gamma
    hinge = np.maximum(h, 0.0)
    pc, pc_grad = _unit_penalty(fc)
    pd, pd_grad = _unit_penalty(fd)
    values = hinge + pc + pd
    if acc is not None:
        active = (h > 0.0).astype(float)
        uhat = _safe_unit(u, dist)
        np.add.at(acc.class_centers, C, -active[:, None] * uhat + pc_grad)
        np.add.at(acc.class_centers, D, active[:, None] * uhat + pd_grad)
        np.add.at(acc.class_radii_raw, C, active * np.sign(raw_rc))
        np.add.at(acc.class_radii_raw, D, active * np.sign(raw_rd))
    return values, hinge


def bottom_batch(
    state: EmbeddingState,
    C: np.ndarray,
    acc: Optional[GradientAccumulator] = None,
):
    """C <= nothing: the radius itself is the loss, driving the ball to a point."""
    raw = state.class_radii_raw[C]
    values = np.abs(raw)
    if acc is not None:
        np.add.at(acc.class_radii_raw, C, np.sign(raw))
    return values, np.zeros_like(values)


def nf3_negative_batch(
    state: EmbeddingState,
    C: np.ndarray,
    R: np.ndarray,
    D: np.ndarray,
    gamma: float,
    variant: Variant,
    acc: Optional[GradientAccumulator] = None,
):
    """Corrupted C <= some R. D': push the translated ball away from D'."""
    fc = state.class_centers[C]
    fr = state.relation_vectors[R]
    fd = state.class_centers[D]
    raw_rc = state.class_radii_raw[C]
    raw_rd = state.class_radii_raw[D]
    raw_sig, sig = _sigma_terms(state, R, variant)
    t = fc + fr - fd
    dist = np.linalg.norm(t, axis=1)
    h = np.abs(raw_rc) + np.abs(raw_rd) + sig + gamma - dist
    hinge = np.maximum(h, 0.0)
    pc, pc_grad = _unit_penalty(fc)
    pd, pd_grad = _unit_penalty(fd)
    values = hinge + pc + pd
    if acc is not None:
        active = (h > 0.0).astype(float)
        that = _safe_unit(t, dist)
        np.add.at(acc.class_centers, C, -active[:, None] * that + pc_grad)
        np.add.at(acc.class_centers, D, active[:, None] * that + pd_grad)
        np.add.at(acc.relation_vectors, R, -active[:, None] * that)
        np.add.at(acc.class_radii_raw, C, active * np.sign(raw_rc))
        np.add.at(acc.class_radii_raw, D, active * np.sign(raw_rd))
        if variant is Variant.EMEL_VAR:
            np.add.at(acc.relation_sigmas_raw, R, active * np.sign(raw_sig))
    return values, hinge


def _collect_grads(
    acc: GradientAccumulator, class_rows, relation_rows
) -> dict:
    grads: dict = {}
    for c in sorted(set(class_rows)):
        vec = acc.class_centers[c]
        if np.any(vec != 0.0):
            grads[(CLASS_CENTER, c)] = vec.copy()
        val = acc.class_radii_raw[c]
        if val != 0.0:
            grads[(CLASS_RADIUS, c)] = float(val)
    for r in sorted(set(relation_rows)):
        vec = acc.relation_vectors[r]
        if np.any(vec != 0.0):
            grads[(RELATION_VECTOR, r)] = vec.copy()
        val = acc.relation_sigmas_raw[r]
        if val != 0.0:
            grads[(RELATION_SIGMA, r)] = float(val)
    return grads


def _single(batch_fn, state, rows, relation_rows=()):
    acc = GradientAccumulator.zeros_like(state)
    values, hinges = batch_fn(acc)
    grads = _collect_grads(acc, rows, relation_rows)
    return LossTerm(float(values[0]), float(hinges[0]), grads)


def loss_nf1(state: EmbeddingState, c: int, d: int, gamma: float) -> LossTerm:
    arr = lambda x: np.array([x])
    return _single(
        lambda acc: nf1_batch(state, arr(c), arr(d), gamma, acc), state, (c, d)
    )


def loss_nf2(state: EmbeddingState, c: int, d: int, e: int, gamma: float) -> LossTerm:
    arr = lambda x: np.array([x])
    return _single(
        lambda acc: nf2_batch(state, arr(c), arr(d), arr(e), gamma, acc),
        state,
        (c, d, e),
    )


def loss_nf3(
    state: EmbeddingState, c: int, r: int, d: int, gamma: float,
    variant: Variant, sigma_reg: float = 1.0,
) -> LossTerm:
    arr = lambda x: np.array([x])
    return _single(
        lambda acc: nf3_batch(
            state, arr(c), arr(r), arr(d), gamma, variant, acc, sigma_reg
        ),
        state,
        (c, d),
        (r,),
    )


def loss_nf4(
    state: EmbeddingState, c: int, r: int, d: int, gamma: float,
    variant: Variant, sigma_reg: float = 1.0,
) -> LossTerm:
    arr = lambda x: np.array([x])
    return _single(
        lambda acc: nf4_batch(
            state, arr(r), arr(c), arr(d), gamma, variant, acc, sigma_reg
        ),
        state,
        (c, d),
        (r,),
    )


def loss_disjoint(state: EmbeddingState, c: int, d: int, gamma: float) -> LossTerm:
    arr = lambda x: np.array([x])
    return _single(
        lambda acc: disjoint_batch(state, arr(c), arr(d), gamma, acc), state, (c, d)
    )


def loss_bottom(state: EmbeddingState, c: int) -> LossTerm:
    arr = lambda x: np.array([x])
    return _single(lambda acc: bottom_batch(state, arr(c), acc), state, (c,))


def loss_nf3_negative(
    state: EmbeddingState, c: int, r: int, d_neg: int, gamma: float, variant: Variant
) -> LossTerm:
    arr = lambda x: np.array([x])
    return _single(
        lambda acc: nf3_negative_batch(
            state, arr(c), arr(r), arr(d_neg), gamma, variant, acc
        ),
        state,
        (c, d_neg),
        (r,),
    )


def gradients(
    batch,
    state: EmbeddingState,
    gamma: float,
    variant: Variant,
    sigma_reg: float = 1.0,
) -> GradientAccumulator:
    """Summed analytic gradients for a batch of (normal axiom, sign) pairs.

    Sign +1 is a positive term; sign -1 marks a corrupted role axiom and is
    valid only for the C <= some R. D shape.  Import stays local to avoid a
    module cycle with the axiom types.
    """
    from .normalize import NF1, NF2, NF3, NF4, BottomSub, Disjoint

    acc = GradientAccumulator.zeros_like(state)
    one = lambda x: np.array([x])
    for ax, sign in batch:
        if sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {sign!r}")
        if sign == -1:
            if not isinstance(ax, NF3):
                raise ValueError("negative terms exist only for the "
                                 "C <= some R. D shape")
            nf3_negative_batch(
                state, one(ax.c), one(ax.r), one(ax.d), gamma, variant, acc
            )
        elif isinstance(ax, NF1):
            nf1_batch(state, one(ax.c), one(ax.d), gamma, acc)
        elif isinstance(ax, NF2):
            nf2_batch(state, one(ax.c), one(ax.d), one(ax.e), gamma, acc)
        elif isinstance(ax, NF3):
            nf3_batch(state, one(ax.c), one(ax.r), one(ax.d), gamma, variant,
                      acc, sigma_reg)
        elif isinstance(ax, NF4):
            nf4_batch(state, one(ax.r), one(ax.c), one(ax.d), gamma, variant,
                      acc, sigma_reg)
        elif isinstance(ax, Disjoint):
            disjoint_batch(state, one(ax.c), one(ax.d), gamma, acc)
        elif isinstance(ax, BottomSub):
            bottom_batch(state, one(ax.c), acc)
        else:
            raise TypeError(f"not a normal axiom: {ax!r}")
    return acc


# --- persistence ---------------------------------------------------------

MODEL_HEADER_PREFIX = "#geodl v1"


@dataclass
class SavedModel:
    state: EmbeddingState
    class_names: list
    relation_names: list
    variant: Variant
    margin: float


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_model(
    path,
    state: EmbeddingState,
    class_names: list,
    relation_names: list,
    variant: Variant,
    margin: float,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{MODEL_HEADER_PREFIX} dim={state.dim} variant={variant.value} "
            f"margin={_fmt(margin)}\n"
        )
        for i, name in enumerate(class_names):
            row = ["C", name, _fmt(state.class_radii_raw[i])]
            row.extend(_fmt(v) for v in state.class_centers[i])
            fh.write("\t".join(row) + "\n")
        for i, name in enumerate(relation_names):
            row = ["R", name, _fmt(state.relation_sigmas_raw[i])]
            row.extend(_fmt(v) for v in state.relation_vectors[i])
            fh.write("\t".join(row) + "\n")


def load_model(path) -> SavedModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(MODEL_HEADER_PREFIX):
            raise ValueError(f"{path}: not a geodl model file")
        fields = dict(
            part.split("=", 1) for part in header[len(MODEL_HEADER_PREFIX):].split()
        )
        dim = int(fields["dim"])
        variant = Variant(fields["variant"])
        margin = float(fields["margin"])
        class_names: list = []
        relation_names: list = []
        centers: list = []
        radii: list = []
        rel_vecs: list = []
        sigmas: list = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 + dim:
                raise ValueError(f"{path}:{lineno}: expected {3 + dim} columns")
            kind, name, scalar = parts[0], parts[1], float(parts[2])
            vec = [float(v) for v in parts[3:]]
            if kind == "C":
                class_names.append(name)
                radii.append(scalar)
                centers.append(vec)
            elif kind == "R":
                relation_names.append(name)
                sigmas.append(scalar)
                rel_vecs.append(vec)
            else:
                raise ValueError(f"{path}:{lineno}: unknown row kind {kind!r}")
    state = EmbeddingState(
        np.array(centers, dtype=float).reshape(len(class_names), dim),
        np.array(radii, dtype=float),
        np.array(rel_vecs, dtype=float).reshape(len(relation_names), dim),
        np.array(sigmas, dtype=float),
    )
    return SavedModel(state, class_names, relation_names, variant, margin)
