"""Subsumption ranking: per-test ranks and the aggregate metric report.

For a test pair C <= D the superclass D is the source: every candidate class
is ordered by distance of its center from D's center, and the rank of C is
reported (``--direction`` swaps the roles).  Ranks use deterministic
tie-breaking by class index.  Candidates exclude normalization helpers and
nominal point classes, identified by their reserved name shapes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import baselines
from .model import EmbeddingState
from .normalize import NF1, FRESH_PREFIX

_NOMINAL_NAME = re.compile(r"^nominal\([^(),#\s]+\)$")

DIRECTIONS = ("sub", "sup")


def is_fresh_name(name: str) -> bool:
    return name.startswith(FRESH_PREFIX)


def is_nominal_name(name: str) -> bool:
    return bool(_NOMINAL_NAME.match(name))


def eligible_candidates(class_names: Sequence[str]) -> np.ndarray:
    """Indices of classes that may appear in a ranking candidate list."""
    return np.array(
        [
            i
            for i, name in enumerate(class_names)
            if not is_fresh_name(name) and not is_nominal_name(name)
        ],
        dtype=int,
    )


@dataclass
class RankReport:
    ranks: list[int]
    hits1: float
    hits10: float
    hits100: float
    median_rank: int
    p90_rank: int
    candidate_count: int
    direction: str = "sub"
    filtered: bool = False


def rank_from_scores(
    scores: np.ndarray,
    candidate_ids: np.ndarray,
    target_id: int,
    ascending: bool = True,
) -> int:
    """Rank of *target_id* inside the candidate list under the given scores.

    rank = 1 + #{better} + #{equal with smaller class index}.
    """
    pos = np.nonzero(candidate_ids == target_id)[0]
    if len(pos) == 0:
        raise ValueError(f"target class {target_id} is not among the candidates")
    s = scores[pos[0]]
    if ascending:
        better = int(np.count_nonzero(scores < s))
    else:
        better = int(np.count_nonzero(scores > s))
    tied_before = int(
        np.count_nonzero((scores == s) & (candidate_ids < target_id))
    )
    return 1 + better + tied_before


def _distances(
    state: EmbeddingState,
    candidate_ids: np.ndarray,
    source: int,
    target_role: str,
    adjust_radius: bool,
) -> np.ndarray:
    diffs = state.class_centers[candidate_ids] - state.class_centers[source]
    dist = np.linalg.norm(diffs, axis=1)
    if adjust_radius:
        cand_r = np.abs(state.class_radii_raw[candidate_ids])
        src_r = abs(float(state.class_radii_raw[source]))
        if target_role == "sub":
            dist = dist + cand_r - src_r  # candidate ball must fit inside source
        else:
            dist = dist + src_r - cand_r  # source ball must fit inside candidate
    return dist


def rank_one(
    test: NF1,
    state: EmbeddingState,
    candidates: np.ndarray,
    direction: str = "sub",
    adjust_radius: bool = False,
) -> int:
    """Rank of the held-out class for one test axiom."""
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    target, source = (test.c, test.d) if direction == "sub" else (test.d, test.c)
    dist = _distances(state, candidates, source, direction, adjust_radius)
    return rank_from_scores(dist, candidates, target, ascending=True)


def _aggregate(
    ranks: list[int], candidate_count: int, direction: str, filtered: bool
) -> RankReport:
    if not ranks:
        raise ValueError("cannot aggregate an empty list of test ranks")
    sorted_ranks = sorted(ranks)
    n = len(sorted_ranks)
    hits = lambda k: sum(1 for r in sorted_ranks if r <= k) / n
    median = sorted_ranks[math.ceil(0.5 * n) - 1]
    p90 = sorted_ranks[math.ceil(0.9 * n) - 1]
    return RankReport(
        ranks=list(ranks),
        hits1=hits(1),
        hits10=hits(10),
        hits100=hits(100),
        median_rank=median,
        p90_rank=p90,
        candidate_count=candidate_count,
        direction=direction,
        filtered=filtered,
    )


def _known_map(known: Optional[Iterable[NF1]], direction: str) -> Optional[dict]:
    """source id -> set of known target ids to filter out of candidates."""
    if known is None:
        return None
    mapping: dict = {}
    for ax in known:
        if direction == "sub":
            mapping.setdefault(ax.d, set()).add(ax.c)
        else:
            mapping.setdefault(ax.c, set()).add(ax.d)
    return mapping


def _test_candidates(
    universe: np.ndarray, source: int, target: int, known_map: Optional[dict]
) -> np.ndarray:
    mask = universe != source
    if known_map is not None:
        drop = known_map.get(source)
        if drop:
            exclude = np.isin(universe, list(drop - {target}))
            mask &= ~exclude
    return universe[mask]


def evaluate(
    tests: Sequence[NF1],
    state: EmbeddingState,
    candidate_universe: np.ndarray,
    direction: str = "sub",
    adjust_radius: bool = False,
    filter_known: Optional[Iterable[NF1]] = None,
) -> RankReport:
    """Rank every test axiom against the candidate universe minus its source."""
    if len(tests) == 0:
        raise ValueError("cannot evaluate an empty test list")
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    known_map = _known_map(filter_known, direction)
    ranks = []
    for test in tests:
        target, source = (test.c, test.d) if direction == "sub" else (test.d, test.c)
        cands = _test_candidates(candidate_universe, source, target, known_map)
        dist = _distances(state, cands, source, direction, adjust_radius)
        ranks.append(rank_from_scores(dist, cands, target, ascending=True))
    return _aggregate(
        ranks, len(candidate_universe), direction, filter_known is not None
    )


def baseline_evaluate(
    tests: Sequence[NF1],
    state: baselines.BaselineState,
    candidate_universe: np.ndarray,
    direction: str = "sub",
    filter_known: Optional[Iterable[NF1]] = None,
    sub_relation: Optional[int] = None,
) -> RankReport:
    """As evaluate, but candidates are ordered by descending subclass score."""
    if len(tests) == 0:
        raise ValueError("cannot evaluate an empty test list")
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    sub_rel = (
        sub_relation
        if sub_relation is not None
        else state.relation_embeddings.shape[0] - 1
    )
    known_map = _known_map(filter_known, direction)
    ranks = []
    for test in tests:
        target, source = (test.c, test.d) if direction == "sub" else (test.d, test.c)
        cands = _test_candidates(candidate_universe, source, target, known_map)
        if direction == "sub":
            scores = baselines.scores_heads(state, cands, sub_rel, source)
        else:
            scores = baselines.scores_tails(state, source, sub_rel, cands)
        ranks.append(rank_from_scores(scores, cands, target, ascending=False))
    return _aggregate(
        ranks, len(candidate_universe), direction, filter_known is not None
    )


# --- report output ---------------------------------------------------------


def write_report(path, report: RankReport) -> None:
    """Metric rows as TSV plus a ``.ranks`` sidecar, one rank per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# geodl rank report direction={report.direction} "
            f"filtered={'yes' if report.filtered else 'no'}\n"
        )
        fh.write(f"hits1\t{report.hits1:.6f}\n")
        fh.write(f"hits10\t{report.hits10:.6f}\n")
        fh.write(f"hits100\t{report.hits100:.6f}\n")
        fh.write(f"median_rank\t{report.median_rank}\n")
        fh.write(f"p90_rank\t{report.p90_rank}\n")
        fh.write(f"candidate_count\t{report.candidate_count}\n")
        fh.write(f"test_count\t{len(report.ranks)}\n")
    with open(f"{path}.ranks", "w", encoding="utf-8") as fh:
        for r in report.ranks:
            fh.write(f"{r}\n")
