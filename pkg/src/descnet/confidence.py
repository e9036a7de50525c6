"""Confidence grading of predictions, precision estimation, group
selection, and classification metrics.

A prediction's confidence comes from the class make-up of its cluster.
With known entities present, the supporting share s is the fraction of
known entities carrying the predicted class: L1 (0.99, 1], L2
[0.50, 0.99], L3 [0.05, 0.50), L4 [0, 0.05). In clusters of only
unknown entities, s is the fraction of peers (the graded entity
included) predicted as the same class: L5 above 0.50, else L6.

Predictions sharing one (class, level) pair form a group. Group
precision is estimated either exhaustively from audit labels or from a
seeded sample, and groups estimated above a threshold are selected.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import Taxonomy
from .seeding import derive_seed


class ConfidenceError(ValueError):
    """Invalid grading/estimation input."""


class Level(IntEnum):
    """Confidence levels; lower value means higher confidence."""

    L1 = 1
    L2 = 2
    L3 = 3
    L4 = 4
    L5 = 5
    L6 = 6


@dataclass(frozen=True)
class Prediction:
    entity_id: str
    class_id: str
    prob: float


@dataclass(frozen=True)
class ClusterComposition:
    cluster: int
    known_labels: Mapping[str, int]  # class -> count of known entities
    predicted_labels: Mapping[str, int]  # class -> count over unknown entities

    @property
    def known_total(self) -> int:
        return sum(self.known_labels.values())

    @property
    def unknown_total(self) -> int:
        return sum(self.predicted_labels.values())


@dataclass(frozen=True)
class GradedPrediction:
    entity_id: str
    class_id: str
    prob: float
    cluster: int
    level: Level
    share: float


def _check_share(s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ConfidenceError(f"share must be in [0,1], got {s}")
    return float(s)


def level_from_known_share(s: float) -> Level:
    s = _check_share(s)
    if s > 0.99:
        return Level.L1
    if s >= 0.50:
        return Level.L2
    if s >= 0.05:
        return Level.L3
    return Level.L4


def level_from_unknown_share(s: float) -> Level:
    s = _check_share(s)
    return Level.L5 if s > 0.50 else Level.L6


def grade(prediction: Prediction, composition: ClusterComposition) -> GradedPrediction:
    """Grade one prediction from its cluster's composition."""
    known_total = composition.known_total
    if known_total > 0:
        share = composition.known_labels.get(prediction.class_id, 0) / known_total
        level = level_from_known_share(share)
    else:
        unknown_total = composition.unknown_total
        if unknown_total == 0:
            raise ConfidenceError(f"cluster {composition.cluster} is empty")
        share = composition.predicted_labels.get(prediction.class_id, 0) / unknown_total
        level = level_from_unknown_share(share)
    return GradedPrediction(
        entity_id=prediction.entity_id,
        class_id=prediction.class_id,
        prob=prediction.prob,
        cluster=composition.cluster,
        level=level,
        share=share,
    )


def grade_all(
    predictions: Sequence[Prediction],
    assignments: Mapping[str, int],
    known_labels: Mapping[str, str],
) -> list[GradedPrediction]:
    """Grade every prediction against its cluster.

    known_labels maps known entity ids to their classes; assignments
    maps every clustered entity id (known and unknown) to a cluster.
    """
    known_by_cluster: dict[int, Counter] = defaultdict(Counter)
    for eid, cls in known_labels.items():
        known_by_cluster[assignments[eid]][cls] += 1
    predicted_by_cluster: dict[int, Counter] = defaultdict(Counter)
    for p in predictions:
        predicted_by_cluster[assignments[p.entity_id]][p.class_id] += 1
    out = []
    for p in predictions:
        cluster = assignments[p.entity_id]
        comp = ClusterComposition(
            cluster=cluster,
            known_labels=known_by_cluster.get(cluster, {}),
            predicted_labels=predicted_by_cluster.get(cluster, {}),
        )
        out.append(grade(p, comp))
    return out


# ---------------------------------------------------------------------------
# groups and precision estimation


@dataclass
class Group:
    class_id: str
    level: Level
    member_ids: tuple[str, ...]
    precision: Optional[float] = None
    evaluated: bool = False
    evaluated_count: int = 0

    @property
    def n(self) -> int:
        return len(self.member_ids)


def group_predictions(graded: Iterable[GradedPrediction]) -> list[Group]:
    """Partition graded predictions by (class, level)."""
    buckets: dict[tuple[str, Level], list[str]] = defaultdict(list)
    for g in graded:
        buckets[(g.class_id, g.level)].append(g.entity_id)
    return [
        Group(class_id=cls, level=level, member_ids=tuple(ids))
        for (cls, level), ids in sorted(buckets.items())
    ]


def estimate_p1(m: int, r: int) -> float:
    """Class-level precision from a manual sample: r right out of m."""
    if m < 1:
        raise ConfidenceError("sample size must be >= 1")
    if not 0 <= r <= m:
        raise ConfidenceError(f"need 0 <= r <= m, got r={r}, m={m}")
    return r / m


def estimate_p2(groups: Iterable[tuple[int, float]]) -> float:
    """Group-size-weighted precision: sum(p_i * n_i) / sum(n_i)."""
    total = 0
    weighted = 0.0
    for n_i, p_i in groups:
        if n_i < 0:
            raise ConfidenceError("group sizes must be >= 0")
        if not 0.0 <= p_i <= 1.0:
            raise ConfidenceError("group precisions must be in [0,1]")
        total += n_i
        weighted += p_i * n_i
    if total < 1:
        raise ConfidenceError("estimate_p2 needs at least one entity")
    return weighted / total


def sample_for_evaluation(
    group: Group,
    m_min: int = 40,
    seed: int = 0,
    min_group_size: int = 100,
    sample_size: Optional[int] = None,
) -> tuple[bool, tuple[str, ...]]:
    """Seeded evaluation subset: min(n, max(m_min, sample_size)) members.

    Groups below min_group_size are left unevaluated (empty subset).
    """
    if group.n < min_group_size:
        return False, ()
    want = min(group.n, max(m_min, sample_size if sample_size is not None else m_min))
    members = sorted(group.member_ids)
    rng = np.random.default_rng(seed)
    picks = rng.permutation(len(members))[:want]
    return True, tuple(members[i] for i in sorted(picks.tolist()))


def other_credit(predicted: str, gold: str, taxonomy: Taxonomy) -> bool:
    """Exact match, or an "Other" leaf whose parent concept covers gold."""
    if predicted == gold:
        return True
    if not taxonomy.is_other(predicted):
        return False
    parent = taxonomy.parent_key(predicted)
    return parent is not None and parent in taxonomy.ancestor_keys(gold)


def realized_precision(
    pairs: Iterable[tuple[str, str]], taxonomy: Taxonomy
) -> float:
    """Fraction of (predicted, gold) pairs earning credit."""
    total = 0
    right = 0
    for predicted, gold in pairs:
        total += 1
        right += other_credit(predicted, gold, taxonomy)
    if total == 0:
        raise ConfidenceError("no pairs to evaluate")
    return right / total


def evaluate_groups(
    groups: Sequence[Group],
    audit_labels: Mapping[str, str],
    taxonomy: Taxonomy,
    mode: str = "exhaustive",
    m_min: int = 40,
    min_group_size: int = 100,
    sample_size: Optional[int] = None,
    seed: int = 0,
) -> list[Group]:
    """Estimate every group's precision against audit labels.

    ``exhaustive`` grades every member; ``sampled`` mirrors a manual
    protocol with a seeded subset of at least m_min members. Either
    way, groups below min_group_size stay unevaluated. The "Other"
    credit rule applies.
    """
    if mode not in ("exhaustive", "sampled"):
        raise ConfidenceError(f"unknown evaluation mode {mode!r}")
    out = []
    for g in groups:
        if g.n < min_group_size:
            out.append(
                Group(g.class_id, g.level, g.member_ids, None, False, 0)
            )
            continue
        if mode == "exhaustive":
            chosen: Sequence[str] = g.member_ids
        else:
            _, chosen = sample_for_evaluation(
                g,
                m_min=m_min,
                seed=derive_seed(seed, g.class_id, int(g.level)),
                min_group_size=min_group_size,
                sample_size=sample_size,
            )
        try:
            golds = [audit_labels[eid] for eid in chosen]
        except KeyError as exc:
            raise ConfidenceError(f"no audit label for entity {exc.args[0]!r}") from None
        r = sum(other_credit(g.class_id, gold, taxonomy) for gold in golds)
        p = estimate_p1(len(chosen), r)
        out.append(Group(g.class_id, g.level, g.member_ids, p, True, len(chosen)))
    return out


def select_groups(groups: Sequence[Group], threshold: float = 0.94) -> tuple[str, ...]:
    """Members of evaluated groups whose precision strictly exceeds the
    threshold; unevaluated groups never contribute."""
    selected: list[str] = []
    for g in groups:
        if g.evaluated and g.precision is not None and g.precision > threshold:
            selected.extend(g.member_ids)
    return tuple(selected)


# ---------------------------------------------------------------------------
# classification metrics


@dataclass(frozen=True)
class PrfReport:
    precision: np.ndarray  # per class
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float


def macro_prf(predictions, gold, n_classes: int) -> PrfReport:
    """One-vs-rest P/R/F1 per class (0 where undefined) and macro means."""
    predictions = np.asarray(predictions, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if predictions.shape != gold.shape:
        raise ConfidenceError(
            f"length mismatch: {predictions.shape} predictions vs {gold.shape} gold"
        )
    precision = np.zeros(n_classes)
    recall = np.zeros(n_classes)
    f1 = np.zeros(n_classes)
    for c in range(n_classes):
        tp = int(np.sum((predictions == c) & (gold == c)))
        pred_c = int(np.sum(predictions == c))
        gold_c = int(np.sum(gold == c))
        p = tp / pred_c if pred_c else 0.0
        r = tp / gold_c if gold_c else 0.0
        precision[c] = p
        recall[c] = r
        f1[c] = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    return PrfReport(
        precision=precision,
        recall=recall,
        f1=f1,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
    )
