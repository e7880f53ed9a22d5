"""Pair construction, ranking, AP@K / MAP@K, and query-dependent training.

Ranking sorts candidate collections by learned distance to the user's
clicked set, ascending, with ties broken by collection id.  AP@K uses
P(i) = (number of relevant in the top i)/i and divides the sum of
P(i)*rel(i) over the top K positions by K.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateObjective, EmptyEvaluation, MissingDescriptor,
                     SchemaMismatch)
from .metric import MetricModel, PairSets, learn_metric, mahalanobis_distance

GLOBAL_CATEGORY = "All"


@dataclass
class PreferenceTuple:
    user_id: str
    query: list
    clicked_id: str
    interested: list     # collection ids, B+
    disinterested: list  # collection ids, B-
    query_category: str | None = None

    def __post_init__(self):
        overlap = set(self.interested) & set(self.disinterested)
        if overlap:
            raise ValueError(f"interested/disinterested overlap: {sorted(overlap)}")

    def to_record(self) -> dict:
        return {
            "user_id": self.user_id,
            "query": list(self.query),
            "clicked_id": self.clicked_id,
            "interested": list(self.interested),
            "disinterested": list(self.disinterested),
            "query_category": self.query_category,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PreferenceTuple":
        return cls(rec["user_id"], rec["query"], rec["clicked_id"],
                   rec["interested"], rec["disinterested"],
                   rec.get("query_category"))


@dataclass
class RankedList:
    user_id: str
    items: list = field(default_factory=list)  # (collection_id, distance) ascending
    rel: list = field(default_factory=list)


def _lookup(descriptors: dict, collection_id: str):
    try:
        return descriptors[collection_id]
    except KeyError:
        raise MissingDescriptor(collection_id) from None


def build_pairs(tuples, descriptors: dict) -> PairSets:
    """S = {(c_i, b) : b in B+_i}, D = {(c_i, b) : b in B-_i} over descriptors."""
    variants = {d.variant for d in descriptors.values()}
    if len(variants) > 1:
        raise SchemaMismatch(f"mixed descriptor variants: {sorted(variants)}")
    similar, dissimilar = [], []
    for t in tuples:
        c = _lookup(descriptors, t.clicked_id).x
        for b in t.interested:
            similar.append((c, _lookup(descriptors, b).x))
        for b in t.disinterested:
            dissimilar.append((c, _lookup(descriptors, b).x))
    return PairSets(similar=similar, dissimilar=dissimilar)


def rank_collections(clicked_desc, candidate_descs, model: MetricModel,
                     user_id: str = "") -> RankedList:
    """Stable ascending sort by distance; ties break by collection id."""
    scored = []
    for desc in candidate_descs:
        d = mahalanobis_distance(clicked_desc.x, desc.x, model)
        scored.append((d, desc.collection_id))
    scored.sort(key=lambda t: (t[0], t[1]))
    return RankedList(user_id=user_id, items=[(cid, d) for d, cid in scored])


def label_relevance(ranked: RankedList, positives) -> RankedList:
    pos = set(positives)
    ranked.rel = [1 if cid in pos else 0 for cid, _ in ranked.items]
    return ranked


def ap_at_k(rel, k: int) -> float:
    """AP@K = sum_{i<=K} P(i)*rel(i) / K, zero-padding lists shorter than K."""
    if k < 1:
        raise ValueError("K must be >= 1")
    rel = list(rel)[:k] + [0] * max(0, k - len(rel))
    hits = 0
    total = 0.0
    for i, r in enumerate(rel, start=1):
        hits += r
        if r:
            total += hits / i
    return total / k


def map_at_k(rel_lists, k: int) -> float:
    """Mean AP@K; accepts RankedLists (with rel filled) or raw 0/1 lists."""
    rels = [rl.rel if isinstance(rl, RankedList) else rl for rl in rel_lists]
    if not rels:
        raise EmptyEvaluation("no ranked lists to evaluate")
    return float(np.mean([ap_at_k(r, k) for r in rels]))


def random_baseline_map(n_candidates, n_relevant, k, n_trials=100_000, seed=0):
    """Monte-Carlo MAP@K of uniformly random rankings (vectorized)."""
    rng = np.random.default_rng(seed)
    rel = np.zeros((n_trials, n_candidates), dtype=np.int8)
    rel[:, :n_relevant] = 1
    rel = rng.permuted(rel, axis=1)[:, :k].astype(np.float64)
    prec = np.cumsum(rel, axis=1) / np.arange(1, k + 1)
    return float(((prec * rel).sum(axis=1) / k).mean())


def evaluate_tuples(tuples, descriptors, model_for, ks=range(1, 11)):
    """MAP@K table over preference tuples.

    `model_for` maps a tuple to the MetricModel used for it (supports
    query-dependent evaluation); pass `lambda t: model` for a global one.
    """
    tuples = list(tuples)
    if not tuples:
        raise EmptyEvaluation("no preference tuples")
    lists = []
    for t in tuples:
        clicked = _lookup(descriptors, t.clicked_id)
        cands = [_lookup(descriptors, b) for b in
                 sorted(set(t.interested) | set(t.disinterested))]
        ranked = rank_collections(clicked, cands, model_for(t), user_id=t.user_id)
        lists.append((t, label_relevance(ranked, t.interested)))
    table = {str(k): map_at_k([rl for _, rl in lists], k) for k in ks}
    per_category = {}
    for t, rl in lists:
        per_category.setdefault(t.query_category or GLOBAL_CATEGORY, []).append(rl)
    cat_tables = {
        cat: {str(k): map_at_k(rls, k) for k in ks}
        for cat, rls in sorted(per_category.items())
    }
    return {"global": table, "per_category": cat_tables}


def train_query_dependent(tuples, descriptors, variant, **opts):
    """One metric per query category plus an always-present global model.

    Categories whose pair sets are empty or degenerate fall back to the
    global model with a warning.
    """
    tuples = list(tuples)
    models = {GLOBAL_CATEGORY: learn_metric(build_pairs(tuples, descriptors),
                                            variant, **opts)}
    by_cat = {}
    for t in tuples:
        if t.query_category is not None:
            by_cat.setdefault(t.query_category, []).append(t)
    for cat, cat_tuples in sorted(by_cat.items()):
        try:
            models[cat] = learn_metric(build_pairs(cat_tuples, descriptors),
                                       variant, **opts)
        except (ValueError, DegenerateObjective) as exc:
            warnings.warn(f"category {cat!r} skipped ({exc}); using global model")
    return models


def model_selector(models: dict):
    """Inference-time lookup: tuple's category if trained, else global."""
    def select(t: PreferenceTuple) -> MetricModel:
        return models.get(t.query_category or GLOBAL_CATEGORY,
                          models[GLOBAL_CATEGORY])
    return select
