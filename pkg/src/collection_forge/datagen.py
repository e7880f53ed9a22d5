"""Seeded synthetic datasets and a desk-scale preference-mining simulation.

Boards and clicked sets are drawn around per-topic latent centers in the
concatenated feature space; interested boards share the user's topic,
disinterested boards come from other topics.  The mining path simulates
matching long queries against board titles by longest contiguous common
token run (token-level LCCS) and keeps only the top-scoring matches.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .coder import ImageCollection
from .features import FeatureSchema, RasterImage, normalize_unit_slices
from .recommend import PreferenceTuple

_WORDS = ("amber", "birch", "coral", "dune", "ember", "fjord", "grove", "harbor",
          "iris", "juniper", "kelp", "lagoon", "meadow", "nectar", "orchid",
          "prairie", "quartz", "reef", "summit", "tundra")


@dataclass(frozen=True)
class SynthConfig:
    topics: int = 8
    users: int = 60
    clicked_per_user: int = 20
    boards_pos: int = 20
    boards_neg: int = 40
    images_per_board: int = 20
    boards_per_topic: int = 25
    outlier_rate: float = 0.1
    noise_sigma: float = 0.1
    seed: int = 0
    unit_dims: tuple = (("ua", 24), ("ub", 24))

    def __post_init__(self):
        if self.topics < 2:
            raise ValueError("need at least 2 topics")
        for name in ("users", "clicked_per_user", "boards_pos", "boards_neg",
                     "images_per_board", "boards_per_topic"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ValueError("outlier_rate must be in [0, 1]")
        if self.boards_pos > self.boards_per_topic:
            raise ValueError("boards_pos exceeds boards_per_topic")
        if self.boards_neg > (self.topics - 1) * self.boards_per_topic:
            raise ValueError("boards_neg exceeds the off-topic board pool")

    @property
    def schema(self) -> FeatureSchema:
        return FeatureSchema(tuple(self.unit_dims))

    def to_dict(self) -> dict:
        return {
            "topics": self.topics, "users": self.users,
            "clicked_per_user": self.clicked_per_user,
            "boards_pos": self.boards_pos, "boards_neg": self.boards_neg,
            "images_per_board": self.images_per_board,
            "boards_per_topic": self.boards_per_topic,
            "outlier_rate": self.outlier_rate, "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "unit_dims": [[n, d] for n, d in self.unit_dims],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "unit_dims" in d:
            d["unit_dims"] = tuple((n, int(dim)) for n, dim in d["unit_dims"])
        return cls(**d)


@dataclass
class MiningRecord:
    user_id: str
    query: list
    clicked_id: str

    def __post_init__(self):
        if not self.query:
            raise ValueError("query token list must be non-empty")


@dataclass
class SynthDataset:
    schema: FeatureSchema
    collections: list                  # boards first, then clicked sets
    tuples: list
    categories: dict                   # collection_id -> category label


def tokenize(text: str) -> list:
    """Lowercase whitespace split; no stemming."""
    return text.lower().split()


def topic_phrase(topic: int) -> list:
    """Deterministic 4-token phrase per topic (long query by construction)."""
    base = [_WORDS[(topic * 3 + j) % len(_WORDS)] for j in range(3)]
    return [f"topic{topic}"] + base


def _topic_centers(cfg: SynthConfig, rng) -> np.ndarray:
    schema = cfg.schema
    centers = rng.normal(size=(cfg.topics, schema.total_dim))
    return np.stack([normalize_unit_slices(c, schema) for c in centers])


def _sample_images(cfg, rng, centers, topic, count) -> np.ndarray:
    schema = cfg.schema
    d = schema.total_dim
    cols = []
    for _ in range(count):
        src = topic
        if cfg.topics > 1 and rng.random() < cfg.outlier_rate:
            others = [t for t in range(cfg.topics) if t != topic]
            src = int(rng.choice(others))
        vec = centers[src] + cfg.noise_sigma * rng.normal(size=d)
        cols.append(normalize_unit_slices(vec, schema))
    return np.stack(cols, axis=1)


def generate_synthetic_dataset(cfg: SynthConfig) -> SynthDataset:
    """Deterministic in cfg.seed; shapes mirror the desk-scale defaults."""
    rng = np.random.default_rng(cfg.seed)
    schema = cfg.schema
    centers = _topic_centers(cfg, rng)

    collections, categories = [], {}
    boards_by_topic = {t: [] for t in range(cfg.topics)}
    for t in range(cfg.topics):
        for b in range(cfg.boards_per_topic):
            board_id = f"board-{t:02d}-{b:03d}"
            F = _sample_images(cfg, rng, centers, t, cfg.images_per_board)
            title = topic_phrase(t) + [f"board{b}"]
            collections.append(ImageCollection.from_matrix(
                board_id, F, category=f"topic-{t}", title_tokens=title))
            categories[board_id] = f"topic-{t}"
            boards_by_topic[t].append(board_id)

    tuples = []
    for u in range(cfg.users):
        topic = u % cfg.topics
        clicked_id = f"clicked-{u:03d}"
        F = _sample_images(cfg, rng, centers, topic, cfg.clicked_per_user)
        collections.append(ImageCollection.from_matrix(
            clicked_id, F, category=f"topic-{topic}",
            title_tokens=topic_phrase(topic)))
        categories[clicked_id] = f"topic-{topic}"
        pos = sorted(rng.choice(boards_by_topic[topic], size=cfg.boards_pos,
                                replace=False).tolist())
        neg_pool = sorted(bid for t, bids in boards_by_topic.items()
                          if t != topic for bid in bids)
        neg = sorted(rng.choice(neg_pool, size=cfg.boards_neg,
                                replace=False).tolist())
        tuples.append(PreferenceTuple(
            user_id=f"user-{u:03d}", query=topic_phrase(topic),
            clicked_id=clicked_id, interested=pos, disinterested=neg,
            query_category=f"topic-{topic}"))
    return SynthDataset(schema=schema, collections=collections, tuples=tuples,
                        categories=categories)


def lccs(a, b) -> int:
    """Length of the longest contiguous common token run (token-level)."""
    a, b = list(a), list(b)
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    best = 0
    for tok_a in a:
        cur = [0] * (len(b) + 1)
        for j, tok_b in enumerate(b, start=1):
            if tok_a == tok_b:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
        prev = cur
    return best


LONG_QUERY_MIN_TOKENS = 4  # "long" means strictly more than 3 tokens


def mine_preferences(records, boards, neg_per_user=40, seed=0):
    """Simulated mining: long queries matched to board titles by LCCS.

    `boards` is a list of (board_id, title_tokens).  For each long query
    only the boards attaining the maximum (nonzero) LCCS enter B+; B- is
    sampled from boards matched to other users' queries.
    """
    rng = np.random.default_rng(seed)
    boards = sorted(boards, key=lambda t: t[0])
    long_records = [r for r in records if len(r.query) >= LONG_QUERY_MIN_TOKENS]
    if not long_records:
        warnings.warn("no long queries in mining records; nothing mined")
        return []

    matches = []
    for rec in long_records:
        scores = {bid: lccs(rec.query, title) for bid, title in boards}
        best = max(scores.values(), default=0)
        pos = sorted(bid for bid, s in scores.items() if s == best and s > 0)
        matches.append((rec, pos))

    tuples = []
    for rec, pos in matches:
        if not pos:
            continue
        pool = sorted({bid for other, opos in matches if other is not rec
                       for bid in opos} - set(pos))
        take = min(neg_per_user, len(pool))
        neg = sorted(rng.choice(pool, size=take, replace=False).tolist()) if take else []
        tuples.append(PreferenceTuple(
            user_id=rec.user_id, query=list(rec.query), clicked_id=rec.clicked_id,
            interested=pos, disinterested=neg))
    return tuples


def percentile_filter(counts, p=95):
    """Nearest-rank percentile filter: keep indices whose value does not
    exceed the p-th percentile of `counts`."""
    if not 0 < p < 100:
        raise ValueError("p must be in (0, 100)")
    counts = list(counts)
    if not counts:
        return set()
    ordered = sorted(counts)
    rank = max(1, math.ceil(p / 100.0 * len(ordered)))
    threshold = ordered[rank - 1]
    return {i for i, c in enumerate(counts) if c <= threshold}


def topic_raster(topic: int, index: int, size: int = 32) -> RasterImage:
    """Tiny deterministic raster per topic: solid base color + row gradient."""
    base = np.array([(37 * (topic + 1)) % 256, (91 * (topic + 2)) % 256,
                     (53 * (topic + 3)) % 256], dtype=np.float64)
    rows = np.linspace(0.0, 40.0 + 5.0 * (index % 4), size)[:, None, None]
    px = np.clip(base[None, None, :] + rows, 0, 255).astype(np.uint8)
    px = np.broadcast_to(px, (size, size, 3)).copy()
    return RasterImage(width=size, height=size, pixels=px)
