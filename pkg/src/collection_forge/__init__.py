"""collection_forge: sparse collection descriptors and metric-learned ranking.

Represents image collections as joint sparse reconstruction codes over
block-diagonal per-unit dictionaries (Huber or least-squares loss, l1 or
l2,1 penalty), learns Mahalanobis metrics from preference pairs, and
ranks collections for recommendation evaluated by MAP@K.
"""

from .backend import BACKEND
from .coder import (CollectionDescriptor, HuberParams, ImageCollection,
                    encode_collection, huber_value_grad, prox_group_l21, prox_l1,
                    tune_lambda_for_density)
from .datagen import SynthConfig, generate_synthetic_dataset, lccs, \
    mine_preferences, percentile_filter
from .dictionary import (BlockDictionary, SubDictionary, assemble_block_diagonal,
                         learn_unit_dictionary, sparse_code_lasso)
from .features import (FeatureSchema, ImageFeature, RasterImage, extract_unit,
                       extract_image_features, load_ppm)
from .metric import (MetricModel, PairSets, learn_metric, mahalanobis_distance,
                     project_feasible)
from .recommend import (PreferenceTuple, RankedList, ap_at_k, build_pairs,
                        map_at_k, rank_collections, train_query_dependent)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BlockDictionary", "CollectionDescriptor", "FeatureSchema",
    "HuberParams", "ImageCollection", "ImageFeature", "MetricModel", "PairSets",
    "PreferenceTuple", "RankedList", "RasterImage", "SubDictionary",
    "SynthConfig", "ap_at_k", "assemble_block_diagonal", "build_pairs",
    "encode_collection", "extract_image_features", "extract_unit",
    "generate_synthetic_dataset", "huber_value_grad", "lccs", "learn_metric",
    "learn_unit_dictionary", "load_ppm", "mahalanobis_distance", "map_at_k",
    "mine_preferences", "percentile_filter", "project_feasible",
    "prox_group_l21", "prox_l1", "rank_collections", "sparse_code_lasso",
    "train_query_dependent", "tune_lambda_for_density",
]
