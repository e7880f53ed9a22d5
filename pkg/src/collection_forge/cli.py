"""Pipeline CLI: synth | extract | dict-learn | encode | metric-train | rank | eval.

Stages read and write conventional filenames inside a working directory
(--workdir), each artifact written atomically and stamped with the
config hash and seed, so identical configs reproduce byte-identical
artifacts.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import modelio
from .coder import HuberParams, ImageCollection, encode_collection, \
    tune_lambda_for_density
from .datagen import SynthConfig, generate_synthetic_dataset
from .dictionary import assemble_block_diagonal, learn_unit_dictionary
from .errors import CollectionForgeError, NumericError, ParseError, SchemaMismatch
from .features import FeatureSchema, ImageFeature, extract_image_features, load_ppm
from .metric import METRIC_VARIANTS, learn_metric
from .persist import atomic_write_bytes, config_hash, read_json, write_json
from .recommend import (GLOBAL_CATEGORY, build_pairs, evaluate_tuples,
                        label_relevance, model_selector, random_baseline_map,
                        rank_collections, train_query_dependent)

DEFAULT_CONFIG = {
    "seed": 0,
    "synth": SynthConfig().to_dict(),
    "dict": {"atoms_per_unit": 8, "lam": 0.15, "epochs": 5},
    "encode": {"variant": "huber-g", "lam": None, "tau": None,
               "target_density": 0.10, "tol": 1e-6, "max_iter": 1000},
    "metric": {"variant": "full", "step": 0.1, "iters": 500,
               "query_dependent": False},
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(args) -> dict:
    cfg = DEFAULT_CONFIG
    if args.config:
        cfg = _merge(cfg, read_json(args.config))
    if args.seed is not None:
        cfg = _merge(cfg, {"seed": args.seed})
        cfg["synth"]["seed"] = args.seed
    if getattr(args, "variant", None):
        cfg["encode"]["variant"] = args.variant
    if getattr(args, "metric", None):
        cfg["metric"]["variant"] = args.metric
    if getattr(args, "query_dependent", False):
        cfg["metric"]["query_dependent"] = True
    return cfg


def _meta(cfg: dict) -> dict:
    return {"config_hash": config_hash(cfg), "seed": cfg["seed"]}


def _paths(workdir: str) -> dict:
    j = lambda *p: os.path.join(workdir, *p)  # noqa: E731
    return {
        "schema": j("schema.json"), "features": j("features"),
        "tuples": j("dataset.jsonl"), "categories": j("categories.json"),
        "dict": j("dict"), "descriptors": j("descriptors"),
        "metric": j("metric.model"), "metric_index": j("metric-index.json"),
        "report": j("report.json"),
    }


def _n_workers() -> int:
    cap = os.environ.get("COLLECTION_FORGE_THREADS")
    if cap is not None:
        return max(1, int(cap))
    return min(4, os.cpu_count() or 1)


def cmd_synth(args) -> int:
    cfg = load_config(args)
    meta = _meta(cfg)
    p = _paths(args.workdir)
    os.makedirs(args.workdir, exist_ok=True)
    data = generate_synthetic_dataset(SynthConfig.from_dict(cfg["synth"]))
    rows, mats = [], []
    for coll in data.collections:
        for member in coll.members:
            rows.append({"image_id": member.image_id,
                         "collection_id": coll.collection_id})
            mats.append(member.values)
    modelio.save_schema(p["schema"], data.schema, meta)
    modelio.save_features(p["features"], np.stack(mats), rows, meta)
    modelio.save_tuples(p["tuples"], data.tuples, meta)
    write_json(p["categories"], {"categories": data.categories, "meta": meta})
    print(f"synth: {len(data.collections)} collections, "
          f"{len(rows)} images, seed {cfg['seed']}")
    return 0


def cmd_extract(args) -> int:
    cfg = load_config(args)
    meta = _meta(cfg)
    p = _paths(args.workdir)
    os.makedirs(args.workdir, exist_ok=True)
    schema = FeatureSchema.default()
    rows, mats = [], []
    for coll_name in sorted(os.listdir(args.images)):
        coll_dir = os.path.join(args.images, coll_name)
        if not os.path.isdir(coll_dir):
            continue
        for fname in sorted(os.listdir(coll_dir)):
            if not fname.endswith(".ppm"):
                continue
            with open(os.path.join(coll_dir, fname), "rb") as fh:
                img = load_ppm(fh.read())
            feat = extract_image_features(img, schema,
                                          image_id=f"{coll_name}/{fname}")
            rows.append({"image_id": feat.image_id, "collection_id": coll_name})
            mats.append(feat.values)
    if not rows:
        raise FileNotFoundError(f"no PPM images under {args.images}")
    modelio.save_schema(p["schema"], schema, meta)
    modelio.save_features(p["features"], np.stack(mats), rows, meta)
    print(f"extract: {len(rows)} images from {args.images}")
    return 0


def _load_collections(p):
    schema, _ = modelio.load_schema(p["schema"])
    matrix, rows, _ = modelio.load_features(p["features"])
    if matrix.shape[1] != schema.total_dim:
        raise SchemaMismatch("feature dim does not match schema")
    order, grouped = [], {}
    for row, vec in zip(rows, matrix):
        cid = row["collection_id"]
        if cid not in grouped:
            grouped[cid] = []
            order.append(cid)
        grouped[cid].append(ImageFeature(row["image_id"], vec))
    colls = [ImageCollection(cid, grouped[cid]) for cid in order]
    return schema, colls


def cmd_dict_learn(args) -> int:
    cfg = load_config(args)
    meta = _meta(cfg)
    p = _paths(args.workdir)
    schema, colls = _load_collections(p)
    n_atoms = args.k or cfg["dict"]["atoms_per_unit"]
    F_all = np.concatenate([c.matrix() for c in colls], axis=1)
    subs = []
    for (name, _), (start, stop) in zip(schema.units, schema.spans()):
        sub, trace = learn_unit_dictionary(
            F_all[start:stop], n_atoms, lam=cfg["dict"]["lam"],
            epochs=cfg["dict"]["epochs"], seed=cfg["seed"], unit_name=name)
        subs.append(sub)
        print(f"dict-learn[{name}]: objective {trace[0]:.6f} -> {trace[-1]:.6f}")
    dictionary = assemble_block_diagonal(subs, schema)
    modelio.save_dictionary(p["dict"], dictionary,
                            {**meta, "lambda": cfg["dict"]["lam"],
                             "epochs": cfg["dict"]["epochs"],
                             "atoms_per_unit": n_atoms})
    return 0


def cmd_encode(args) -> int:
    cfg = load_config(args)
    meta = _meta(cfg)
    p = _paths(args.workdir)
    schema, colls = _load_collections(p)
    dictionary, _ = modelio.load_dictionary(p["dict"], schema)
    enc = cfg["encode"]
    variant = enc["variant"]
    lam = enc["lam"]
    if lam is None and variant != "raw-avg":
        lam, density = tune_lambda_for_density(
            colls[0], dictionary, variant, target_density=enc["target_density"],
            tau=enc["tau"], tol=enc["tol"], max_iter=enc["max_iter"])
        print(f"encode: tuned lambda {lam:.6g} (density {density:.3f})")
    params = HuberParams(lam=lam if lam is not None else 1.0, tau=enc["tau"])

    def encode_one(coll):
        return encode_collection(coll, dictionary, params, variant,
                                 tol=enc["tol"], max_iter=enc["max_iter"])

    with ThreadPoolExecutor(max_workers=_n_workers()) as pool:
        descriptors = list(pool.map(encode_one, colls))
    modelio.save_descriptors(p["descriptors"], descriptors,
                             {**meta, "variant": variant})
    mean_density = float(np.mean([d.density for d in descriptors]))
    print(f"encode: {len(descriptors)} descriptors ({variant}), "
          f"mean density {mean_density:.3f}")
    return 0


def cmd_metric_train(args) -> int:
    cfg = load_config(args)
    meta = _meta(cfg)
    p = _paths(args.workdir)
    descriptors, dmeta = modelio.load_descriptors(p["descriptors"])
    tuples, _ = modelio.load_tuples(p["tuples"])
    mcfg = cfg["metric"]
    opts = {"step": mcfg["step"], "iters": mcfg["iters"], "seed": cfg["seed"]}
    if mcfg["query_dependent"]:
        models = train_query_dependent(tuples, descriptors, mcfg["variant"],
                                       **opts)
    else:
        models = {GLOBAL_CATEGORY: learn_metric(
            build_pairs(tuples, descriptors), mcfg["variant"], **opts)}
    index = {}
    for cat, model in sorted(models.items()):
        suffix = "" if cat == GLOBAL_CATEGORY else f"-{cat}"
        path = p["metric"] if cat == GLOBAL_CATEGORY else \
            p["metric"].replace(".model", f"{suffix}.model")
        modelio.save_metric(path, model,
                            {**meta, "descriptor_variant": dmeta.get("variant"),
                             "category": cat})
        index[cat] = os.path.basename(path)
    write_json(p["metric_index"], {"models": index, "meta": meta})
    print(f"metric-train: {mcfg['variant']} model(s) for "
          f"{sorted(models)} saved")
    return 0


def _load_models(p):
    index = read_json(p["metric_index"])
    models = {}
    for cat, fname in index["models"].items():
        model, _ = modelio.load_metric(os.path.join(os.path.dirname(p["metric"]),
                                                    fname))
        models[cat] = model
    return models


def cmd_rank(args) -> int:
    cfg = load_config(args)
    p = _paths(args.workdir)
    descriptors, _ = modelio.load_descriptors(p["descriptors"])
    tuples, _ = modelio.load_tuples(p["tuples"])
    models = _load_models(p)
    select = model_selector(models)
    matches = [t for t in tuples if t.user_id == args.user]
    if not matches:
        raise FileNotFoundError(f"no preference tuple for user {args.user!r}")
    t = matches[0]
    cands = [descriptors[b] for b in
             sorted(set(t.interested) | set(t.disinterested))]
    ranked = label_relevance(
        rank_collections(descriptors[t.clicked_id], cands, select(t),
                         user_id=t.user_id), t.interested)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["rank", "collection_id", "distance", "relevant"])
    for i, ((cid, dist), rel) in enumerate(zip(ranked.items, ranked.rel), start=1):
        writer.writerow([i, cid, f"{dist:.12g}", rel])
    out = args.out or os.path.join(args.workdir, f"ranked-{args.user}.csv")
    atomic_write_bytes(out, buf.getvalue().encode())
    print(f"rank: wrote {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args)
    meta = _meta(cfg)
    p = _paths(args.workdir)
    tuples, _ = modelio.load_tuples(p["tuples"])
    if args.random_baseline:
        t = tuples[0]
        n_cand = len(t.interested) + len(t.disinterested)
        value = random_baseline_map(n_cand, len(t.interested),
                                    args.k or 5, seed=cfg["seed"])
        print(f"random baseline MAP@{args.k or 5}: {value:.4f}")
        return 0
    descriptors, dmeta = modelio.load_descriptors(p["descriptors"])
    variants = {d.variant for d in descriptors.values()}
    if len(variants) > 1:
        raise SchemaMismatch(f"mixed descriptor variants {sorted(variants)}")
    models = _load_models(p)
    report = evaluate_tuples(tuples, descriptors, model_selector(models))
    ks = sorted(int(k) for k in report["global"])
    doc = {
        "variant": dmeta.get("variant"),
        "metric_variant": next(iter(models.values())).variant,
        "global": report["global"],
        "per_category": report["per_category"],
        "map_at_5": report["global"].get("5"),
        "meta": meta,
    }
    out = args.out or p["report"]
    write_json(out, doc)
    print("K:      " + "  ".join(f"{k:>6d}" for k in ks))
    print("MAP@K:  " + "  ".join(f"{report['global'][str(k)]:6.3f}" for k in ks))
    for cat, table in report["per_category"].items():
        print(f"{cat:<12s}" + "  ".join(f"{table[str(k)]:6.3f}" for k in ks))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collection-forge",
        description="Sparse collection descriptors + metric-learned ranking")
    parser.add_argument("--workdir", default=".", help="artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="JSON config overrides")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)

    sp = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("extract", help="extract features from PPM images")
    common(sp)
    sp.add_argument("--images", required=True,
                    help="directory of <collection>/<image>.ppm files")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("dict-learn", help="learn per-unit dictionaries")
    common(sp)
    sp.add_argument("--k", type=int, default=None, help="atoms per unit")
    sp.set_defaults(func=cmd_dict_learn)

    sp = sub.add_parser("encode", help="encode collection descriptors")
    common(sp)
    sp.add_argument("--variant", choices=["huber-l1", "huber-g", "avg-l1",
                                          "avg-g", "raw-avg"], default=None)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("metric-train", help="learn the ranking metric")
    common(sp)
    sp.add_argument("--metric", choices=list(METRIC_VARIANTS), default=None)
    sp.add_argument("--query-dependent", action="store_true")
    sp.set_defaults(func=cmd_metric_train)

    sp = sub.add_parser("rank", help="rank candidates for one user")
    common(sp)
    sp.add_argument("--user", required=True)
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("eval", help="MAP@K report, K = 1..10")
    common(sp)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--random-baseline", action="store_true")
    sp.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ParseError, SchemaMismatch,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except CollectionForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
