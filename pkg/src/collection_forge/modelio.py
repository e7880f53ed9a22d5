"""Readers/writers for pipeline artifacts (schema, features, models).

Every artifact carries the pipeline config hash and seed in its JSON
manifest or header so stages can be checked for consistency and reruns
compared byte for byte.
"""

from __future__ import annotations

import os

import numpy as np

from .coder import CollectionDescriptor
from .dictionary import BlockDictionary, SubDictionary
from .errors import ParseError, SchemaMismatch
from .features import FeatureSchema
from .metric import MetricModel
from .persist import (atomic_write_bytes, canonical_json, matrix_from_bytes,
                      matrix_to_bytes, read_json, read_jsonl, read_matrix,
                      write_json, write_jsonl, write_matrix)


def save_schema(path, schema: FeatureSchema, meta: dict) -> None:
    write_json(path, {**schema.to_manifest(), "meta": meta})


def load_schema(path):
    doc = read_json(path)
    return FeatureSchema.from_manifest(doc), doc.get("meta", {})


def save_features(prefix, matrix, rows, meta: dict) -> None:
    """matrix rows are images; `rows` is the per-row sidecar
    [{image_id, collection_id}, ...]."""
    if matrix.shape[0] != len(rows):
        raise ValueError("sidecar length does not match matrix rows")
    write_matrix(f"{prefix}.cfm", matrix)
    write_jsonl(f"{prefix}.jsonl", rows)
    write_json(f"{prefix}.json", {"rows": int(matrix.shape[0]),
                                  "cols": int(matrix.shape[1]), "meta": meta})


def load_features(prefix):
    matrix = read_matrix(f"{prefix}.cfm")
    rows = read_jsonl(f"{prefix}.jsonl")
    manifest = read_json(f"{prefix}.json")
    if matrix.shape != (manifest["rows"], manifest["cols"]):
        raise ParseError("feature matrix shape disagrees with manifest")
    if len(rows) != matrix.shape[0]:
        raise ParseError("feature sidecar length disagrees with matrix")
    return matrix, rows, manifest.get("meta", {})


def save_dictionary(dirpath, dictionary: BlockDictionary, meta: dict) -> None:
    os.makedirs(dirpath, exist_ok=True)
    names = [s.unit_name for s in dictionary.subs]
    write_json(os.path.join(dirpath, "manifest.json"),
               {"units": names, "atoms_per_unit": dictionary.atoms_per_unit,
                "meta": meta})
    for i, sub in enumerate(dictionary.subs):
        write_matrix(os.path.join(dirpath, f"unit_{i:02d}_{sub.unit_name}.cfm"),
                     sub.atoms)


def load_dictionary(dirpath, schema: FeatureSchema):
    manifest = read_json(os.path.join(dirpath, "manifest.json"))
    if tuple(manifest["units"]) != schema.names:
        raise SchemaMismatch(f"dictionary units {manifest['units']} do not match "
                             f"schema {list(schema.names)}")
    subs = []
    for i, name in enumerate(manifest["units"]):
        atoms = read_matrix(os.path.join(dirpath, f"unit_{i:02d}_{name}.cfm"))
        subs.append(SubDictionary(unit_name=name, atoms=atoms))
    return BlockDictionary(subs=subs, schema=schema), manifest.get("meta", {})


def save_descriptors(prefix, descriptors, meta: dict) -> None:
    descriptors = list(descriptors)
    matrix = np.stack([d.x for d in descriptors])
    rows = [{"collection_id": d.collection_id, "variant": d.variant,
             "density": d.density, "lambda": d.lam, "tau": d.tau}
            for d in descriptors]
    write_matrix(f"{prefix}.cfm", matrix)
    write_jsonl(f"{prefix}.jsonl", rows)
    write_json(f"{prefix}.json", {"rows": len(rows), "cols": int(matrix.shape[1]),
                                  "meta": meta})


def load_descriptors(prefix):
    matrix = read_matrix(f"{prefix}.cfm")
    rows = read_jsonl(f"{prefix}.jsonl")
    manifest = read_json(f"{prefix}.json")
    if len(rows) != matrix.shape[0]:
        raise ParseError("descriptor sidecar length disagrees with matrix")
    out = {}
    for i, row in enumerate(rows):
        out[row["collection_id"]] = CollectionDescriptor(
            collection_id=row["collection_id"], x=matrix[i],
            variant=row["variant"], density=row["density"],
            lam=row["lambda"], tau=row["tau"])
    return out, manifest.get("meta", {})


def save_metric(path, model: MetricModel, meta: dict) -> None:
    """Single file: one JSON header line, then a CFM1 matrix."""
    header = canonical_json({"variant": model.variant, "dim": model.dim,
                             "meta": meta})
    if model.variant == "eucl":
        body = np.zeros((0, 0))
    elif model.variant == "diag":
        body = model.diag[None, :]
    else:
        body = model.matrix
    atomic_write_bytes(path, header.encode() + b"\n" + matrix_to_bytes(body))


def load_metric(path):
    import json

    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError("metric file has no header line")
    header = json.loads(data[:nl].decode())
    body, end = matrix_from_bytes(data, nl + 1)
    if end != len(data):
        raise ParseError("trailing bytes after metric matrix")
    variant, dim = header["variant"], header["dim"]
    if variant == "eucl":
        model = MetricModel.identity(dim)
    elif variant == "diag":
        model = MetricModel(variant="diag", dim=dim, diag=body[0])
    else:
        model = MetricModel(variant="full", dim=dim, matrix=body)
    return model, header.get("meta", {})


def save_tuples(path, tuples, meta: dict) -> None:
    write_jsonl(path, [{"meta": meta}] + [t.to_record() for t in tuples])


def load_tuples(path):
    from .recommend import PreferenceTuple

    records = read_jsonl(path)
    if not records or "meta" not in records[0]:
        raise ParseError("tuple file is missing its meta record")
    return [PreferenceTuple.from_record(r) for r in records[1:]], records[0]["meta"]
