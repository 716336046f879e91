"""Versioned text persistence for fitted model bundles.

Layout::

    PFM1
    meta <name> <json value>
    array <name> <ndim> <dim>... 
    <whitespace-separated reals, shortest round-trip repr>
    ...
    checksum sha256 <hex digest of every preceding byte>
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ..classify import OvaModel
from ..encode import GmmModel, PcaModel, PyramidConfig

MAGIC = "PFM1"


class ModelFileError(ValueError):
    pass


class VersionError(ModelFileError):
    pass


class TruncatedError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


def _fmt(a: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(a, dtype=np.float64).ravel())


def _pca_fields(prefix, pca: Optional[PcaModel], meta, arrays):
    if pca is None:
        return
    arrays[f"{prefix}.mean"] = pca.mean
    arrays[f"{prefix}.basis"] = pca.basis
    meta[f"{prefix}.scope"] = pca.scope
    meta[f"{prefix}.subtype_split"] = list(pca.subtype_split) if pca.subtype_split else None
    meta[f"{prefix}.output_split"] = list(pca.output_split) if pca.output_split else None


def bundle_to_text(bundle) -> str:
    meta: Dict[str, object] = {
        "features": bundle.features,
        "pyramid.levels": [list(l) for l in bundle.pyramid.levels],
        "pyramid.temporal_cells": bundle.pyramid.temporal_cells,
        "pyramid.subseq_len": bundle.pyramid.subseq_len,
        "pyramid.subseq_overlap": bundle.pyramid.subseq_overlap,
        "ova.labels": list(bundle.ova.labels),
        "ova.reg_C": bundle.ova.reg_C,
        "config": bundle.config_text,
    }
    arrays = {
        "gmm.weights": bundle.gmm.weights,
        "gmm.means": bundle.gmm.means,
        "gmm.variances": bundle.gmm.variances,
        "ova.weights": bundle.ova.weight_vectors,
        "ova.biases": bundle.ova.biases,
    }
    _pca_fields("pca_low", bundle.pca_low, meta, arrays)
    _pca_fields("pca_high", bundle.pca_high, meta, arrays)
    lines = [MAGIC]
    for k, v in meta.items():
        lines.append(f"meta {k} {json.dumps(v)}")
    for k, a in arrays.items():
        a = np.asarray(a)
        lines.append(f"array {k} {a.ndim} " + " ".join(str(s) for s in a.shape))
        lines.append(_fmt(a))
    body = "\n".join(lines) + "\n"
    return body + f"checksum sha256 {hashlib.sha256(body.encode()).hexdigest()}\n"


def _parse(text: str):
    first, _, _ = text.partition("\n")
    if first != MAGIC:
        if first.startswith("PFM"):
            raise VersionError(f"unsupported model file version {first!r}, expected {MAGIC}")
        raise ModelFileError("not a model file (bad magic line)")
    idx = text.rfind("checksum sha256 ")
    if idx < 0 or not text.endswith("\n"):
        raise TruncatedError("model file truncated: checksum line missing")
    body, tail = text[:idx], text[idx:].strip().split()
    if len(tail) != 3:
        raise TruncatedError("model file truncated: malformed checksum line")
    if hashlib.sha256(body.encode()).hexdigest() != tail[2]:
        raise ChecksumError("model file checksum mismatch")
    meta, arrays = {}, {}
    lines = body.split("\n")[1:]
    i = 0
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line:
            continue
        kind, name, rest = (line.split(" ", 2) + ["", ""])[:3]
        if kind == "meta":
            meta[name] = json.loads(rest)
        elif kind == "array":
            dims = [int(x) for x in rest.split()]
            shape = tuple(dims[1:1 + dims[0]])
            if i >= len(lines):
                raise TruncatedError(f"array {name}: values missing")
            vals = lines[i].split()
            i += 1
            if len(vals) != int(np.prod(shape)):
                raise TruncatedError(f"array {name}: expected {int(np.prod(shape))} values, found {len(vals)}")
            arrays[name] = np.array([float(v) for v in vals], dtype=np.float64).reshape(shape)
        else:
            raise ModelFileError(f"unknown record {kind!r}")
    return meta, arrays


def _pca_from(prefix, meta, arrays) -> Optional[PcaModel]:
    if f"{prefix}.basis" not in arrays:
        return None
    split = meta.get(f"{prefix}.subtype_split")
    outs = meta.get(f"{prefix}.output_split")
    return PcaModel(arrays[f"{prefix}.mean"], arrays[f"{prefix}.basis"], meta[f"{prefix}.scope"],
                    tuple(split) if split else None, tuple(outs) if outs else None)


def bundle_from_text(text: str):
    from .experiment import ModelBundle

    meta, arrays = _parse(text)
    try:
        gmm = GmmModel(arrays["gmm.weights"], arrays["gmm.means"], arrays["gmm.variances"])
        ova = OvaModel(tuple(meta["ova.labels"]), arrays["ova.weights"], arrays["ova.biases"],
                       float(meta["ova.reg_C"]))
        pyramid = PyramidConfig(tuple(tuple(l) for l in meta["pyramid.levels"]),
                                meta["pyramid.temporal_cells"], meta["pyramid.subseq_len"],
                                meta["pyramid.subseq_overlap"])
    except KeyError as exc:
        raise ModelFileError(f"model file lacks field {exc.args[0]}") from None
    return ModelBundle(gmm, ova, _pca_from("pca_low", meta, arrays), _pca_from("pca_high", meta, arrays),
                       meta["features"], pyramid, meta.get("config", ""))


def save_model(bundle, path) -> None:
    Path(path).write_text(bundle_to_text(bundle))


def load_model(path):
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError:
        raise ModelFileError(f"{path}: not a text model file") from None
    return bundle_from_text(text)


def describe(bundle) -> str:
    lines = [
        f"features      {bundle.features}",
        f"gmm           K={bundle.gmm.K} D={bundle.gmm.D}",
        f"pyramid       levels={list(bundle.pyramid.levels)} temporal={bundle.pyramid.temporal_cells}",
    ]
    for name in ("pca_low", "pca_high"):
        p = getattr(bundle, name)
        lines.append(f"{name:<13} " + ("none" if p is None else f"{p.input_dim} -> {p.output_dim}"
                                        + (f" split={list(p.subtype_split)}" if p.subtype_split else "")))
    lines.append(f"classifier    {len(bundle.ova.labels)} classes, dim {bundle.ova.dim}, C={bundle.ova.reg_C}")
    lines.append(f"labels        {' '.join(bundle.ova.labels)}")
    return "\n".join(lines)
