"""Versioned JSON model container.

Matrices are stored as base64 little-endian float64 so files round-trip
exactly and are byte-identical for identical parameters.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict

import numpy as np

from .g2p import G2PModel, G2PParams
from .lexicon import Lexicon
from .p2g import P2GModel, P2GParams

FORMAT = "polyaug-model"
VERSION = 1


class ModelFileError(ValueError):
    pass


def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).astype(np.float64)


def dumps_model(model) -> str:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "role": model.role,
        "fingerprint": model.fingerprint,
        "hyperparameters": asdict(model.hp),
        "history": [list(h) for h in model.history],
        "params": {k: _encode(v) for k, v in model.params.items()},
    }
    return json.dumps(doc, indent=1)


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_model(model))
        f.write("\n")


def load_model(path, lex: Lexicon, role: str | None = None):
    """Load a G2P or P2G model and check it was trained on ``lex``."""
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"{path}: not a model file ({e.msg})") from None
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise ModelFileError(f"{path}: unsupported model format")
    if role is not None and doc["role"] != role:
        raise ModelFileError(f"{path}: expected a {role} model, found {doc['role']}")
    if doc["fingerprint"] != lex.fingerprint:
        raise ModelFileError(
            f"{path}: lexicon fingerprint {doc['fingerprint']} does not match the supplied lexicon ({lex.fingerprint})"
        )
    params = {k: _decode(v) for k, v in doc["params"].items()}
    if doc["role"] == "g2p":
        hp = G2PParams(**doc["hyperparameters"])
        model = G2PModel(hp, params, doc["fingerprint"], lex.n_chars, len(lex.pos_tags))
    elif doc["role"] == "p2g":
        hp = P2GParams(**doc["hyperparameters"])
        model = P2GModel(hp, params, doc["fingerprint"], lex.n_pinyin)
    else:
        raise ModelFileError(f"{path}: unknown role {doc['role']!r}")
    model.history = [tuple(h) for h in doc.get("history", [])]
    return model
