"""Model files: versioned JSON with full-precision parameters."""

import logging

import numpy as np

from odskit.models.mlp import MlpClassifier
from odskit.numcore import DimensionError
from odskit.storage import json_store

logger = logging.getLogger("odskit")

MODEL_KIND = "mlp_classifier"


def save(model: MlpClassifier, path) -> None:
    json_store.save_document(path, MODEL_KIND, {
        "layer_sizes": model.layer_sizes,
        "layers": [
            {"weight": w.tolist(), "bias": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
    })


def load(path) -> MlpClassifier:
    doc = json_store.load_document(path, MODEL_KIND)
    try:
        sizes = doc["layer_sizes"]
        layers = doc["layers"]
        weights = [np.array(layer["weight"], dtype=np.float64) for layer in layers]
        biases = [np.array(layer["bias"], dtype=np.float64) for layer in layers]
        return MlpClassifier(layer_sizes=sizes, weights=weights, biases=biases)
    except (KeyError, TypeError, ValueError, IndexError, DimensionError) as e:
        raise json_store.DocumentFormatError(f"Model document {path} is inconsistent: {e}")
