"""Python access to the semshift C++ core.

Structured values are plain dicts; point data comes back as numpy arrays.
"""

import json

from . import _semshift
from ._semshift import DslError, InfeasibleParams, IoError, Model, SceneBundle, read_bundle, write_bundle

GROUPS = ("furniture", "wall", "opening", "other")


def generate_scene(seed=0, **params):
    """Synthetic room; keyword arguments override generator parameters."""
    return _semshift.generate_scene(json.dumps({"seed": seed, **params}))


def parse_dsl(text):
    return json.loads(_semshift.dsl_parse(text))


def serialize_dsl(scene):
    return _semshift.dsl_serialize(json.dumps(scene))


canonical_dsl = _semshift.dsl_canonical


def iou3d(a, b):
    return _semshift.iou3d(json.dumps(a), json.dumps(b))


def evaluate_dsl(pred, gt):
    """Layout and box F1 per IoU threshold for two DSL documents."""
    return json.loads(_semshift.evaluate_dsl(pred, gt))


def default_config():
    return json.loads(_semshift.default_config())


def train(bundles, config=None, **overrides):
    """Trains the shift module. `overrides` patch the `train` section, e.g. steps=50."""
    cfg = default_config() if config is None else config
    cfg = {**cfg, "train": {**cfg.get("train", {}), **overrides}}
    return _semshift.train(json.dumps(cfg), list(bundles))


def evaluate(model, bundles):
    return json.loads(_semshift.evaluate(model, list(bundles)))


def control_boxes(model, bundle, target, intensity=1.0):
    return json.loads(model.control_boxes(bundle, target, intensity))


__all__ = [
    "GROUPS",
    "DslError",
    "InfeasibleParams",
    "IoError",
    "Model",
    "SceneBundle",
    "canonical_dsl",
    "control_boxes",
    "default_config",
    "evaluate",
    "evaluate_dsl",
    "generate_scene",
    "iou3d",
    "parse_dsl",
    "read_bundle",
    "serialize_dsl",
    "train",
    "write_bundle",
]
