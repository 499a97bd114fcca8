"""Python bindings for the singing voice conversion core."""

import json

import torch  # noqa: F401  loads the libtorch shared libraries

from . import _svcpy
from ._svcpy import (
    ConversionModel,
    ValidationError,
    cos_sim,
    extract_f0,
    extract_mel,
    fit_codebook,
    frame_count,
    make_toy_corpus,
    ncc,
    ncc_tracks,
    pseudo_content,
    read_feature_file,
    read_wav,
    write_feature_file,
    write_wav,
)

__version__ = _svcpy.version()


def _merge(base, overrides):
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def config(profile="desk", **sections):
    """Profile defaults with nested overrides, e.g. config(train={"max_steps": 10})."""
    merged = _merge(json.loads(_svcpy.profile(profile)), sections)
    return json.loads(_svcpy.validate_config(json.dumps(merged)))


def extract_features(manifest, out, cfg=None):
    return _svcpy.extract_features(str(manifest), str(out), json.dumps(cfg or config()))


def train(manifest, out, cfg=None, features=None, resume=None):
    """Trains (or resumes) and returns the path of the final checkpoint."""
    return _svcpy.train(str(manifest), str(out), json.dumps(cfg or config()),
                        None if features is None else str(features),
                        None if resume is None else str(resume))


__all__ = [
    "ConversionModel", "ValidationError", "config", "cos_sim", "extract_f0", "extract_features",
    "extract_mel", "fit_codebook", "frame_count", "make_toy_corpus", "ncc", "ncc_tracks",
    "pseudo_content", "read_feature_file", "read_wav", "train", "write_feature_file", "write_wav",
]
