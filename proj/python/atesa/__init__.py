"""Aspect term extraction and aspect sentiment tagging over transformer ensembles."""

import json
import os

from ._atesa import (
    AtesaError,
    fuse,
    iob_to_spans,
    spans_to_iob,
    tokenize,
    write_ensemble,
)
from . import _atesa

__all__ = [
    "AtesaError",
    "Analyzer",
    "Service",
    "compute_metrics",
    "corpus_stats",
    "fuse",
    "iob_to_spans",
    "load_corpus",
    "spans_to_iob",
    "split",
    "tokenize",
    "train_head",
    "write_ensemble",
]


def _read(path):
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def load_corpus(path, format):
    """Labeled examples of an XML corpus as dicts."""
    return [json.loads(line) for line in _atesa._corpus_examples(_read(path), format)]


def corpus_stats(path, format, top_n=10):
    return json.loads(_atesa._corpus_stats(_read(path), format, top_n))


def split(examples, train_fraction=0.8, validation_fraction=0.1, seed=0):
    """Stratified (train, validation, test) index lists."""
    lines = [json.dumps(e) for e in examples]
    return _atesa._split(lines, train_fraction, validation_fraction, seed)


def compute_metrics(predictions, golds, class_count):
    return json.loads(_atesa._compute_metrics(predictions, golds, class_count))


def train_head(examples, out_dir, head="linear", branch="ate", hidden_size=32, encoder_seed=0,
               epochs=2, batch_size=4, learning_rate=1e-5, seed=0, lstm_units=256,
               dropout=0.3):
    """Trains one head over a frozen stub encoder and saves it; returns the epoch history."""
    lines = [json.dumps(e) for e in examples]
    history = _atesa._train_head(head, branch, lines, os.fspath(out_dir), hidden_size,
                                 encoder_seed, epochs, batch_size, learning_rate, seed,
                                 lstm_units, dropout)
    return json.loads(history)


class Analyzer:
    def __init__(self, ate_manifest, atsa_manifest):
        self._impl = _atesa._Analyzer(os.fspath(ate_manifest), os.fspath(atsa_manifest))

    def analyze(self, text):
        return json.loads(self._impl.analyze(text))


class Service:
    """Transport-free request handling of the REST service."""

    def __init__(self, ate_manifest=None, atsa_manifest=None, max_upload_bytes=1 << 20):
        self._impl = _atesa._Service(
            None if ate_manifest is None else os.fspath(ate_manifest),
            None if atsa_manifest is None else os.fspath(atsa_manifest),
            max_upload_bytes)

    @property
    def ready(self):
        return self._impl.ready

    def analyze(self, payload):
        body = payload if isinstance(payload, str) else json.dumps(payload)
        status, text = self._impl.handle_analyze(body)
        return status, json.loads(text)

    def analyze_file(self, upload):
        error = self._impl.check_upload(upload)
        if error is not None:
            return error[0], [json.loads(error[1])]
        stream = self._impl.analyze_file(upload)
        return 200, [json.loads(line) for line in stream.splitlines()]
