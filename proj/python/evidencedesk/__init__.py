"""Python bindings for the evidencedesk C++ core."""

import json

from ._evidencedesk import (
    EvidenceDeskError,
    benchmark_counts,
    bh_adjust,
    binomial_test,
    friedman,
    kruskal_wallis,
    spearman_brown,
    validate_format,
)
from ._evidencedesk import ask_json as _ask_json


def ask(store, index, transcript, question, **config):
    """Answer `question` with a scripted transcript standing in for the model."""
    return json.loads(_ask_json(str(store), str(index), str(transcript), question, json.dumps(config)))


__all__ = [
    "EvidenceDeskError",
    "ask",
    "benchmark_counts",
    "bh_adjust",
    "binomial_test",
    "friedman",
    "kruskal_wallis",
    "spearman_brown",
    "validate_format",
]
