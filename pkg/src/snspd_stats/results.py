"""Result containers with reproducible serialization.

Every artifact embeds the resolved configuration and a content digest of
its numeric payload; rerunning with the same configuration reproduces the
payload byte for byte (floats are serialized via repr, which round-trips).
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np


def _payload_digest(arr: np.ndarray) -> str:
    text = ",".join(repr(float(x)) for x in np.asarray(arr, dtype=float).ravel())
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ConditionalMatrix:
    """Click-number probabilities conditioned on the photon number.

    ``entries[n, m]`` is the probability of n clicks given m photons at
    unit efficiency and zero dark rate; columns over n sum to one when the
    row range covers every reachable click number.
    """

    entries: np.ndarray
    scenario: str
    config: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def m_max(self) -> int:
        return self.entries.shape[1] - 1

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def digest(self) -> str:
        return _payload_digest(self.entries)

    def to_json_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "config": self.config,
            "meta": self.meta,
            "digest": self.digest(),
            "entries": [[repr(float(v)) for v in row] for row in self.entries],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# scenario=%s digest=%s\n" % (self.scenario, self.digest()))
        buf.write("# config=%s\n" % json.dumps(self.config, sort_keys=True))
        buf.write("n\\m," + ",".join(str(m) for m in range(self.m_max + 1)) + "\n")
        for n, row in enumerate(self.entries):
            buf.write(str(n) + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()


@dataclass(frozen=True)
class ClickDistribution:
    """Normalized click-number probabilities with provenance metadata."""

    probs: np.ndarray
    scenario: str
    config: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def total(self) -> float:
        return float(np.sum(self.probs))

    def mean_clicks(self) -> float:
        return float(np.arange(len(self.probs)) @ self.probs)

    def digest(self) -> str:
        return _payload_digest(self.probs)

    def to_json_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "config": self.config,
            "meta": self.meta,
            "digest": self.digest(),
            "probs": [repr(float(v)) for v in self.probs],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# scenario=%s digest=%s\n" % (self.scenario, self.digest()))
        buf.write("# config=%s\n" % json.dumps(self.config, sort_keys=True))
        buf.write("n,prob\n")
        for n, v in enumerate(self.probs):
            buf.write("%d,%s\n" % (n, repr(float(v))))
        return buf.getvalue()
