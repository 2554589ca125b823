"""Per-trial optimization records and their JSONL form."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class TraceRecord:
    """One evaluated sample.

    ``index`` is the 1-based sample count and ``iteration`` the loop
    iteration that produced it (0 for the initial design).  ``mu_f_at_next``
    and ``sigma_f_at_next`` are the objective posterior at this point given
    all *earlier* samples; mu is in raw objective units, sigma in model units.
    """

    index: int
    iteration: int
    x: list
    f: float
    c: list
    feasible: bool
    f_plus: float | None = None
    regret: float | None = None
    acquisition: str = "design"
    acq_value: float | None = None
    mu_f_at_next: float | None = None
    sigma_f_at_next: float | None = None
    jitter_used: float | None = None
    clamp_events: int = 0
    candidate_index: int | None = None
    length_scale_f: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class RegretTrace:
    trial: int
    seed: int
    n_initial: int
    records: list = field(default_factory=list)
    failed: bool = False
    error: str | None = None
    wall_clock: float = 0.0

    def __len__(self):
        return len(self.records)

    @property
    def first_feasible_index(self) -> int | None:
        for r in self.records:
            if r.feasible:
                return r.index
        return None

    @property
    def X(self) -> np.ndarray:
        return np.array([r.x for r in self.records], dtype=float)

    @property
    def f_values(self) -> np.ndarray:
        return np.array([r.f for r in self.records], dtype=float)

    def record_at(self, index: int) -> TraceRecord | None:
        """Record with the given 1-based sample index."""
        if 1 <= index <= len(self.records):
            return self.records[index - 1]
        return None

    def incumbent_at(self, index: int) -> float | None:
        rec = self.record_at(index)
        return None if rec is None else rec.f_plus

    def set_reference(self, f_star: float | None) -> None:
        """Recompute every record's regret against ``f_star``."""
        for r in self.records:
            r.regret = None if (r.f_plus is None or f_star is None) else r.f_plus - f_star

    def header(self) -> dict:
        return {"trial": self.trial, "seed": self.seed, "n_initial": self.n_initial,
                "failed": self.failed, "error": self.error,
                "first_feasible_index": self.first_feasible_index}

    def to_jsonl(self) -> str:
        lines = [json.dumps({"header": self.header()}, sort_keys=True)]
        lines += [r.to_json() for r in self.records]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "RegretTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])["header"]
        trace = cls(head["trial"], head["seed"], head["n_initial"],
                    failed=head["failed"], error=head["error"])
        trace.records = [TraceRecord(**json.loads(ln)) for ln in lines[1:]]
        return trace
