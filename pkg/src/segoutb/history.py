"""Run histories and their line-delimited JSON serialization.

A history file is a header line, one line per evaluation and a footer line
marking completion. Writers append as the run progresses, so an interrupted
run leaves a readable prefix without footer.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class TruncatedHistory(ValueError):
    pass


@dataclass(frozen=True)
class EvalRecord:
    index: int
    x: tuple
    f: float
    g: tuple
    h: tuple
    iteration: int | None = None          # None for initial-design points
    trust_feasible: bool | None = None
    tau_g: tuple = ()
    tau_h: tuple = ()
    scale: float | None = None
    acq: float | None = None
    trust_violation: float | None = None

    def to_json(self) -> dict:
        return {"type": "eval", "index": self.index, "x": list(self.x), "f": self.f,
                "g": list(self.g), "h": list(self.h), "iteration": self.iteration,
                "trust_feasible": self.trust_feasible, "tau_g": list(self.tau_g),
                "tau_h": list(self.tau_h), "scale": self.scale, "acq": self.acq,
                "trust_violation": self.trust_violation}

    @classmethod
    def from_json(cls, rec: dict) -> "EvalRecord":
        return cls(index=rec["index"], x=tuple(rec["x"]), f=rec["f"], g=tuple(rec["g"]),
                   h=tuple(rec["h"]), iteration=rec.get("iteration"),
                   trust_feasible=rec.get("trust_feasible"), tau_g=tuple(rec.get("tau_g", ())),
                   tau_h=tuple(rec.get("tau_h", ())), scale=rec.get("scale"),
                   acq=rec.get("acq"), trust_violation=rec.get("trust_violation"))

    @property
    def violation(self) -> float:
        worst = 0.0
        if self.g:
            worst = max(worst, max(-v for v in self.g))
        if self.h:
            worst = max(worst, max(abs(v) for v in self.h))
        return worst


@dataclass
class RunHistory:
    problem: str
    seed: int
    config: dict
    records: list[EvalRecord] = field(default_factory=list)
    status: str = "running"               # running | complete | aborted
    message: str = ""
    solver: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def complete(self) -> bool:
        return self.status == "complete"

    @property
    def X(self) -> np.ndarray:
        return np.array([r.x for r in self.records], dtype=float)

    @property
    def f(self) -> np.ndarray:
        return np.array([r.f for r in self.records], dtype=float)

    @property
    def violations(self) -> np.ndarray:
        return np.array([r.violation for r in self.records], dtype=float)

    def header(self) -> dict:
        return {"type": "header", "schema_version": SCHEMA_VERSION, "problem": self.problem,
                "solver": self.solver, "seed": self.seed, "config": self.config}

    def footer(self) -> dict:
        return {"type": "footer", "status": self.status, "n_evals": len(self.records),
                "message": self.message}

    def to_lines(self) -> list[str]:
        lines = [json.dumps(self.header())]
        lines += [json.dumps(r.to_json()) for r in self.records]
        if self.status != "running":
            lines.append(json.dumps(self.footer()))
        return lines

    def dumps(self) -> str:
        return "\n".join(self.to_lines()) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunHistory":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise TruncatedHistory("empty history")
        head = json.loads(lines[0])
        if head.get("type") != "header":
            raise ValueError("history does not start with a header record")
        if head.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {head.get('schema_version')}")
        hist = cls(problem=head["problem"], seed=head["seed"], config=head["config"],
                   solver=head.get("solver", ""))
        for ln in lines[1:]:
            try:
                rec = json.loads(ln)
            except json.JSONDecodeError:
                # torn final line from an interrupted writer
                break
            if rec["type"] == "eval":
                hist.records.append(EvalRecord.from_json(rec))
            elif rec["type"] == "footer":
                hist.status = rec["status"]
                hist.message = rec.get("message", "")
        return hist

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "RunHistory":
        return cls.loads(Path(path).read_text())


class HistoryWriter:
    """Append-only writer used while a run is in progress."""

    def __init__(self, path, history: RunHistory):
        self.path = Path(path)
        self.tmp = self.path.with_suffix(self.path.suffix + ".part")
        self._fh = open(self.tmp, "w")
        self._fh.write(json.dumps(history.header()) + "\n")
        self._fh.flush()

    def append(self, record: EvalRecord) -> None:
        self._fh.write(json.dumps(record.to_json()) + "\n")
        self._fh.flush()

    def close(self, history: RunHistory) -> None:
        self._fh.write(json.dumps(history.footer()) + "\n")
        self._fh.close()
        self.tmp.replace(self.path)
