"""
Run reports: ordered check verdicts with exact values and counterexamples.
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import pandas as pd

from coarsetk.storage import convert_types, dumps

logger = logging.getLogger(__name__)

PASS, FAIL, BUDGET = "pass", "fail", "budget"


@dataclass
class CheckVerdict:
    theorem: str
    check: str
    verdict: str
    values: Dict[str, Any] = field(default_factory=dict)
    counterexample: Optional[Dict[str, Any]] = None
    seconds: Optional[float] = None

    def to_json(self, timings: bool = False) -> Dict[str, Any]:
        data = {"theorem": self.theorem, "check": self.check, "verdict": self.verdict,
                "values": convert_types(self.values)}
        if self.counterexample is not None:
            data["counterexample"] = convert_types(self.counterexample)
        if timings and self.seconds is not None:
            data["seconds"] = round(self.seconds, 3)
        return data


@dataclass
class RunReport:
    """Everything one command decided; byte-stable unless timings are requested."""

    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    checks: List[CheckVerdict] = field(default_factory=list)
    results: Dict[str, Any] = field(default_factory=dict)
    timings: bool = False

    def add(self, theorem: str, check: str, passed: bool, values: Optional[Dict[str, Any]] = None,
            counterexample: Optional[Dict[str, Any]] = None, seconds: Optional[float] = None) -> CheckVerdict:
        verdict = CheckVerdict(theorem, check, PASS if passed else FAIL, dict(values or {}), counterexample, seconds)
        self.checks.append(verdict)
        return verdict

    def add_budget(self, theorem: str, check: str, lower: Any = None, upper: Any = None,
                   seconds: Optional[float] = None) -> CheckVerdict:
        verdict = CheckVerdict(theorem, check, BUDGET, {"lower": lower, "upper": upper}, seconds=seconds)
        self.checks.append(verdict)
        return verdict

    @property
    def passed(self) -> bool:
        return all(check.verdict == PASS for check in self.checks)

    @property
    def exit_code(self) -> int:
        verdicts = {check.verdict for check in self.checks}
        if FAIL in verdicts:
            return 2
        if BUDGET in verdicts:
            return 3
        return 0

    def summary(self) -> Dict[str, int]:
        counts = {PASS: 0, FAIL: 0, BUDGET: 0}
        for check in self.checks:
            counts[check.verdict] += 1
        return counts

    def to_json(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "command": self.command,
            "config": convert_types(self.config),
            "seed": self.seed,
            "results": convert_types(self.results),
        }
        if self.checks:
            data["checks"] = [check.to_json(self.timings) for check in self.checks]
            data["summary"] = self.summary()
        return data

    def dumps(self) -> str:
        return dumps(self.to_json())


@contextmanager
def stopwatch():
    """Yields a callable returning the seconds elapsed so far."""
    start = time.perf_counter()
    yield lambda: time.perf_counter() - start


def verdict_frame(report: RunReport) -> pd.DataFrame:
    """One row per check: theorem, check, verdict and the key values."""
    rows = []
    for check in report.checks:
        values = convert_types(check.values)
        rows.append({
            "theorem": check.theorem,
            "check": check.check,
            "verdict": check.verdict,
            "values": "; ".join(f"{key}={values[key]}" for key in sorted(values)),
        })
    frame = pd.DataFrame(rows, columns=["theorem", "check", "verdict", "values"])
    logger.debug(f"Verdict frame with {len(frame)} rows for {report.command}")
    return frame


def write_csv(report: RunReport, path) -> None:
    verdict_frame(report).to_csv(path, index=False)
    logger.info(f"Wrote verdict table to {path}")
