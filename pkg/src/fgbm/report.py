"""Check records and JSON/CSV report helpers shared by verifiers and the CLI."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["CheckResult", "mc_check", "bound_check", "range_check", "write_json", "write_csv", "jsonable"]


@dataclass
class CheckResult:
    """One verifier outcome: ``passed`` iff ``|estimate - target| <= tolerance``
    (or the stated inequality / range holds)."""

    name: str
    passed: bool
    target: float | None = None
    estimate: float | None = None
    stderr: float | None = None
    tolerance: float | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return jsonable(asdict(self))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"[{status}] {self.name}"]
        if self.estimate is not None:
            parts.append(f"estimate={self.estimate:.6g}")
        if self.target is not None:
            parts.append(f"target={self.target:.6g}")
        if self.tolerance is not None:
            parts.append(f"tol={self.tolerance:.3g}")
        return " ".join(parts)


def mc_check(name, target, estimate, stderr, n_se=3.0, rel=0.0, detail=None) -> CheckResult:
    """Two-sided Monte Carlo check with tolerance ``n_se*stderr + rel*|target|``."""
    tol = n_se * stderr + rel * abs(target)
    return CheckResult(
        name,
        bool(abs(estimate - target) <= tol),
        float(target),
        float(estimate),
        float(stderr),
        float(tol),
        detail or {},
    )


def bound_check(name, bound, estimate, stderr, n_se=3.0, detail=None) -> CheckResult:
    """One-sided check ``estimate <= bound + n_se*stderr``."""
    tol = n_se * stderr
    return CheckResult(
        name, bool(estimate <= bound + tol), float(bound), float(estimate), float(stderr), float(tol), detail or {}
    )


def range_check(name, estimate, low, high, detail=None) -> CheckResult:
    d = {"low": low, "high": high}
    d.update(detail or {})
    return CheckResult(name, bool(low <= estimate <= high), None, float(estimate), None, None, d)


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
