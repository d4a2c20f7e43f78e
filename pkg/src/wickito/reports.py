"""Report records and deterministic CSV/JSON output."""

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"


@dataclass
class VerificationReport:
    identity: str
    residual_l2: float
    stderr: float
    tolerance: float
    passed: bool
    n_steps: int | None = None
    n_paths: int | None = None
    K: int | None = None
    convergence_table: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return _jsonable(asdict(self))


def mc_mean(values):
    """Mean and standard error with an order-independent (exact) sum."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    mean = math.fsum(v) / n
    if n < 2:
        return mean, float("nan")
    var = math.fsum((v - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def l2_norm_estimate(values):
    """``sqrt(E[X^2])`` with a delta-method standard error."""
    m2, se2 = mc_mean(np.square(values))
    root = math.sqrt(max(m2, 0.0))
    se = se2 / (2.0 * root) if root > 0 else 0.0
    return root, se


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
    path.write_text(json.dumps(body, indent=2, sort_keys=False) + "\n")
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    """Write rows with ``repr`` floats so identical data gives identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    return header, rows


def write_coeff_table(path, coeffs):
    """Golden coefficient table with columns ``k, value``."""
    return write_csv(path, ["k", "value"], ((k, float(c)) for k, c in enumerate(coeffs)))


def read_coeff_table(path):
    header, rows = read_csv(path)
    if header != ["k", "value"]:
        raise ValueError(f"unexpected header {header}")
    return np.array([float(r[1]) for r in rows])
