"""Configuration parsing and the CSV / JSON artifact formats."""

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .errors import DomainError
from .homogeneous import FLOW_KINDS

COMMANDS = ("simulate", "linearize", "verify", "rescale-check", "spectrum")
SUITES = ("koiso", "quadform", "lemma2", "symbol", "fixed-points")

CSV_COLUMNS = ("t", "g11", "g22", "g33", "g12", "g13", "g23", "a", "b", "c",
               "j_density", "effvol_density", "y_norm", "deviation")
_METRIC_IDX = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


@dataclass
class ExperimentConfig:
    command: str = "simulate"
    flow: str = "KXCF"
    K: float = -1.0
    perturb: float = 0.0
    seed: int = 0
    t_end: Optional[float] = None
    tol: float = 1e-12
    grid: int = 33
    L: float = 0.5
    bumps: int = 10
    suite: str = "koiso"
    symbol: Optional[str] = None
    csv: Optional[str] = None
    json: Optional[str] = None

    def validate(self):
        """Check every field against the preconditions of the module it feeds."""
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        self.flow = str(self.flow).upper()
        if self.flow not in FLOW_KINDS:
            raise DomainError(f"unknown flow {self.flow!r}; expected one of {', '.join(FLOW_KINDS)}")
        if not (math.isfinite(self.K) and self.K < 0):
            raise DomainError("K must be a negative number")
        if not (math.isfinite(self.perturb) and self.perturb >= 0):
            raise DomainError("perturb must be a nonnegative number")
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")
        if self.t_end is not None and not (math.isfinite(self.t_end) and self.t_end > 0):
            raise DomainError("t_end must be positive")
        if not 0 < self.tol < 1:
            raise DomainError("tol must lie in (0, 1)")
        if self.grid < 17 or self.grid % 2 == 0:
            raise DomainError("grid must be odd and at least 17")
        if not 0 < self.L <= 0.5:
            raise DomainError("L must lie in (0, 0.5]")
        if self.bumps < 1:
            raise DomainError("bumps must be at least 1")
        if self.suite not in SUITES:
            raise DomainError(f"unknown suite {self.suite!r}; expected one of {', '.join(SUITES)}")
        if self.symbol is not None:
            parse_symbol(self.symbol)
        return self

    def to_dict(self):
        return asdict(self)


_KEYS = {f.name for f in fields(ExperimentConfig)}
_NUMERIC = {"K": float, "perturb": float, "t_end": float, "tol": float, "L": float,
            "seed": int, "grid": int, "bumps": int}


def _coerce(key, value):
    if key not in _KEYS:
        raise DomainError(f"unknown configuration key {key!r}")
    if value is None:
        return None
    cast = _NUMERIC.get(key, str)
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise DomainError(f"configuration key {key!r}: cannot parse {value!r}") from None


def read_config_file(path):
    """Flat ``key = value`` file; ``#`` starts a comment, blank lines are ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            out[key] = _coerce(key, value)
    return out


def build_config(command, file_values=None, overrides=None):
    values = dict(file_values or {})
    values.update({k: _coerce(k, v) for k, v in (overrides or {}).items() if v is not None})
    values["command"] = command
    return ExperimentConfig(**values).validate()


def parse_symbol(text):
    """``"l11,l12,l13,l22,l23,l33"`` to a symmetric 3x3 matrix."""
    try:
        v = [float(s) for s in str(text).split(",")]
    except ValueError:
        raise DomainError(f"symbol entries must be numbers: {text!r}") from None
    if len(v) != 6:
        raise DomainError("symbol needs six entries l11,l12,l13,l22,l23,l33")
    l11, l12, l13, l22, l23, l33 = v
    return np.array([[l11, l12, l13], [l12, l22, l23], [l13, l23, l33]])


def perturbation(seed, magnitude):
    """Seeded symmetric matrix of Frobenius norm ``magnitude``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    S = 0.5 * (A + A.T)
    return magnitude * S / np.linalg.norm(S)


def fmt(x):
    """17 significant digits, locale independent."""
    return format(float(x), ".17g")


def trajectory_rows(traj):
    for g, rec in zip(traj.metrics, traj.monitors):
        vals = [rec.t] + [g[i, j] for i, j in _METRIC_IDX] + list(rec.triple)
        vals += [rec.j_density, rec.effvol_density, rec.y_norm, rec.deviation]
        yield vals


def write_trajectory_csv(fh, traj):
    fh.write(",".join(CSV_COLUMNS) + "\n")
    for row in trajectory_rows(traj):
        fh.write(",".join(fmt(v) for v in row) + "\n")


def read_trajectory_csv(path):
    """Parse a trajectory CSV back into ``(times, metrics, columns)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise DomainError("unexpected CSV header")
        data = np.array([[float(s) for s in line.split(",")] for line in fh if line.strip()])
    metrics = np.zeros((len(data), 3, 3))
    for k, (i, j) in enumerate(_METRIC_IDX):
        metrics[:, i, j] = metrics[:, j, i] = data[:, 1 + k]
    return data[:, 0], metrics, dict(zip(CSV_COLUMNS, data.T))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(x.real), _jsonable(x.imag)]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # JSON has no NaN; emit null
        return x if math.isfinite(x) else None
    return x


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def spectrum_list(eigenvalues):
    return [[float(np.real(z)), float(np.imag(z))] for z in eigenvalues]
