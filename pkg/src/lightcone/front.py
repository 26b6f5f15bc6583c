"""Light-cone fronts (level sets of a commutator or bound) and exponent fits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InsufficientData, InvalidInput

DEFAULT_EPSILON = 0.1
MIN_FIT_POINTS = 5


def _grid(curve):
    """(r per row, times, values[row, time]) for a BoundCurve or CommutatorProfile."""
    return np.asarray(curve.distances, float), np.asarray(curve.times, float), np.asarray(curve.values, float)


def extract_front(curve, epsilon: float = DEFAULT_EPSILON) -> list[tuple[float, float]]:
    """First time each row reaches ``epsilon``, linearly interpolated in t.

    Rows sharing a distance are merged by taking the pointwise maximum (the
    earliest crossing).  Rows that never cross are dropped.
    """
    if not 0 < epsilon < 2:
        raise InvalidInput(f"epsilon must lie in (0, 2), got {epsilon}")
    r, t, values = _grid(curve)
    merged: dict[float, np.ndarray] = {}
    for rv, row in zip(r, values):
        merged[rv] = np.maximum(merged[rv], row) if rv in merged else row
    points = []
    for rv in sorted(merged):
        row = merged[rv]
        hits = np.flatnonzero(row >= epsilon)
        if hits.size == 0:
            continue
        k = int(hits[0])
        if k == 0:
            t_front = t[0]
        else:
            v0, v1 = row[k - 1], row[k]
            t_front = t[k - 1] + (epsilon - v0) * (t[k] - t[k - 1]) / (v1 - v0)
        points.append((float(rv), float(t_front)))
    return points


@dataclass
class FrontFit:
    epsilon: float | None
    points: list[tuple[float, float]]
    zeta_hat: float
    zeta_stderr: float
    fit_window: tuple[float, float]
    intercept: float = 0.0
    beta_probe: dict = field(default_factory=dict)

    @property
    def sane(self) -> bool:
        return 0.0 < self.zeta_hat <= 1.5

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "points": [list(p) for p in self.points],
            "zeta_hat": self.zeta_hat,
            "zeta_stderr": self.zeta_stderr,
            "fit_window": list(self.fit_window),
            "intercept": self.intercept,
            "sane": self.sane,
            "beta_probe": self.beta_probe,
        }


def fit_exponent(points, window=None, epsilon: float | None = None) -> FrontFit:
    """Least-squares slope of log t against log r inside ``window``."""
    pts = sorted((float(r), float(t)) for r, t in points)
    if window is None:
        window = (pts[0][0], pts[-1][0]) if pts else (0.0, 0.0)
    lo, hi = window
    sel = [(r, t) for r, t in pts if lo <= r <= hi]
    if len(sel) < MIN_FIT_POINTS:
        raise InsufficientData(f"need at least {MIN_FIT_POINTS} front points in window, got {len(sel)}")
    arr = np.array(sel)
    if np.any(arr <= 0):
        raise InvalidInput("front points must have r > 0 and t > 0")
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise InvalidInput("front points must be strictly increasing in r")
    res = stats.linregress(np.log(arr[:, 0]), np.log(arr[:, 1]))
    return FrontFit(epsilon, sel, float(res.slope), float(res.stderr), (float(lo), float(hi)),
                    float(res.intercept))


@dataclass
class BetaProbe:
    beta: float
    t: list[float]
    values: list[float]
    decreasing: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def beta_probe(curve_fn, beta: float, t_list) -> BetaProbe:
    """Bound evaluated along the ray r = t**beta.

    ``decreasing`` is true when the sequence strictly falls across the probed
    times, or is identically zero.
    """
    if not beta > 0:
        raise InvalidInput(f"beta must be > 0, got {beta}")
    ts = [float(t) for t in t_list]
    vals = [float(curve_fn(t**beta, t)) for t in ts]
    arr = np.array(vals)
    decreasing = bool(np.all(arr == 0) or np.all(np.diff(arr) < 0))
    return BetaProbe(float(beta), ts, vals, decreasing)
