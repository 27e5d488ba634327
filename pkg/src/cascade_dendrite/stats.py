"""Small statistics helpers: least squares on log scales and tail fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientDataError, ValidationError


@dataclass(frozen=True)
class LineFit:
    """OLS result; iterates as (slope, intercept, stderr, r_squared)."""

    slope: float
    intercept: float
    stderr: float  # standard error of the slope
    r_squared: float
    n: int

    def __iter__(self) -> Iterator[float]:
        return iter((self.slope, self.intercept, self.stderr, self.r_squared))


def fit_line(x, y=None) -> LineFit:
    """Ordinary least squares y = a + b x with the slope's standard error.

    Accepts either two coordinate arrays or one list of (x, y) pairs.
    Needs at least three points and non-degenerate x values.
    """
    if y is None:
        pts = np.asarray(x, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValidationError("points must be (x, y) pairs")
        x, y = pts[:, 0], pts[:, 1]
    else:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be 1-d arrays of equal length")
    n = x.size
    if n < 3:
        raise InsufficientDataError("need at least three points", usable=n)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValidationError("x values are all identical")
    sxy = float(np.sum((x - xm) * (y - ym)))
    slope = sxy / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    stderr = math.sqrt(max(ss_res, 0.0) / (n - 2) / sxx)
    return LineFit(slope=slope, intercept=intercept, stderr=stderr, r_squared=r2, n=n)


@dataclass(frozen=True)
class TailFit:
    """Tail decay fit; iterates as (rate, r_squared)."""

    mode: str
    rate: float
    stderr: float
    r_squared: float
    thresholds: Tuple[float, ...]
    counts: Tuple[int, ...]

    def __iter__(self) -> Iterator[float]:
        return iter((self.rate, self.r_squared))


def tail_fit(
    samples: Sequence[float],
    thresholds: Optional[Sequence[float]] = None,
    mode: str = "survival",
    min_count: int = 20,
) -> TailFit:
    """Fit the decay of a distribution tail.

    mode="survival": slope of log P(X > t) against t; rate is the decay
    constant c in P(X > t) ~ e^{-c t}, positive for a decaying tail.

    mode="left_loglog": slope of log(-log P(X <= t)) against log(1/t),
    which estimates g in P(X <= t) ~ exp(-c t^{-g}) near zero.

    Thresholds default to a geometric grid over the positive sample range;
    only thresholds where the tail still holds at least min_count samples
    (and not all of them) enter the fit.  Too few usable thresholds raises
    with the usable thresholds listed.
    """
    x = np.asarray(samples, dtype=np.float64)
    if mode not in ("survival", "left_loglog"):
        raise ValidationError("mode must be 'survival' or 'left_loglog'")
    if x.size < 100:
        raise InsufficientDataError("need at least 100 samples", usable=int(x.size))
    x = np.sort(x)
    n = x.size
    if thresholds is None:
        pos = x[x > 0]
        if pos.size == 0:
            raise InsufficientDataError("no positive samples", usable=0)
        lo, hi = float(pos[0]), float(pos[-1])
        if lo == hi:
            raise ValidationError("samples are all identical")
        thresholds = np.exp(np.linspace(math.log(lo), math.log(hi), 14))[1:-1]
    ts, fs, cs = [], [], []
    for t in np.asarray(thresholds, dtype=np.float64):
        if mode == "survival":
            count = n - int(np.searchsorted(x, t, side="right"))
        else:
            count = int(np.searchsorted(x, t, side="right"))
        if min_count <= count < n:
            ts.append(float(t))
            fs.append(count / n)
            cs.append(count)
    if len(ts) < 3:
        raise InsufficientDataError(
            f"only {len(ts)} thresholds kept at least {min_count} tail samples "
            f"(usable: {ts}); widen the sample or the threshold grid",
            usable=len(ts),
        )
    fs = np.asarray(fs)
    if mode == "survival":
        fit = fit_line(np.asarray(ts), np.log(fs))
        rate = -fit.slope
    else:
        if np.any(fs >= 1.0):
            raise ValidationError("left tail saturates at some threshold")
        fit = fit_line(np.log(1.0 / np.asarray(ts)), np.log(-np.log(fs)))
        rate = fit.slope
    return TailFit(
        mode=mode,
        rate=float(rate),
        stderr=fit.stderr,
        r_squared=fit.r_squared,
        thresholds=tuple(ts),
        counts=tuple(cs),
    )
