"""Multi-slope distance-dependent path loss models.

A model is a piecewise power law: on the distance interval
[R_{n-1}, R_n) the large-scale gain is Upsilon_n * d**(-alpha_n).
The leading coefficients of all slopes after the first are derived
from the continuity requirement at each breakpoint, so a model is
fully determined by the exponents, the interior breakpoints and the
first-slope coefficient.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PathLossModel",
    "make_single_slope",
    "make_dual_slope_default",
    "load_model",
    "dump_model",
    "beta",
]

# Relative tolerance for the continuity check at each breakpoint.
_CONTINUITY_RTOL = 1e-12


@dataclass(frozen=True)
class PathLossModel:
    """Immutable N-slope path loss model.

    Parameters
    ----------
    breakpoints_m : tuple of float
        Full breakpoint list (R_0, ..., R_N) in meters, strictly
        increasing, with R_0 = 0 and R_N = +inf.
    alphas : tuple of float
        Path loss exponents (alpha_1, ..., alpha_N), non-decreasing,
        with alpha_N > 2 so far-field sums stay finite.
    upsilons : tuple of float
        Linear-scale slope coefficients (Upsilon_1, ..., Upsilon_N).
        Consecutive slopes must agree at their shared breakpoint.
    """

    breakpoints_m: tuple
    alphas: tuple
    upsilons: tuple

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints_m)
        al = tuple(float(a) for a in self.alphas)
        up = tuple(float(u) for u in self.upsilons)
        object.__setattr__(self, "breakpoints_m", bp)
        object.__setattr__(self, "alphas", al)
        object.__setattr__(self, "upsilons", up)
        if len(bp) < 2 or bp[0] != 0.0 or not math.isinf(bp[-1]):
            raise ValueError("breakpoints must run from 0 to +inf")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(al) != len(bp) - 1 or len(up) != len(al):
            raise ValueError("need one exponent and one coefficient per slope")
        if any(a < 0 for a in al):
            raise ValueError("exponents must be non-negative")
        if any(a2 < a1 for a1, a2 in zip(al, al[1:])):
            raise ValueError("exponents must be non-decreasing")
        if al[-1] <= 2.0:
            raise ValueError("last exponent must exceed 2")
        if any(u <= 0 for u in up):
            raise ValueError("slope coefficients must be positive")
        for n in range(len(al) - 1):
            r = bp[n + 1]
            left = up[n] * r ** (-al[n])
            right = up[n + 1] * r ** (-al[n + 1])
            if abs(left - right) > _CONTINUITY_RTOL * max(abs(left), abs(right)):
                raise ValueError(
                    f"discontinuity at breakpoint {r} m: {left!r} != {right!r}"
                )

    @property
    def n_slopes(self):
        return len(self.alphas)

    @property
    def interior_breakpoints_m(self):
        """Breakpoints without the implicit 0 and +inf, as an array."""
        return np.asarray(self.breakpoints_m[1:-1], dtype=np.float64)

    @property
    def alpha_array(self):
        return np.asarray(self.alphas, dtype=np.float64)

    @property
    def upsilon_array(self):
        return np.asarray(self.upsilons, dtype=np.float64)


def _derive_upsilons(alphas, interior_breakpoints_m, upsilon1):
    """Chain the continuity rule across breakpoints."""
    ups = [float(upsilon1)]
    for r, a_lo, a_hi in zip(interior_breakpoints_m, alphas, alphas[1:]):
        ups.append(ups[-1] * float(r) ** (float(a_hi) - float(a_lo)))
    return tuple(ups)


def _from_slopes(alphas, interior_breakpoints_m, upsilon1):
    alphas = tuple(float(a) for a in alphas)
    interior = tuple(float(r) for r in interior_breakpoints_m)
    if len(interior) != len(alphas) - 1:
        raise ValueError("need exactly one breakpoint between consecutive slopes")
    return PathLossModel(
        breakpoints_m=(0.0, *interior, math.inf),
        alphas=alphas,
        upsilons=_derive_upsilons(alphas, interior, upsilon1),
    )


def make_single_slope(alpha, upsilon1=1.0):
    """Single power law beta(d) = upsilon1 * d**(-alpha) for all d."""
    return _from_slopes((alpha,), (), upsilon1)


def make_dual_slope_default():
    """Default two-slope model: near exponent 2.1 up to 100 m, far exponent 4.

    The far-slope coefficient follows from continuity at 100 m rather
    than being specified independently.
    """
    return _from_slopes((2.1, 4.0), (100.0,), 8.3e-4)


def load_model(path):
    """Load a model from a JSON file.

    The file holds ``{"breakpoints_m": [...], "alphas": [...],
    "upsilon1": ...}`` where ``breakpoints_m`` lists only the interior
    breakpoints. All model invariants are validated; an inconsistent
    file raises ValueError.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        interior = raw["breakpoints_m"]
        alphas = raw["alphas"]
        upsilon1 = raw["upsilon1"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed model file {path}: {exc}") from exc
    upsilons = raw.get("upsilons")
    if upsilons is not None:
        # Explicit coefficients are accepted but still continuity-checked.
        return PathLossModel(
            breakpoints_m=(0.0, *map(float, interior), math.inf),
            alphas=tuple(map(float, alphas)),
            upsilons=tuple(map(float, upsilons)),
        )
    return _from_slopes(alphas, interior, upsilon1)


def dump_model(model, path):
    """Write a model to JSON in the same shape `load_model` reads."""
    payload = {
        "breakpoints_m": list(model.breakpoints_m[1:-1]),
        "alphas": list(model.alphas),
        "upsilon1": model.upsilons[0],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def beta(model, d):
    """Large-scale channel gain at distance d (meters).

    Parameters
    ----------
    model : PathLossModel
    d : float or array_like
        Strictly positive distance(s).

    Returns
    -------
    float or numpy.ndarray
        Linear-scale gain, same shape as `d`.
    """
    arr = np.asarray(d, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(~np.isfinite(arr)):
        raise ValueError("distances must be strictly positive and finite")
    idx = np.searchsorted(model.interior_breakpoints_m, arr, side="right")
    ups = model.upsilon_array[idx]
    als = model.alpha_array[idx]
    out = ups * arr ** (-als)
    if np.isscalar(d) or arr.ndim == 0:
        return float(out)
    return out
