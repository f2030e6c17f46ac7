"""Self-contained special functions for the closed-form expressions.

Only two functions are needed: the regularized upper incomplete gamma
and the principal branch of the Lambert W function. Both are written
against plain floats with no external dependencies so the analytic
layer stays importable anywhere.
"""

import math

__all__ = ["upper_gamma_regularized", "lower_gamma_regularized", "lambert_w0"]

_EPS = 1e-16
_ITMAX = 1000
_FPMIN = 1e-300
_INV_E = math.exp(-1.0)


def _lower_series(s, x):
    """Regularized lower incomplete gamma by series, for x < s + 1."""
    ap = s
    total = 1.0 / s
    term = total
    for _ in range(_ITMAX):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _upper_cf(s, x):
    """Regularized upper incomplete gamma by Lentz continued fraction."""
    b = x + 1.0 - s
    c = 1.0 / _FPMIN
    d = 1.0 / b if b != 0.0 else 1.0 / _FPMIN
    h = d
    for i in range(1, _ITMAX + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    arg = -x + s * math.log(x) - math.lgamma(s)
    if arg < -745.0:
        # The prefactor underflows to zero long before h matters.
        return 0.0
    return math.exp(arg) * h


def upper_gamma_regularized(s, x):
    """Q(s, x), the upper incomplete gamma ratio Gamma(s, x)/Gamma(s).

    Parameters
    ----------
    s : float
        Shape, strictly positive.
    x : float
        Truncation point, non-negative; +inf is accepted and handled
        exactly.

    Returns
    -------
    float
        Value in [0, 1]; Q(s, 0) = 1 and Q(s, +inf) = 0.
    """
    s = float(s)
    x = float(x)
    if not (s > 0.0) or math.isnan(x):
        raise ValueError(f"invalid arguments s={s}, x={x}")
    if x < 0.0:
        raise ValueError(f"negative truncation point x={x}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < s + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_series(s, x)))
    return min(1.0, max(0.0, _upper_cf(s, x)))


def lower_gamma_regularized(s, x):
    """P(s, x) = 1 - Q(s, x), the lower incomplete gamma ratio.

    Exposed separately because differences Q(s, a) - Q(s, b) lose all
    precision when both values sit near 1; callers can then compute
    P(s, b) - P(s, a) instead, which stays fully resolved.
    """
    s = float(s)
    x = float(x)
    if not (s > 0.0) or math.isnan(x):
        raise ValueError(f"invalid arguments s={s}, x={x}")
    if x < 0.0:
        raise ValueError(f"negative truncation point x={x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < s + 1.0:
        return min(1.0, max(0.0, _lower_series(s, x)))
    return min(1.0, max(0.0, 1.0 - _upper_cf(s, x)))


def _w0_initial(x):
    """Starting point for the Halley iteration."""
    if x > math.e:
        l1 = math.log(x)
        l2 = math.log(l1)
        return l1 - l2 + l2 / l1
    if x > -0.25:
        # Pade-flavored guess, exact to first order around 0.
        return x / (1.0 + x) if x > -0.5 else x
    # Near the branch point expand in sqrt(2(e*x + 1)).
    p = math.sqrt(2.0 * (math.e * x + 1.0))
    return -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0


def lambert_w0(x):
    """Principal Lambert W: the w >= -1 solving w * exp(w) = x.

    Parameters
    ----------
    x : float
        Argument, at least -1/e.

    Returns
    -------
    float
        w with |w*exp(w) - x| <= 1e-12 * max(1, |x|).
    """
    x = float(x)
    if math.isnan(x) or x < -_INV_E:
        raise ValueError(f"argument {x} below -1/e")
    if x == 0.0:
        return 0.0
    if abs(x + _INV_E) < 1e-16:
        return -1.0
    w = _w0_initial(x)
    tol = 1e-14 * abs(x)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol:
            return w
        wp1 = w + 1.0
        # Halley step; the second-order correction is safe while w > -1.
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        w -= f / denom
        if w < -1.0:
            w = -1.0 + 1e-16
    return w
