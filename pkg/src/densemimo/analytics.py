"""Closed-form network averages: interference coefficients, channel
estimation error, uplink SINR/SE bounds and pilot-reuse optimization.

Everything in this module is a deterministic function of a path loss
model and a parameter bundle. The two interference coefficients mu_1
and mu_2 are network-wide averages of the interferer gain ratio
(gain to the serving BS of the victim cell over gain to the
interferer's own BS) raised to the first and second power; every other
quantity is simple algebra on top of them. The Monte Carlo module
provides independent empirical estimates of the same averages.
"""

import math
from dataclasses import dataclass, replace

from .specfun import (
    lambert_w0,
    lower_gamma_regularized,
    upper_gamma_regularized,
)

__all__ = [
    "NetworkParams",
    "MuCoefficients",
    "SinrBreakdown",
    "SingularExponentError",
    "DivergentCoefficientError",
    "mu_coefficient",
    "big_a",
    "nmse_bound",
    "sinr_mr",
    "sinr_zf",
    "se_lower_bound",
    "rate_asymptotic",
    "optimal_zeta_asymptotic",
    "optimal_zeta_exhaustive",
    "crossover_antenna_ratio",
    "area_se",
]

# kappa*alpha this close to 2 makes the per-slope denominators blow up.
_SINGULAR_TOL = 1e-9

_M_PER_KM = 1000.0


class SingularExponentError(ValueError):
    """kappa * alpha_n == 2 for some slope: the per-slope term is singular."""


class DivergentCoefficientError(ValueError):
    """kappa * alpha_N <= 2: the far-field average diverges."""


@dataclass(frozen=True)
class NetworkParams:
    """Immutable network parameter bundle.

    Parameters
    ----------
    lambda_bs_km2 : float
        BS density in BS/km^2, strictly positive.
    m : int or None
        Antennas per BS; None when an operation does not need it.
    k : int
        UEs per cell.
    zeta : float
        Pilot reuse factor, real >= 1 (integer only required by the
        simulator's explicit pilot-book mode).
    tau_c : float
        Coherence block length in samples.
    snr0_db : float
        Uniform per-UE SNR in dB (power control equalizes it).
    """

    lambda_bs_km2: float
    m: int | None = None
    k: int = 10
    zeta: float = 1.0
    tau_c: float = 200.0
    snr0_db: float = 5.0

    def __post_init__(self):
        if not (self.lambda_bs_km2 > 0.0):
            raise ValueError("lambda_bs_km2 must be positive")
        if self.m is not None and (int(self.m) != self.m or self.m < 1):
            raise ValueError("m must be an integer >= 1")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be an integer >= 1")
        if not (self.zeta >= 1.0):
            raise ValueError("zeta must be >= 1")
        if not (self.tau_c > 0.0):
            raise ValueError("tau_c must be positive")
        if self.zeta * self.k > self.tau_c:
            raise ValueError(
                f"pilot overhead zeta*k = {self.zeta * self.k} exceeds tau_c = {self.tau_c}"
            )

    @property
    def snr0(self):
        """SNR in linear scale."""
        return 10.0 ** (self.snr0_db / 10.0)

    @property
    def tau_p(self):
        """Pilot sequence length zeta*k."""
        return self.zeta * self.k

    def with_m(self, m):
        return replace(self, m=m)

    def with_zeta(self, zeta):
        return replace(self, zeta=zeta)


@dataclass(frozen=True)
class MuCoefficients:
    """First and second interference-ratio averages."""

    mu1: float
    mu2: float

    def __post_init__(self):
        if not (self.mu1 > 0.0 and self.mu2 > 0.0):
            raise ValueError("mu coefficients must be positive")
        # The summed ratios are each <= 1, so squares cannot exceed them.
        if self.mu2 > self.mu1 * (1.0 + 1e-12):
            raise ValueError(f"mu2 = {self.mu2} exceeds mu1 = {self.mu1}")

    @classmethod
    def from_model(cls, model, lambda_bs_km2):
        return cls(
            mu1=mu_coefficient(model, lambda_bs_km2, 1),
            mu2=mu_coefficient(model, lambda_bs_km2, 2),
        )


@dataclass(frozen=True)
class SinrBreakdown:
    """Uplink SINR with its denominator split into named parts.

    The SINR equals 1 / (noise + intra_cell + inter_cell +
    pilot_contamination); the parts are kept so relative weights can be
    compared across schemes and against the simulator.
    """

    noise: float
    intra_cell: float
    inter_cell: float
    pilot_contamination: float
    scheme: str

    def __post_init__(self):
        terms = (self.noise, self.intra_cell, self.inter_cell, self.pilot_contamination)
        if any(not math.isfinite(t) or t < 0.0 for t in terms):
            raise ValueError(f"denominator terms must be finite and non-negative: {terms}")
        if self.scheme not in ("MR", "ZF"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def sinr(self):
        return 1.0 / (
            self.noise + self.intra_cell + self.inter_cell + self.pilot_contamination
        )


def _q_diff(s, a, b):
    """Stable Q(s, a) - Q(s, b) for 0 <= a <= b.

    Evaluated on whichever side of the distribution keeps both values
    away from 1, so the difference never cancels catastrophically.
    """
    qa = upper_gamma_regularized(s, a)
    if qa > 0.5:
        return lower_gamma_regularized(s, b) - lower_gamma_regularized(s, a)
    return qa - upper_gamma_regularized(s, b)


def _c_correction(bp_km, alphas, upsilons, n, kappa):
    """Per-slope constant weighting the incomplete-gamma correction term.

    Collects the completed inner slices from slopes beyond n; vanishes
    for the last slope. Lengths in km so the density prefactor in
    mu_coefficient is dimensionless.
    """
    n_slopes = len(alphas)
    if n == n_slopes - 1:
        return 0.0
    ka_n = kappa * alphas[n]
    out = -bp_km[n + 1] ** (2.0 - ka_n) / (ka_n - 2.0)
    for i in range(n + 1, n_slopes):
        ka_i = kappa * alphas[i]
        hi = bp_km[i + 1]
        hi_pow = 0.0 if math.isinf(hi) else hi ** (2.0 - ka_i)
        out += (
            (upsilons[i] / upsilons[n]) ** kappa
            * (bp_km[i] ** (2.0 - ka_i) - hi_pow)
            / (ka_i - 2.0)
        )
    return out


def mu_coefficient(model, lambda_bs_km2, kappa):
    """Average interferer gain-ratio sum, kappa-th power.

    Evaluated term by term per slope: an incomplete-gamma weight for
    the slope's own distance band plus a correction constant carrying
    the completed bands of all farther slopes. The last slope has a
    zero correction and a vanishing upper tail.

    Parameters
    ----------
    model : PathLossModel
    lambda_bs_km2 : float
        BS density, strictly positive.
    kappa : int
        1 or 2.

    Raises
    ------
    SingularExponentError
        If kappa*alpha_n is within 1e-9 of 2 for any slope.
    DivergentCoefficientError
        If kappa*alpha_N <= 2 (the average is infinite).
    """
    if kappa not in (1, 2):
        raise ValueError(f"kappa must be 1 or 2, got {kappa!r}")
    if not (lambda_bs_km2 > 0.0):
        raise ValueError("lambda_bs_km2 must be positive")
    alphas = model.alphas
    for a in alphas:
        if abs(kappa * a - 2.0) <= _SINGULAR_TOL:
            raise SingularExponentError(
                f"kappa*alpha = {kappa * a} is singular (too close to 2)"
            )
    if kappa * alphas[-1] <= 2.0:
        raise DivergentCoefficientError(
            f"mu_{kappa} infinite: last exponent {alphas[-1]} needs kappa*alpha > 2"
        )
    bp_km = tuple(b / _M_PER_KM for b in model.breakpoints_m)
    # The stored upsilons pair with distances in metres; the cross-slope
    # ratios below pair with km lengths, and the two conventions differ
    # by 1000^alpha per slope, which only cancels within a slope.
    ups_km = tuple(up * _M_PER_KM ** (-a) for up, a in zip(model.upsilons, alphas))
    u = tuple(
        math.inf if math.isinf(b) else math.pi * lambda_bs_km2 * b * b for b in bp_km
    )
    total = 0.0
    for n in range(len(alphas)):
        ka = kappa * alphas[n]
        total += 2.0 * _q_diff(2.0, u[n], u[n + 1]) / (ka - 2.0)
        corr = _c_correction(bp_km, alphas, ups_km, n, kappa)
        if corr != 0.0:
            s = 1.0 + ka / 2.0
            total += (
                2.0
                * corr
                * (math.pi * lambda_bs_km2) ** (1.0 - ka / 2.0)
                * _q_diff(s, u[n], u[n + 1])
                * math.gamma(s)
            )
    return total


def big_a(mu1, params):
    """Estimation-quality factor A = 1 + mu1/zeta + 1/(zeta*K*SNR0)."""
    if not (mu1 >= 0.0):
        raise ValueError("mu1 must be non-negative")
    return 1.0 + mu1 / params.zeta + 1.0 / (params.zeta * params.k * params.snr0)


def nmse_bound(model, params):
    """Upper bound on the average channel-estimation NMSE, in (0, 1)."""
    mu1 = mu_coefficient(model, params.lambda_bs_km2, 1)
    return 1.0 - 1.0 / big_a(mu1, params)


def _require_m(params):
    if params.m is None:
        raise ValueError("params.m (antennas per BS) is required here")
    return params.m


def sinr_mr(model, params):
    """Maximum-ratio combining SINR with its denominator breakdown."""
    m = _require_m(params)
    mu = MuCoefficients.from_model(model, params.lambda_bs_km2)
    a = big_a(mu.mu1, params)
    k_over_m = params.k / m
    return SinrBreakdown(
        noise=a / (m * params.snr0),
        intra_cell=k_over_m * a,
        inter_cell=k_over_m * (a * mu.mu1 + mu.mu2 / params.zeta),
        pilot_contamination=mu.mu2 / params.zeta,
        scheme="MR",
    )


def sinr_zf(model, params):
    """Zero-forcing combining SINR with its denominator breakdown."""
    m = _require_m(params)
    if m <= params.k:
        raise ValueError(f"ZF needs m > k, got m = {m}, k = {params.k}")
    mu = MuCoefficients.from_model(model, params.lambda_bs_km2)
    a = big_a(mu.mu1, params)
    surplus = m - params.k
    return SinrBreakdown(
        noise=a / (surplus * params.snr0),
        intra_cell=params.k / surplus * (a - 1.0),
        inter_cell=params.k / surplus * a * mu.mu1,
        pilot_contamination=mu.mu2 / params.zeta,
        scheme="ZF",
    )


def se_lower_bound(model, params, scheme):
    """Per-UE spectral efficiency lower bound in bit/s/Hz.

    The pilot overhead prefactor (1 - K*zeta/tau_c) multiplies the log
    of one plus the scheme's SINR.
    """
    breakdown = {"MR": sinr_mr, "ZF": sinr_zf}[scheme](model, params)
    overhead = 1.0 - params.k * params.zeta / params.tau_c
    return overhead * math.log2(1.0 + breakdown.sinr)


def rate_asymptotic(model, params):
    """Large-antenna rate limit (1 - zeta*K/tau_c) * log2(1 + zeta/mu2)."""
    mu2 = mu_coefficient(model, params.lambda_bs_km2, 2)
    overhead = 1.0 - params.k * params.zeta / params.tau_c
    return overhead * math.log2(1.0 + params.zeta / mu2)


def optimal_zeta_asymptotic(model, lambda_bs_km2, k, tau_c):
    """Reuse factor maximizing the large-antenna rate, in closed form.

    Returns
    -------
    (clamped, raw) : tuple of float
        The maximizer clamped to the feasible interval [1, tau_c/k]
        and the unconstrained stationary point.
    """
    mu2 = mu_coefficient(model, lambda_bs_km2, 2)
    if not (mu2 > 0.0):
        raise ValueError("mu2 must be positive")
    nu = 1.0 + tau_c / (mu2 * k)
    raw = mu2 * (nu / lambert_w0(nu * math.e) - 1.0)
    clamped = min(max(raw, 1.0), tau_c / k)
    return clamped, raw


def optimal_zeta_exhaustive(model, params, scheme, zeta_grid):
    """Grid argmax of the finite-M spectral efficiency over zeta.

    Ties break toward the smaller zeta. Grid points violating the
    pilot-overhead constraint are rejected up front.
    """
    grid = [float(z) for z in zeta_grid]
    if not grid:
        raise ValueError("zeta grid is empty")
    if any(z < 1.0 or z * params.k > params.tau_c for z in grid):
        raise ValueError("zeta grid leaves the feasible interval [1, tau_c/k]")
    best_z, best_se = None, -math.inf
    for z in sorted(grid):
        se = se_lower_bound(model, params.with_zeta(z), scheme)
        if se > best_se:
            best_z, best_se = z, se
    return best_z


def crossover_antenna_ratio(model, params, scheme):
    """Antenna-UE ratio at which interference equals pilot contamination.

    Solves intra + inter = pilot contamination for M/K; above the
    returned ratio the coherent term dominates. The noise term is left
    out of the balance on both sides.
    """
    mu = MuCoefficients.from_model(model, params.lambda_bs_km2)
    a = big_a(mu.mu1, params)
    pc = mu.mu2 / params.zeta
    if scheme == "MR":
        return (a * (1.0 + mu.mu1) + pc) / pc
    if scheme == "ZF":
        return 1.0 + params.zeta * ((a - 1.0) + a * mu.mu1) / mu.mu2
    raise ValueError(f"unknown scheme {scheme!r}")


def area_se(model, params, scheme):
    """Area spectral efficiency lambda*K*SE in bit/s/Hz/km^2."""
    return params.lambda_bs_km2 * params.k * se_lower_bound(model, params, scheme)
