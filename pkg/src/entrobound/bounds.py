"""Closed-form confidence bound for histogram differential-entropy estimation.

For an L-Lipschitz density (l1 norm) supported on [0,1]^K, the plug-in
estimate computed from N samples binned on an M-step-per-axis grid deviates
from the true differential entropy by at most

    (L*K / 2M) * log(M * eta(K, L))            quantization bias
    + sqrt((2/N) * log(2/delta)) * log(N)      statistical deviation
    + log(1 + (M^K - 1) / N)                   empirical bias

with probability greater than 1 - delta, provided M >= 1/(alpha * eta(K, L)),
where

    eta(K, L) = (1/K) * (2 * (K+1)! / L)^(1/(K+1))
    alpha     = (sqrt(e^2 + 4) - e) / (2e)  ~ 0.120754 .

Everything here is in nats (natural log).  All functions are pure and safe to
call concurrently.
"""
from __future__ import annotations

import math
import operator
from dataclasses import dataclass

from .errors import ValidityError

__all__ = [
    "BoundParams",
    "ConfidenceBound",
    "alpha_const",
    "eta",
    "min_valid_M",
    "quantization_bias",
    "statistical_deviation",
    "empirical_bias",
    "total_bound",
    "optimize_M",
    "discrete_entropy_bounds",
]

# Above this, (K+1)! no longer fits a float; switch to log-gamma.
_FACTORIAL_CUTOFF = 20
# Above this, M^K overflows a float; use the log-space form of the
# empirical-bias term.
_LOG_MK_CUTOFF = 700.0

# Exhaustive-search budget for optimize_M.
_MAX_CANDIDATES = 4096


def alpha_const() -> float:
    """Curvature constant (sqrt(e^2 + 4) - e) / (2e) of the bound's log terms."""
    e = math.e
    return (math.sqrt(e * e + 4.0) - e) / (2.0 * e)


def as_int(name: str, value, minimum: int = 1) -> int:
    """Coerce any integral type (incl. numpy integers) with a floor check."""
    try:
        value = operator.index(value)
    except TypeError:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}") from None
    if value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def _validate_K_L(K: int, L: float) -> int:
    K = as_int("dimension K", K)
    if not (L > 0.0) or math.isinf(L):
        raise ValueError(f"Lipschitz constant L must be positive and finite, got {L!r}")
    return K


def eta(K: int, L: float) -> float:
    """Scale factor (1/K) * (2 * (K+1)! / L)^(1/(K+1)).

    The factorial is evaluated exactly for K <= 20 and via ``lgamma`` above
    that, so the result stays finite in high dimension.
    """
    K = _validate_K_L(K, L)
    if K <= _FACTORIAL_CUTOFF:
        return (2.0 * math.factorial(K + 1) / L) ** (1.0 / (K + 1)) / K
    log_val = (math.log(2.0) + math.lgamma(K + 2) - math.log(L)) / (K + 1)
    return math.exp(log_val) / K


def min_valid_M(K: int, L: float) -> int:
    """Smallest bin count per axis for which the confidence bound applies."""
    return max(1, math.ceil(1.0 / (alpha_const() * eta(K, L))))


@dataclass(frozen=True)
class BoundParams:
    """Parameters (K, L, M, N, delta) of one confidence-bound evaluation.

    K: dimension; L: Lipschitz constant w.r.t. the l1 norm; M: quantization
    steps per axis; N: sample count; delta: allowed failure probability.
    """

    K: int
    L: float
    M: int
    N: int
    delta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "K", _validate_K_L(self.K, self.L))
        object.__setattr__(self, "M", as_int("M", self.M))
        object.__setattr__(self, "N", as_int("N", self.N))
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")

    @property
    def valid_for_theorem(self) -> bool:
        """True iff M meets the threshold M >= 1/(alpha * eta(K, L))."""
        return self.M >= min_valid_M(self.K, self.L)


@dataclass(frozen=True)
class ConfidenceBound:
    """The three error terms of the bound and their exact sum, in nats."""

    quant_bias: float
    stat_dev: float
    emp_bias: float
    total: float


def quantization_bias(K: int, L: float, M: int) -> float:
    """Bias term (L*K / 2M) * log(M * eta(K, L)).

    Requires M >= min_valid_M(K, L), which guarantees M * eta >= 1/alpha > 1
    so the logarithm is positive.
    """
    K = _validate_K_L(K, L)
    M = as_int("M", M)
    threshold = min_valid_M(K, L)
    if M < threshold:
        raise ValidityError(
            f"M={M} is below the minimum bin count {threshold} for K={K}, L={L}; "
            "the confidence bound does not apply"
        )
    return (L * K / (2.0 * M)) * math.log(M * eta(K, L))


def statistical_deviation(N: int, delta: float) -> float:
    """Deviation term sqrt((2/N) * log(2/delta)) * log(N).

    Holds with probability greater than 1 - delta for the plug-in entropy of
    N samples (bounded-differences concentration); zero at N = 1.
    """
    N = as_int("N", N)
    if not (0.0 < delta <= 1.0):
        raise ValueError(f"delta must lie in (0, 1], got {delta!r}")
    return math.sqrt((2.0 / N) * math.log(2.0 / delta)) * math.log(N)


def empirical_bias(K: int, M: int, N: int) -> float:
    """Bias term log(1 + (M^K - 1) / N), finite for any K, M.

    When K*log(M) exceeds the float range the algebraically equal form
    K*log(M) - log(N) + log1p((N-1) * M^-K) is used.
    """
    K = as_int("K", K)
    M = as_int("M", M)
    N = as_int("N", N)
    if M == 1:
        return 0.0
    log_mk = K * math.log(M)
    if log_mk > _LOG_MK_CUTOFF:
        return log_mk - math.log(N) + math.log1p((N - 1) * math.exp(-log_mk))
    return math.log1p((M**K - 1) / N)


def total_bound(params: BoundParams) -> ConfidenceBound:
    """All three terms of the confidence bound, plus their sum.

    Raises ValidityError when ``params.valid_for_theorem`` is false.
    """
    quant = quantization_bias(params.K, params.L, params.M)
    stat = statistical_deviation(params.N, params.delta)
    emp = empirical_bias(params.K, params.M, params.N)
    return ConfidenceBound(quant, stat, emp, quant + stat + emp)


def optimize_M(K: int, L: float, N: int, delta: float) -> tuple[int, ConfidenceBound]:
    """Bin count minimizing the total bound for fixed (K, L, N, delta).

    Searches the integer range [min_valid_M, M_cap] where
    M_cap = max(min_valid_M, ceil((10*N)^(1/K))); beyond M_cap the empirical
    bias alone exceeds any gain from finer quantization.  The search is
    exhaustive when the range is small, otherwise a geometric grid of at most
    4096 candidates followed by a +-1 descent.  Ties break toward smaller M
    (cheaper histograms).
    """
    K = _validate_K_L(K, L)
    N = as_int("N", N, minimum=2)
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")

    lo = min_valid_M(K, L)
    hi = max(lo, math.ceil((10.0 * N) ** (1.0 / K)))

    def objective(M: int) -> float:
        return total_bound(BoundParams(K, L, M, N, delta)).total

    if hi - lo + 1 <= _MAX_CANDIDATES:
        candidates = range(lo, hi + 1)
    else:
        log_lo, log_hi = math.log(lo), math.log(hi)
        raw = (
            round(math.exp(log_lo + (log_hi - log_lo) * i / (_MAX_CANDIDATES - 1)))
            for i in range(_MAX_CANDIDATES)
        )
        candidates = sorted({min(hi, max(lo, m)) for m in raw})

    best_M = lo
    best_val = objective(lo)
    for M in candidates:
        val = objective(M)
        if val < best_val:
            best_M, best_val = M, val

    # Local descent; on ties move toward smaller M.
    while True:
        if best_M - 1 >= lo and objective(best_M - 1) <= best_val:
            best_M -= 1
            best_val = objective(best_M)
        elif best_M + 1 <= hi and objective(best_M + 1) < best_val:
            best_M += 1
            best_val = objective(best_M)
        else:
            break

    return best_M, total_bound(BoundParams(K, L, best_M, N, delta))


def discrete_entropy_bounds(M_alphabet: int, N: int, delta: float) -> tuple[float, float]:
    """Bias and deviation bounds for plug-in entropy of a discrete law.

    For the empirical distribution of N i.i.d. draws from an M-letter
    alphabet: |H - E[H_hat]| <= log(1 + (M-1)/N), and with probability
    greater than 1 - delta, |H_hat - E[H_hat]| <= sqrt((2/N) log(2/delta)) * log(N).
    """
    M_alphabet = as_int("alphabet size", M_alphabet)
    bias = empirical_bias(1, M_alphabet, N)
    deviation = statistical_deviation(N, delta)
    return bias, deviation
