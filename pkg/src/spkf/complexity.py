"""Analytic cost model for the sigma-point filter family.

Costs are upper bounds on scalar-operation counts per prediction step,
expressed in units of the most expensive basic operation. Three knobs:
state dimension n, dynamics evaluation difficulty j (scalar operations
per call of f), and integration substeps h. The bounds deliberately
ignore constant bookkeeping terms, so they rank algorithms and locate
break-even dimensions rather than predict wall-clock times.
"""

from dataclasses import dataclass

from scipy.optimize import bisect

from .errors import NoPositiveRoot

__all__ = [
    "CostModelParams",
    "ALGORITHMS",
    "cost_bound",
    "reduction_percent",
    "state_dim_limit",
]

ALGORITHMS = ("ukf", "spukf", "espukf")

_BRACKET_MAX = 1.0e6


@dataclass(frozen=True)
class CostModelParams:
    """Cost-model knobs: all positive integers."""

    n: int
    j: int
    h: int

    def __post_init__(self):
        for name in ("n", "j", "h"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")


def cost_bound(algo: str, p: CostModelParams) -> float:
    """Per-step operation-count bound for one prediction algorithm.

    The UKF integrates every sigma point, so its bound is quadratic in n
    with the dynamics difficulty j multiplying the linear term. The fast
    variants integrate one point and rebuild the rest through transition
    matrices, trading the j-heavy terms for matrix-algebra polynomials:
    cubic in n for the single-exponential variant, quartic for the
    extrapolated one.
    """
    n, j, h = p.n, p.j, p.h
    tail = 4 * h * j + 5 * h
    if algo == "ukf":
        return float(26 * h * n**2 + (8 * h * j + 23 * h) * n + tail)
    if algo == "spukf":
        return float(5 * n**3 + 4 * n**2 + (13 * h + j + 3) * n + tail)
    if algo == "espukf":
        return float(6 * n**4 + 11 * n**3 + (2 * j + 18) * n**2
                     + (13 * h + 3 * j + 4) * n + tail)
    raise ValueError(f"unknown algorithm {algo!r}")


def _excess_over_ukf(algo: str, n: float, j: int, h: int) -> float:
    # cost_bound(algo) - cost_bound(ukf), expanded and continued to
    # real n; the shared 4hj + 5h tail cancels.
    if algo == "spukf":
        return (5 * n**3 - (26 * h - 4) * n**2
                - (8 * h * j + 10 * h - j - 3) * n)
    if algo == "espukf":
        return (6 * n**4 + 11 * n**3 - (26 * h - 2 * j - 18) * n**2
                - (8 * h * j + 10 * h - 3 * j - 4) * n)
    raise ValueError(f"unknown fast algorithm {algo!r}")


def reduction_percent(algo: str, p: CostModelParams) -> float:
    """Percentage cost reduction of a fast variant relative to the UKF.

    Negative once the matrix-algebra polynomial overtakes the integration
    cost it avoids.
    """
    saved = -_excess_over_ukf(algo, p.n, p.j, p.h)
    return 100.0 * saved / cost_bound("ukf", p)


def state_dim_limit(algo: str, j: int, h: int) -> float:
    """State dimension at which a fast variant stops paying off.

    Root of the excess-cost polynomial in n (the zero root at n = 0 is
    factored out first), located by doubling bracket search and bisection
    to 1e-9. Below the root the reduction is positive, above negative.

    Raises:
        NoPositiveRoot: no sign change found up to n = 1e6.
    """
    if j < 1 or h < 1:
        raise ValueError(f"j and h must be >= 1, got j={j}, h={h}")

    def excess_per_n(n: float) -> float:
        return _excess_over_ukf(algo, n, j, h) / n

    # Validates algo before the scan.
    lo, flo = 1e-6, excess_per_n(1e-6)
    if flo >= 0.0:
        raise NoPositiveRoot(f"{algo} excess already nonnegative at n -> 0")
    hi = 1.0
    while hi <= _BRACKET_MAX:
        fhi = excess_per_n(hi)
        if fhi == 0.0:
            return hi
        if fhi > 0.0:
            return float(bisect(excess_per_n, lo, hi, xtol=1e-9))
        lo = hi
        hi *= 2.0
    raise NoPositiveRoot(
        f"{algo} with j={j}, h={h}: no break-even dimension below {_BRACKET_MAX:g}"
    )
