"""Sigma-point generation and unscented-transform moment recovery."""

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import cholesky_factor

__all__ = [
    "SigmaPointSet",
    "generate_sigma_points",
    "generate_simplex_sigma_points",
    "ut_mean",
    "ut_covariance",
    "ut_cross_covariance",
    "augment_state",
]


@dataclass
class SigmaPointSet:
    """A weighted sigma-point set.

    Attributes:
        points: (k, n) array; row 0 is the distribution mean.
        weights: (k,) weights summing to one; a read-only array shared
            between sets of the same size and spread.
        offsets: (k, n) array of points - points[0]; row 0 is zero. The
            fast-propagation filters transport these through the state
            transition matrix instead of re-integrating every point.
        kappa: spread parameter for the symmetric set, None for the
            simplex set.
    """

    points: np.ndarray
    weights: np.ndarray
    offsets: np.ndarray
    kappa: float | None = None


def generate_sigma_points(mean: np.ndarray, cov: np.ndarray,
                          kappa: float) -> SigmaPointSet:
    """Symmetric 2n+1 sigma-point set.

    Offsets are the columns of the Cholesky factor of (n + kappa) * cov,
    applied with both signs; weights are kappa/(n+kappa) for the mean
    point and 1/(2(n+kappa)) elsewhere.

    Raises:
        ValueError: n + kappa <= 0.
    """
    mean = np.asarray(mean, dtype=float)
    n = mean.size
    scale = n + kappa
    if scale <= 0.0:
        raise ValueError(f"n + kappa must be positive, got {scale}")
    if kappa < 0.0:
        warnings.warn(
            "negative kappa gives a negative mean weight; predicted "
            "covariances may lose positive semidefiniteness",
            RuntimeWarning,
            stacklevel=2,
        )
    root = cholesky_factor(cov, scale)
    offsets = np.empty((2 * n + 1, n))
    offsets[0] = 0.0
    offsets[1 : n + 1] = root.T
    np.negative(offsets[1 : n + 1], out=offsets[n + 1 :])
    return SigmaPointSet(
        mean + offsets, _symmetric_weights(n, kappa), offsets, kappa
    )


@lru_cache(maxsize=64)
def _symmetric_weights(n: int, kappa: float) -> np.ndarray:
    scale = n + kappa
    weights = np.full(2 * n + 1, 1.0 / (2.0 * scale))
    weights[0] = kappa / scale
    weights.setflags(write=False)
    return weights


@lru_cache(maxsize=64)
def _simplex_weights(n: int, w0: float) -> np.ndarray:
    weights = np.full(n + 2, (1.0 - w0) / (n + 1))
    weights[0] = w0
    weights.setflags(write=False)
    return weights


@lru_cache(maxsize=32)
def _unit_simplex(n: int, w0: float) -> np.ndarray:
    # Spherical-simplex vertex recursion: n+1 points share one weight and
    # sit on a hypersphere, built up one dimension at a time so that the
    # weighted mean is zero and the weighted covariance is the identity.
    w1 = (1.0 - w0) / (n + 1)
    x = np.zeros((n + 2, n))
    x[1, 0] = -1.0 / math.sqrt(2.0 * w1)
    x[2, 0] = -x[1, 0]
    for j in range(2, n + 1):
        coord = -1.0 / math.sqrt(j * (j + 1) * w1)
        x[1 : j + 1, j - 1] = coord
        x[j + 1, j - 1] = -j * coord
    x.setflags(write=False)
    return x


def generate_simplex_sigma_points(mean: np.ndarray, cov: np.ndarray,
                                  w0: float = 0.5) -> SigmaPointSet:
    """Spherical-simplex set: n+2 points instead of 2n+1.

    Point 0 carries weight w0; the remaining n+1 points share
    (1 - w0)/(n + 1) each.

    Raises:
        ValueError: w0 outside [0, 1).
    """
    if not (0.0 <= w0 < 1.0):
        raise ValueError(f"w0 must lie in [0, 1), got {w0!r}")
    mean = np.asarray(mean, dtype=float)
    n = mean.size
    unit = _unit_simplex(n, w0)
    root = cholesky_factor(cov, 1.0)
    offsets = unit @ root.T
    return SigmaPointSet(mean + offsets, _simplex_weights(n, w0), offsets, None)


def ut_mean(points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted mean of transformed sigma points."""
    return weights @ points


def ut_covariance(points: np.ndarray, weights: np.ndarray,
                  mean: np.ndarray) -> np.ndarray:
    """Weighted outer-product covariance about `mean`."""
    d = points - mean
    return d.T @ (d * weights[:, None])


def ut_cross_covariance(state_points: np.ndarray, meas_points: np.ndarray,
                        weights: np.ndarray, state_mean: np.ndarray,
                        meas_mean: np.ndarray) -> np.ndarray:
    """Cross covariance between state and measurement sigma points."""
    ds = state_points - state_mean
    dz = meas_points - meas_mean
    return ds.T @ (dz * weights[:, None])


def augment_state(mean: np.ndarray, cov: np.ndarray, noise_cov: np.ndarray,
                  cross: np.ndarray | None = None):
    """Stack a zero-mean noise block onto a state estimate.

    Returns the augmented mean and block covariance
    [[cov, cross], [cross.T, noise_cov]]; cross defaults to zero.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    noise_cov = np.asarray(noise_cov, dtype=float)
    n = mean.size
    if cov.shape != (n, n):
        raise ValueError(f"covariance shape {cov.shape} does not match state size {n}")
    if noise_cov.ndim != 2 or noise_cov.shape[0] != noise_cov.shape[1]:
        raise ValueError(f"noise covariance must be square, got {noise_cov.shape}")
    q = noise_cov.shape[0]
    if q == 0:
        return mean.copy(), cov.copy()
    if cross is None:
        cross = np.zeros((n, q))
    else:
        cross = np.asarray(cross, dtype=float)
        if cross.shape != (n, q):
            raise ValueError(f"cross covariance shape {cross.shape}, expected {(n, q)}")
    aug_mean = np.concatenate([mean, np.zeros(q)])
    aug_cov = np.block([[cov, cross], [np.transpose(cross), noise_cov]])
    return aug_mean, aug_cov
