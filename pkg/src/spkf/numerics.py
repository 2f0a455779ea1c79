"""Dense linear-algebra and integration primitives used by the filters.

Everything here works on plain float64 numpy arrays. Matrices are small
(state dimensions in the single digits), so the implementations favour
predictable behaviour and low per-call overhead over asymptotics.
"""

import math

import numpy as np
from scipy.linalg import expm as _scipy_expm

from .errors import IntegrationFailure, NotPositiveDefinite

__all__ = [
    "cholesky_factor",
    "matrix_exp",
    "matrix_exp_batch",
    "rk4_propagate",
    "fd_jacobian",
]

# Relative tolerance for the symmetry pre-check on covariance input.
_SYMMETRY_RTOL = 1e-10
# A Cholesky pivot below -_PIVOT_RTOL * max(diag) means the matrix is
# indefinite rather than merely rank-deficient.
_PIVOT_RTOL = 1e-12


def cholesky_factor(p: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Lower-triangular L with L @ L.T == scale * p.

    Positive semidefinite input is accepted: a zero eigenvalue produces a
    zero column instead of an error, so sigma-point generation keeps
    working when a state component has collapsed.

    Args:
        p: symmetric positive (semi)definite matrix.
        scale: positive multiplier applied before factorization.

    Raises:
        ValueError: non-square or asymmetric p, or scale <= 0.
        NotPositiveDefinite: a pivot falls below the indefiniteness
            tolerance -1e-12 * max(diag).
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {p.shape}")
    if not (scale > 0.0):
        raise ValueError(f"scale must be positive, got {scale!r}")
    n = p.shape[0]
    if n <= 4:
        # List arithmetic beats LAPACK dispatch at the state dimensions
        # the filters run at; semantics match the generic path below.
        return _chol_small(p, n, scale)
    bound = _SYMMETRY_RTOL * max(1.0, float(np.abs(p).max(initial=0.0)))
    if float(np.abs(p - p.T).max(initial=0.0)) > bound:
        raise ValueError("matrix is not symmetric within 1e-10 relative")

    a = scale * p
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    return _semidefinite_cholesky(a)


def _chol_small(p: np.ndarray, n: int, scale: float) -> np.ndarray:
    if n == 3:
        return _chol3(p, scale)
    rows = p.tolist()
    peak = 1.0
    for row in rows:
        for v in row:
            v = v if v >= 0.0 else -v
            if v > peak:
                peak = v
    bound = _SYMMETRY_RTOL * peak
    for i in range(n):
        for j in range(i):
            gap = rows[i][j] - rows[j][i]
            if gap > bound or -gap > bound:
                raise ValueError("matrix is not symmetric within 1e-10 relative")
    a = [[scale * v for v in row] for row in rows]
    dmax = 0.0
    for j in range(n):
        if a[j][j] > dmax:
            dmax = a[j][j]
    tol = _PIVOT_RTOL * dmax
    low = -tol
    l = [[0.0] * n for _ in range(n)]
    for j in range(n):
        lj = l[j]
        d = a[j][j]
        for k in range(j):
            d -= lj[k] * lj[k]
        if d < low:
            raise NotPositiveDefinite(
                f"pivot {d!r} at column {j} below tolerance {low!r}"
            )
        if d <= tol:
            continue  # rank deficiency: keep the zero column
        root = math.sqrt(d)
        lj[j] = root
        for i in range(j + 1, n):
            li = l[i]
            v = a[i][j]
            for k in range(j):
                v -= li[k] * lj[k]
            li[j] = v / root
    return np.array(l)


def _semidefinite_cholesky(a: np.ndarray) -> np.ndarray:
    # Outer-product Cholesky with a pivot tolerance: tiny negative pivots
    # are rounding noise on a semidefinite matrix and become zero columns.
    n = a.shape[0]
    tol = _PIVOT_RTOL * max(float(a.diagonal().max(initial=0.0)), 0.0)
    low = -tol
    l = np.zeros((n, n))
    for j in range(n):
        d = a[j, j] - l[j, :j] @ l[j, :j]
        if d < low:
            raise NotPositiveDefinite(
                f"pivot {d!r} at column {j} below tolerance {low!r}"
            )
        if d <= tol:
            continue  # rank deficiency: keep the zero column
        root = math.sqrt(d)
        l[j, j] = root
        if j + 1 < n:
            l[j + 1 :, j] = (a[j + 1 :, j] - l[j + 1 :, :j] @ l[j, :j]) / root
    return l


def _chol3(p: np.ndarray, scale: float) -> np.ndarray:
    # Fully unrolled 3x3 case: the benchmark filters factor a covariance
    # every step, and loop bookkeeping would double the cost.
    r0, r1, r2 = p.tolist()
    p00, p01, p02 = r0
    p10, p11, p12 = r1
    p20, p21, p22 = r2
    peak = 1.0
    for v in (p00, p01, p02, p10, p11, p12, p20, p21, p22):
        if v < 0.0:
            v = -v
        if v > peak:
            peak = v
    bound = _SYMMETRY_RTOL * peak
    for gap in (p01 - p10, p02 - p20, p12 - p21):
        if gap > bound or -gap > bound:
            raise ValueError("matrix is not symmetric within 1e-10 relative")
    a00 = scale * p00
    a11 = scale * p11
    a22 = scale * p22
    a10 = scale * p10
    a20 = scale * p20
    a21 = scale * p21
    dmax = a00
    if a11 > dmax:
        dmax = a11
    if a22 > dmax:
        dmax = a22
    tol = _PIVOT_RTOL * dmax
    low = -tol
    l00 = l10 = l20 = l11 = l21 = l22 = 0.0
    d = a00
    if d < low:
        raise NotPositiveDefinite(f"pivot {d!r} at column 0 below tolerance {low!r}")
    if d > tol:
        l00 = math.sqrt(d)
        l10 = a10 / l00
        l20 = a20 / l00
    d = a11 - l10 * l10
    if d < low:
        raise NotPositiveDefinite(f"pivot {d!r} at column 1 below tolerance {low!r}")
    if d > tol:
        l11 = math.sqrt(d)
        l21 = (a21 - l20 * l10) / l11
    d = a22 - l20 * l20 - l21 * l21
    if d < low:
        raise NotPositiveDefinite(f"pivot {d!r} at column 2 below tolerance {low!r}")
    if d > tol:
        l22 = math.sqrt(d)
    out = np.array([l00, 0.0, 0.0, l10, l11, 0.0, l20, l21, l22])
    return out.reshape(3, 3)


# Pade coefficients and validity bounds for the scaling-and-squaring
# evaluation of exp(A) (Higham 2005, double precision).
_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0,
        8821612800.0,
        2075673600.0,
        302702400.0,
        30270240.0,
        2162160.0,
        110880.0,
        3960.0,
        90.0,
        1.0,
    ),
}
_PADE_13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA = ((3, 1.495585217958292e-2), (5, 2.539398330063230e-1),
          (7, 9.504178996162932e-1), (9, 2.097847961257068))
_THETA_13 = 5.371920351148152
# Degree-13 numerator/denominator split over the power basis
# (a6, a4, a2, I): rows are u-high, u-low, v-high, v-low.
_PADE_13_COMBOS = np.array([
    [_PADE_13[13], _PADE_13[11], _PADE_13[9], 0.0],
    [_PADE_13[7], _PADE_13[5], _PADE_13[3], _PADE_13[1]],
    [_PADE_13[12], _PADE_13[10], _PADE_13[8], 0.0],
    [_PADE_13[6], _PADE_13[4], _PADE_13[2], _PADE_13[0]],
])
# Same idea for the lower degrees: rows (u, v) over the even-power basis
# ordered highest power first, ending at I, so one gemm forms both
# polynomials for a whole stack.
_PADE_UV_COMBOS = {
    deg: np.array([
        [b[2 * k + 1] for k in range((deg + 1) // 2)][::-1],
        [b[2 * k] for k in range((deg + 1) // 2)][::-1],
    ])
    for deg, b in _PADE_COEFFS.items()
}


def matrix_exp(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(a * t) by scaling-and-squaring with a Pade approximant.

    The single-matrix core is scipy's compiled expm (the same Higham
    scheme the batched path below reimplements for stacks).

    Args:
        a: square matrix (the ODE Jacobian in filter use).
        t: time multiplier; t = 0 returns the exact identity.

    Raises:
        ValueError: non-square input or non-finite entries.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    # One scalar sum screens for NaN/inf; the full check only runs on a
    # suspect (overflowing sums of finite entries are astronomically rare).
    if not math.isfinite(float(a.sum())) and not np.isfinite(a).all():
        raise ValueError("matrix exponential of non-finite input")
    if t == 0.0:
        return np.eye(a.shape[0])
    return _scipy_expm(a * t if t != 1.0 else a)


def matrix_exp_batch(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(a[i] * t) for a stack of square matrices, shape (k, n, n).

    Mathematically identical to calling matrix_exp per slice; evaluated
    with broadcast matmul/solve so stacks of small matrices stay cheap.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 3 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected a (k, n, n) stack, got shape {a.shape}")
    if t == 0.0:
        if not np.isfinite(a).all():
            raise ValueError("matrix exponential of non-finite input")
        return np.broadcast_to(np.eye(a.shape[-1]), a.shape).copy()
    if a.shape[0] == 0:
        return a.copy()
    # The finite check lives inside the core: any NaN or infinity makes
    # the envelope norm non-finite, so no separate pass is needed.
    return _expm_core(a * t if t != 1.0 else a)


# Balancing costs a few microseconds, so it only runs where success can
# skip work: above the top Pade bound, where the unbalanced path would
# need the power-norm refinement and possibly squarings.
_BALANCE_TRIGGER = _THETA_13


def _osborne_scaling(m, n):
    """Diagonal balancing factors for an entrywise-nonnegative matrix.

    m is a list of row lists, modified in place to inv(D) m D with
    D = diag(d); the returned d holds exact powers of two, so the
    scaling is lossless in floating point. Returns None when the matrix
    is already balanced. Classic cyclic Osborne iteration: each index is
    rescaled only when that strictly shrinks its off-diagonal mass,
    which keeps the sweep monotone and convergent.

    Sweeps stop early once the remaining off-diagonal mass can no longer
    change the squaring count downstream (below the top Pade bound, or
    small next to a scaling-invariant diagonal); polishing past that
    point buys nothing.
    """
    dmax = 0.0
    for i in range(n):
        if m[i][i] > dmax:
            dmax = m[i][i]
    done = max(_THETA_13 - dmax, 0.25 * dmax)
    d = [1.0] * n
    changed = False
    for _ in range(3 * n + 3):
        converged = True
        mass = 0.0
        for i in range(n):
            row = m[i]
            c = 0.0
            r = 0.0
            for j in range(n):
                if j != i:
                    c += m[j][i]
                    r += row[j]
            mass += c
            if c == 0.0 or r == 0.0:
                continue
            # Power-of-two factor nearest sqrt(r/c), straight from the
            # binary exponents; accept it only if it shrinks the combined
            # off-diagonal mass by >= 5%, which keeps the sweep monotone.
            e = (math.frexp(r)[1] - math.frexp(c)[1]) >> 1
            if e > 52:
                e = 52
            elif e < -52:
                e = -52
            f = math.ldexp(1.0, e)
            if f != 1.0 and c * f + r / f < 0.95 * (c + r):
                converged = False
                changed = True
                d[i] *= f
                inv = 1.0 / f
                for j in range(n):
                    row[j] *= inv
                for j in range(n):
                    m[j][i] *= f
        if converged or mass <= done:
            break
    return d if changed else None


def _osborne3(m):
    """_osborne_scaling unrolled for n == 3, the filter hot path."""
    r0, r1, r2 = m
    a01, a02 = r0[1], r0[2]
    a10, a12 = r1[0], r1[2]
    a20, a21 = r2[0], r2[1]
    dmax = max(r0[0], r1[1], r2[2])
    done = max(_THETA_13 - dmax, 0.25 * dmax)
    d0 = d1 = d2 = 1.0
    changed = False
    for _ in range(12):
        converged = True
        c = a10 + a20
        r = a01 + a02
        if c != 0.0 and r != 0.0:
            e = (math.frexp(r)[1] - math.frexp(c)[1]) >> 1
            f = math.ldexp(1.0, 52 if e > 52 else -52 if e < -52 else e)
            if f != 1.0 and c * f + r / f < 0.95 * (c + r):
                converged = False
                changed = True
                d0 *= f
                inv = 1.0 / f
                a01 *= inv
                a02 *= inv
                a10 *= f
                a20 *= f
        c = a01 + a21
        r = a10 + a12
        if c != 0.0 and r != 0.0:
            e = (math.frexp(r)[1] - math.frexp(c)[1]) >> 1
            f = math.ldexp(1.0, 52 if e > 52 else -52 if e < -52 else e)
            if f != 1.0 and c * f + r / f < 0.95 * (c + r):
                converged = False
                changed = True
                d1 *= f
                inv = 1.0 / f
                a10 *= inv
                a12 *= inv
                a01 *= f
                a21 *= f
        c = a02 + a12
        r = a20 + a21
        if c != 0.0 and r != 0.0:
            e = (math.frexp(r)[1] - math.frexp(c)[1]) >> 1
            f = math.ldexp(1.0, 52 if e > 52 else -52 if e < -52 else e)
            if f != 1.0 and c * f + r / f < 0.95 * (c + r):
                converged = False
                changed = True
                d2 *= f
                inv = 1.0 / f
                a20 *= inv
                a21 *= inv
                a02 *= f
                a12 *= f
        if converged or a01 + a02 + a10 + a12 + a20 + a21 <= done:
            break
    if not changed:
        return None
    r0[1], r0[2] = a01, a02
    r1[0], r1[2] = a10, a12
    r2[0], r2[1] = a20, a21
    return [d0, d1, d2]


_EYE_CACHE = {}


def _cached_eye_flat(n: int, k: int) -> np.ndarray:
    """k raveled n-by-n identities end to end, cached read-only."""
    eye = _EYE_CACHE.get((n, k))
    if eye is None:
        eye = np.tile(np.eye(n).ravel(), k)
        eye.setflags(write=False)
        _EYE_CACHE[(n, k)] = eye
    return eye


def _expm_core(a: np.ndarray) -> np.ndarray:
    # Stack evaluation: one Pade degree is chosen from the largest 1-norm
    # in the stack, keeping every arithmetic step a broadcast op; only the
    # squaring counts are per member.
    n = a.shape[-1]
    rows = np.abs(a).max(axis=0).tolist()
    # Column sums of the entrywise envelope bound every member's 1-norm,
    # so one number drives the degree choice for the whole stack. The
    # running total flushes out NaN or inf anywhere in the input.
    norm = 0.0
    total = 0.0
    for j in range(n):
        s = 0.0
        for row in rows:
            s += row[j]
        total += s
        if s > norm:
            norm = s
    if not math.isfinite(total):
        raise ValueError("matrix exponential of non-finite input")
    d = None
    if norm > _BALANCE_TRIGGER:
        # Badly graded Jacobians (state components with wildly different
        # units) have 1-norms far above their spectra; balancing with
        # power-of-two factors trims the squaring count at no accuracy
        # cost. A stack shares one set of factors computed from the
        # entrywise envelope, keeping the result slice-identical.
        factors = _osborne3(rows) if n == 3 else _osborne_scaling(rows, n)
        if factors is not None:
            balanced_norm = 0.0
            for j in range(n):
                s = 0.0
                for row in rows:
                    s += row[j]
                if s > balanced_norm:
                    balanced_norm = s
            if balanced_norm < 0.5 * norm:
                d = np.array([[fj / fi for fj in factors] for fi in factors])
                a = a * d
                norm = balanced_norm
    if norm <= _THETA[0][1]:
        degree = 3
    elif norm <= _THETA[1][1]:
        degree = 5
    elif norm <= _THETA[2][1]:
        degree = 7
    elif norm <= _THETA[3][1]:
        degree = 9
    else:
        degree = 13

    s_arr = None
    flat = a.shape[0] * n * n
    if degree == 13 and norm > 2.0**40:
        # Powers of such a matrix would overflow, so fall back to scaling
        # straight from the per-member 1-norms before any multiply.
        norms = np.abs(a).sum(axis=-2).max(axis=-1)
        s_arr = np.ceil(np.log2(np.maximum(norms, _THETA_13) / _THETA_13))
        s_arr = s_arr.astype(np.int64)
        a = a * np.exp2(-s_arr)[:, None, None]
    a2 = a @ a
    if degree == 13:
        a4 = a2 @ a2
        a6 = a4 @ a2
        if s_arr is None and norm > _THETA_13:
            # The 1-norm wildly overstates the growth of a non-normal
            # matrix; squaring counts come from norms of the computed
            # powers instead (they track the spectral radius), member by
            # member. Over-squaring is not harmless: each extra squaring
            # doubles the rounding noise.
            d4 = np.abs(a4).sum(axis=-2).max(axis=-1) ** 0.25
            d6 = np.abs(a6).sum(axis=-2).max(axis=-1) ** (1.0 / 6.0)
            eta = np.maximum(d4, d6)
            if float(eta.max(initial=0.0)) > _THETA_13:
                # Even powers miss odd-dominated terms; one extra matmul
                # closes that gap, and only runs when scaling is needed.
                d7 = np.abs(a6 @ a).sum(axis=-2).max(axis=-1) ** (1.0 / 7.0)
                eta = np.maximum(eta, d7)
                with np.errstate(divide="ignore"):
                    raw = np.ceil(np.log2(eta / _THETA_13))
                s_arr = np.maximum(raw, 0.0).astype(np.int64)
                if s_arr.any():
                    scale = np.exp2(-s_arr)[:, None, None]
                    a = a * scale
                    a2 = a2 * scale**2
                    a4 = a4 * scale**4
                    a6 = a6 * scale**6
                else:
                    s_arr = None
        basis = np.empty((4, flat))
        basis[0] = a6.reshape(flat)
        basis[1] = a4.reshape(flat)
        basis[2] = a2.reshape(flat)
        basis[3] = _cached_eye_flat(n, a.shape[0])
        # One small gemm builds all four coefficient combinations.
        combos = _PADE_13_COMBOS @ basis
        hi_u, lo_u, hi_v, lo_v = combos.reshape((4,) + a.shape)
        u = a @ (a6 @ hi_u + lo_u)
        v = a6 @ hi_v + lo_v
    else:
        p = (degree + 1) // 2
        basis = np.empty((p, flat))
        basis[p - 1] = _cached_eye_flat(n, a.shape[0])
        basis[p - 2] = a2.reshape(flat)
        power = a2
        for i in range(p - 3, -1, -1):
            power = power @ a2
            basis[i] = power.reshape(flat)
        combos = _PADE_UV_COMBOS[degree] @ basis
        u_inner, v = combos.reshape((2,) + a.shape)
        u = a @ u_inner
    r = np.linalg.solve(v - u, v + u)
    if s_arr is not None:
        for stage in range(int(s_arr.max())):
            live = s_arr > stage
            if live.all():
                r = r @ r
            else:
                part = r[live]
                r[live] = part @ part
    if d is not None:
        r = r * d.T
    return r


def rk4_propagate(deriv, y0: np.ndarray, t0: float, dt: float,
                  substeps: int = 1) -> np.ndarray:
    """Integrate dy/dt = deriv(t, y) from t0 to t0 + dt with classical RK4.

    The step is split into `substeps` equal RK4 steps (4 derivative
    evaluations each). Fixed-step on purpose: the cost model and the
    evaluation-count bookkeeping both assume exactly 4 * substeps calls.

    Raises:
        ValueError: substeps < 1.
        IntegrationFailure: deriv returned a non-finite value; the
            exception carries the evaluation time.
    """
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    y = np.asarray(y0, dtype=float)
    h = dt / substeps
    half = 0.5 * h
    sixth = h / 6.0
    t = float(t0)
    for _ in range(substeps):
        k1 = _checked_deriv(deriv, t, y)
        k2 = _checked_deriv(deriv, t + half, y + half * k1)
        k3 = _checked_deriv(deriv, t + half, y + half * k2)
        k4 = _checked_deriv(deriv, t + h, y + h * k3)
        y = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        t += h
    return y


def _checked_deriv(deriv, t, y):
    k = np.asarray(deriv(t, y), dtype=float)
    # Any NaN or infinity drives the sum non-finite, so one scalar check
    # covers the whole vector; the elementwise check confirms a suspect.
    if not math.isfinite(float(k.sum())) and not np.isfinite(k).all():
        raise IntegrationFailure(t)
    return k


def fd_jacobian(func, y: np.ndarray, step=None) -> np.ndarray:
    """Central-difference Jacobian of func at y.

    Args:
        func: maps a state vector to a vector (any output dimension).
        y: evaluation point.
        step: scalar or per-component positive offsets; defaults to
            1e-6 * (1 + |y_c|) per component.

    Raises:
        ValueError: non-positive step, or a non-finite evaluation (the
            message names the offending component).
    """
    y = np.asarray(y, dtype=float)
    if step is None:
        steps = 1e-6 * (1.0 + np.abs(y))
    else:
        steps = np.broadcast_to(np.asarray(step, dtype=float), y.shape)
        if not (steps > 0.0).all():
            raise ValueError("finite-difference step must be positive")
    n = y.size
    columns = []
    for c in range(n):
        offset = np.zeros(n)
        offset[c] = steps[c]
        hi = np.asarray(func(y + offset), dtype=float)
        lo = np.asarray(func(y - offset), dtype=float)
        if not (np.isfinite(hi).all() and np.isfinite(lo).all()):
            raise ValueError(f"non-finite evaluation while perturbing component {c}")
        columns.append((hi - lo) / (2.0 * steps[c]))
    return np.stack(columns, axis=-1)
