"""Special functions and small dense linear algebra.

Everything here works on plain floats or small numpy arrays. The incomplete
beta and gamma functions use the classic continued-fraction / series
expansions evaluated with the modified Lentz method.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 20000

# soft cap on matrix dimension; nothing breaks above it, it is just untested
MAX_DIM = 16


class NotPositiveDefiniteError(ValueError):
    pass


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if not x > 0 or math.isinf(x):
        raise ValueError(f"ln_gamma requires a finite x > 0, got {x!r}")
    return math.lgamma(x)


def _beta_cf(x: float, a: float, b: float) -> float:
    # continued fraction for I_x(a, b), modified Lentz
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (0.0 <= x <= 1.0) or not a > 0 or not b > 0:
        raise ValueError(f"reg_inc_beta domain error: x={x}, a={a}, b={b}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(x, a, b) / a
    return 1.0 - front * _beta_cf(1.0 - x, b, a) / b


def f_cdf(y: float, d1: float, d2: float) -> float:
    """CDF of the F(d1, d2) distribution."""
    if y < 0 or math.isnan(y):
        raise ValueError(f"f_cdf requires y >= 0, got {y!r}")
    if not d1 > 0 or not d2 > 0:
        raise ValueError(f"f_cdf requires positive degrees of freedom, got {d1}, {d2}")
    if math.isinf(y):
        return 1.0
    return reg_inc_beta(d1 * y / (d1 * y + d2), d1 / 2.0, d2 / 2.0)


def f_sf(y: float, d1: float, d2: float) -> float:
    """Upper tail 1 - CDF of F(d1, d2), without cancellation for small tails."""
    if y < 0 or math.isnan(y):
        raise ValueError(f"f_sf requires y >= 0, got {y!r}")
    if not d1 > 0 or not d2 > 0:
        raise ValueError(f"f_sf requires positive degrees of freedom, got {d1}, {d2}")
    if math.isinf(y):
        return 0.0
    return reg_inc_beta(d2 / (d2 + d1 * y), d2 / 2.0, d1 / 2.0)


def reg_lower_inc_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if not a > 0 or x < 0:
        raise ValueError(f"reg_lower_inc_gamma domain error: a={a}, x={x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    log_front = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        # series
        ap = a
        total = delta = 1.0 / a
        for _ in range(_MAX_ITER):
            ap += 1.0
            delta *= x / ap
            total += delta
            if abs(delta) < abs(total) * _EPS:
                return total * math.exp(log_front)
        raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")
    # continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return 1.0 - math.exp(log_front) * h
    raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def chisq_cdf(q: float, k: float) -> float:
    if q <= 0:
        return 0.0
    return reg_lower_inc_gamma(k / 2.0, q / 2.0)


def _chisq_logpdf(q: float, k: float) -> float:
    h = k / 2.0
    return (h - 1.0) * math.log(q) - q / 2.0 - h * math.log(2.0) - math.lgamma(h)


def chisq_quantile(p: float, k: float) -> float:
    """Inverse CDF of the chi-squared distribution with k degrees of freedom.

    Bracketed bisection narrows the root, then Newton steps polish it; a
    Newton step that leaves the bracket is replaced by a bisection step.
    """
    if not (0.0 <= p < 1.0):
        raise ValueError(f"chisq_quantile requires 0 <= p < 1, got {p!r}")
    if not k > 0:
        raise ValueError(f"chisq_quantile requires k > 0, got {k!r}")
    if p == 0.0:
        return 0.0
    lo, hi = 0.0, max(1.0, k)
    while chisq_cdf(hi, k) < p:
        lo, hi = hi, hi * 2.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if chisq_cdf(mid, k) < p:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    for _ in range(50):
        err = chisq_cdf(q, k) - p
        if err < 0:
            lo = q
        else:
            hi = q
        step = err / math.exp(_chisq_logpdf(q, k))
        q_new = q - step
        if not lo <= q_new <= hi:
            q_new = 0.5 * (lo + hi)
        if abs(q_new - q) <= 1e-15 * max(1.0, q):
            return q_new
        q = q_new
    return q


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc


def log_det_from_cholesky(chol: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def solve_lower(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution L y = b."""
    n = chol.shape[0]
    y = np.empty(n)
    for i in range(n):
        y[i] = (b[i] - chol[i, :i] @ y[:i]) / chol[i, i]
    return y


def solve_upper_t(chol: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Back substitution L^T x = y."""
    n = chol.shape[0]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - chol[i + 1:, i] @ x[i + 1:]) / chol[i, i]
    return x


def cholesky_solve(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve A x = b for symmetric positive definite A.

    Returns ``(x, log|A|)``.
    """
    chol = cholesky(a)
    b = np.asarray(b, dtype=float)
    if b.shape != (chol.shape[0],):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({chol.shape[0]},)")
    x = solve_upper_t(chol, solve_lower(chol, b))
    return x, log_det_from_cholesky(chol)


def mahalanobis_sq(chol: np.ndarray, diff: np.ndarray) -> float:
    """diff^T A^{-1} diff given the lower Cholesky factor of A."""
    z = solve_lower(chol, diff)
    return float(z @ z)
