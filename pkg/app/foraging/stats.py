"""
Simple linear regression with slope inference
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from core.exceptions import DataValidationError, NumericalError

P_VALUE_FLOOR = 1e-300
CF_TOL = 1e-12
CF_MAX_ITER = 300
CF_TINY = 1e-300


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    stderr: float
    t_statistic: float
    p_value: float
    r_squared: float
    n: int

    def as_dict(self):
        return asdict(self)


def _beta_continued_fraction(a, b, x):
    """Lentz evaluation of the incomplete beta continued fraction"""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < CF_TINY:
        d = CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < CF_TINY:
            d = CF_TINY
        c = 1.0 + aa / c
        if abs(c) < CF_TINY:
            c = CF_TINY
        d = 1.0 / d
        h *= d * c

        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < CF_TINY:
            d = CF_TINY
        c = 1.0 + aa / c
        if abs(c) < CF_TINY:
            c = CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            return h
    raise NumericalError(
        f'Incomplete beta continued fraction did not converge '
        f'(a={a}, b={b}, x={x})'
    )


def regularized_incomplete_beta(a, b, x):
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1"""
    if a <= 0 or b <= 0:
        raise DataValidationError('Beta parameters must be positive')
    if not 0.0 <= x <= 1.0:
        raise DataValidationError(f'x={x} is outside [0, 1]')
    if x == 0.0 or x == 1.0:
        return x

    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t, df):
    """Two-sided Student-t tail probability P(|T| >= |t|)"""
    if df < 1:
        raise DataValidationError('Degrees of freedom must be at least 1')
    if math.isnan(t):
        raise NumericalError('t statistic is NaN')
    if math.isinf(t):
        return P_VALUE_FLOOR
    x = df / (df + t * t)
    p = regularized_incomplete_beta(df / 2.0, 0.5, x)
    return min(1.0, max(P_VALUE_FLOOR, p))


def ols_regression(points):
    """Fit y = intercept + slope * x and test the slope against zero"""
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise DataValidationError('Points must be (x, y) pairs')
    n = data.shape[0]
    if n < 3:
        raise DataValidationError(f'Regression needs n >= 3, got {n}')
    x, y = data[:, 0], data[:, 1]
    if not np.all(np.isfinite(data)):
        raise DataValidationError('Points must be finite')

    x_mean, y_mean = x.mean(), y.mean()
    dx, dy = x - x_mean, y - y_mean
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DataValidationError('x values have zero variance')
    sxy = float(dx @ dy)
    syy = float(dy @ dy)

    slope = sxy / sxx
    intercept = float(y_mean - slope * x_mean)
    residuals = y - (intercept + slope * x)
    sse = float(residuals @ residuals)
    stderr = math.sqrt(sse / (n - 2) / sxx)

    if stderr > 0:
        t_statistic = slope / stderr
        p_value = student_t_two_sided_p(t_statistic, n - 2)
    elif slope == 0:
        t_statistic, p_value = 0.0, 1.0
    else:
        t_statistic = math.copysign(math.inf, slope)
        p_value = P_VALUE_FLOOR

    r_squared = 1.0 if sse == 0 or syy == 0 else 1.0 - sse / syy
    return RegressionResult(
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        t_statistic=t_statistic,
        p_value=p_value,
        r_squared=min(1.0, max(0.0, r_squared)),
        n=n,
    )
