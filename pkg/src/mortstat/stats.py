"""Goodness-of-fit tests, log-normal fitting and correlation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .errors import DegenerateDataError, DomainError, InvalidInputError

EXACT_ONE_SAMPLE_MAX_N = 1000
EXACT_TWO_SAMPLE_MAX_CELLS = 10_000

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n: int | tuple[int, int]

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.n, tuple):
            d["n"] = list(self.n)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class LogNormalParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInputError(f"sigma must be positive, got {self.sigma}")

    def cdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        return _STD_NORMAL.cdf((math.log(x) - self.mu) / self.sigma)

    def ppf(self, q: float) -> float:
        return math.exp(self.mu + self.sigma * _STD_NORMAL.inv_cdf(q))


STANDARD_LOGNORMAL = LogNormalParams(0.0, 1.0)


def _positive(samples: Sequence[float]) -> list[float]:
    values = [float(v) for v in samples]
    for v in values:
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"log-normal samples must be positive and finite, got {v!r}")
    return values


def fit_lognormal(samples: Sequence[float]) -> LogNormalParams:
    """Maximum-likelihood log-normal fit (1/n spread of the logs)."""
    values = _positive(samples)
    if len(values) < 2:
        raise DegenerateDataError("need at least two samples to fit a log-normal")
    logs = [math.log(v) for v in values]
    mu = math.fsum(logs) / len(logs)
    var = math.fsum((v - mu) ** 2 for v in logs) / len(logs)
    if var == 0.0 or len(set(values)) == 1:
        raise DegenerateDataError("all samples equal; log-normal spread is zero")
    return LogNormalParams(mu, math.sqrt(var))


# -- one-sample --------------------------------------------------------------


def ks_statistic(samples: Sequence[float], cdf) -> float:
    xs = sorted(samples)
    n = len(xs)
    d = 0.0
    for i, x in enumerate(xs):
        f = cdf(x)
        d = max(d, (i + 1) / n - f, f - i / n)
    return d


def ks_one_sample(
    samples: Sequence[float],
    params: LogNormalParams,
    params_estimated: bool = True,
) -> TestResult:
    """KS test of ``samples`` against a log-normal with the given parameters.

    The p-value ignores whether ``params`` were estimated from the same data;
    ``params_estimated`` is only recorded in the method tag.
    """
    values = _positive(samples)
    n = len(values)
    if n < 1:
        raise InvalidInputError("no samples")
    d = ks_statistic(values, params.cdf)
    if n <= EXACT_ONE_SAMPLE_MAX_N:
        p, how = kolmogorov_sf_exact(d, n), "exact"
    else:
        p, how = kolmogorov_sf_asymptotic(math.sqrt(n) * d), "asymptotic"
    flag = "true" if params_estimated else "false"
    return TestResult(d, _clip(p), f"ks_1samp_lognormal;p={how};params_estimated={flag}", n)


def kolmogorov_cdf_exact(d: float, n: int) -> float:
    """P(D_n < d) for the two-sided one-sample statistic.

    Marsaglia, Tsang & Wang (2003): an m x m matrix raised to the n-th
    power, with a running decimal exponent to avoid overflow.
    """
    if d <= 0.5 / n:
        # the ECDF can never stay within 1/(2n) of a continuous CDF
        return 0.0
    if d >= 1.0:
        return 1.0
    nd = n * d
    k = int(nd) + 1
    m = 2 * k - 1
    h = k - nd
    H = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i - j + 1 >= 0:
                H[i, j] = 1.0
    for i in range(m):
        H[i, 0] -= h ** (i + 1)
        H[m - 1, i] -= h ** (m - i)
    if 2 * h - 1 > 0:
        H[m - 1, 0] += (2 * h - 1) ** m
    for i in range(m):
        for j in range(m):
            if i - j + 1 > 0:
                H[i, j] /= math.factorial(i - j + 1)

    Q, exponent = _matrix_power_scaled(H, n)
    s = Q[k - 1, k - 1]
    for i in range(1, n + 1):
        s = s * i / n
        if s < 1e-140:
            s *= 1e140
            exponent -= 140
    return min(1.0, max(0.0, s * 10.0**exponent))


def _matrix_power_scaled(A: np.ndarray, n: int) -> tuple[np.ndarray, int]:
    result = np.eye(A.shape[0])
    result_exp = 0
    base, base_exp = A.copy(), 0
    while n:
        if n & 1:
            result = result @ base
            result_exp += base_exp
            result, result_exp = _rescale(result, result_exp)
        n >>= 1
        if n:
            base = base @ base
            base_exp *= 2
            base, base_exp = _rescale(base, base_exp)
    return result, result_exp


def _rescale(M: np.ndarray, exp: int) -> tuple[np.ndarray, int]:
    if np.abs(M).max() > 1e140:
        return M * 1e-140, exp + 140
    return M, exp


def kolmogorov_sf_exact(d: float, n: int) -> float:
    """P(D_n >= d) from the exact finite-n distribution."""
    return _clip(1.0 - kolmogorov_cdf_exact(d, n))


def kolmogorov_sf_asymptotic(x: float) -> float:
    """Limiting survival function P(sqrt(n) D > x)."""
    if x <= 0:
        return 1.0
    if x < 1.0:
        # Jacobi theta form converges fast for small x
        w = math.pi**2 / (8 * x * x)
        cdf = math.sqrt(2 * math.pi) / x * sum(math.exp(-(2 * k - 1) ** 2 * w) for k in range(1, 8))
        return _clip(1.0 - cdf)
    total = 0.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * x * x)
        total += term if k % 2 else -term
        if term < 1e-17:
            break
    return _clip(2.0 * total)


# -- two-sample --------------------------------------------------------------


def _two_sample_counts(a: Sequence[float], b: Sequence[float]) -> int:
    """Largest |F_a - F_b| scaled by n_a*n_b, as an exact integer."""
    xs, ys = sorted(a), sorted(b)
    na, nb = len(xs), len(ys)
    i = j = 0
    best = 0
    while i < na or j < nb:
        v = min(xs[i] if i < na else math.inf, ys[j] if j < nb else math.inf)
        while i < na and xs[i] == v:
            i += 1
        while j < nb and ys[j] == v:
            j += 1
        best = max(best, abs(i * nb - j * na))
    return best


def ks_two_sample(a: Sequence[float], b: Sequence[float], method: str = "auto") -> TestResult:
    """Two-sided two-sample KS test.

    ``method`` is ``"exact"``, ``"asymptotic"`` or ``"auto"`` (exact when
    ``n_a * n_b <= 10_000``).
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    if not a or not b:
        raise InvalidInputError("both samples must be non-empty")
    na, nb = len(a), len(b)
    dnum = _two_sample_counts(a, b)
    d = dnum / (na * nb)
    if method == "auto":
        method = "exact" if na * nb <= EXACT_TWO_SAMPLE_MAX_CELLS else "asymptotic"
    if method == "exact":
        p = float(two_sample_sf_exact(dnum, na, nb))
    elif method == "asymptotic":
        en = math.sqrt(na * nb / (na + nb))
        p = kolmogorov_sf_asymptotic(en * d)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    return TestResult(d, _clip(p), f"ks_2samp;p={method}", (na, nb))


def two_sample_sf_exact(dnum: int, na: int, nb: int) -> Fraction:
    """P(D >= dnum/(na*nb)) under the null, by counting lattice paths.

    A path from (0, 0) to (na, nb) is one interleaving of the pooled sorted
    sample; it stays inside the band when |i*nb - j*na| < dnum at every point.
    """
    if dnum <= 0:
        return Fraction(1)
    row = [0] * (nb + 1)
    for i in range(na + 1):
        for j in range(nb + 1):
            if abs(i * nb - j * na) >= dnum:
                row[j] = 0
            elif i == 0 and j == 0:
                row[j] = 1
            else:
                row[j] = (row[j] if i > 0 else 0) + (row[j - 1] if j > 0 else 0)
    inside = row[nb]
    total = math.comb(na + nb, na)
    return Fraction(total - inside, total)


# -- correlation -------------------------------------------------------------


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation, two-pass (centre first, then accumulate)."""
    if len(x) != len(y):
        raise InvalidInputError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise InvalidInputError("need at least two pairs")
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    mx = math.fsum(xs) / len(xs)
    my = math.fsum(ys) / len(ys)
    dx = [v - mx for v in xs]
    dy = [v - my for v in ys]
    sxx = math.fsum(v * v for v in dx)
    syy = math.fsum(v * v for v in dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateDataError("constant series has undefined correlation")
    sxy = math.fsum(u * v for u, v in zip(dx, dy))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _clip(p: float) -> float:
    return min(1.0, max(0.0, p))
