"""Closed-form results for the Burnside asset-pricing model.

The price-dividend ratio ``y`` satisfies

    y_t = beta * E_t[exp(theta * x_{t+1}) * (1 + y_{t+1})],
    x_{t+1} = (1 - rho) * xbar + rho * x_t + sigma * eps_{t+1},

with ``eps ~ N(0, 1)``.  Everything here is computed from series in
closed form and is deliberately independent of the generic solver, so it
can serve as its oracle.  All functions are vectorised over ``x``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, SpecificationError

# Below this deviation the deterministic path equals the steady state to
# machine precision, so series along the path can reuse steady values.
_NEGLIGIBLE = 1e-18


@dataclass(frozen=True)
class BurnsideParams:
    beta: float = 0.95
    theta: float = -1.5
    xbar: float = 0.0179
    rho: float = 0.9
    sigma: float = 0.015
    N_terms: int = 2000

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise SpecificationError("beta must lie in (0, 1)")
        if not (self.theta < 1 and self.theta != 0):
            raise SpecificationError("theta must be < 1 and nonzero")
        if not abs(self.rho) < 1:
            raise SpecificationError("|rho| must be < 1")
        if self.sigma < 0:
            raise SpecificationError("sigma must be nonnegative")
        if self.N_terms < 500:
            raise SpecificationError("N_terms must be at least 500")

    @property
    def sigma_x(self) -> float:
        """Unconditional standard deviation of ``x``."""
        return self.sigma / math.sqrt(1 - self.rho**2)

    @property
    def growth_factor(self) -> float:
        """``beta * exp(theta * xbar)``."""
        return self.beta * math.exp(self.theta * self.xbar)

    @property
    def ybar(self) -> float:
        q = self.growth_factor
        return q / (1 - q)

    def summability_ratio(self, sigma: float | None = None) -> float:
        s = self.sigma if sigma is None else sigma
        t, r = self.theta, self.rho
        return self.beta * math.exp(t * self.xbar + t**2 * s**2 / (2 * (1 - r) ** 2))

    def grid(self, n: int = 41, delta: float = 5.0) -> np.ndarray:
        return np.linspace(self.xbar - delta * self.sigma_x, self.xbar + delta * self.sigma_x, n)


def _idx(p: BurnsideParams) -> np.ndarray:
    return np.arange(1, p.N_terms + 1, dtype=float)


def exponent_coefficients(p: BurnsideParams, sigma: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-term coefficients ``(a_i, b_i)`` of the exact series, ``i = 1..N``."""
    s = p.sigma if sigma is None else sigma
    i = _idx(p)
    t, r = p.theta, p.rho
    bracket = i - 2 * r * (1 - r**i) / (1 - r) + r**2 * (1 - r ** (2 * i)) / (1 - r**2)
    a = t * p.xbar * i + 0.5 * (t * s / (1 - r)) ** 2 * bracket
    b = t * r * (1 - r**i) / (1 - r)
    return a, b


def _check_summable(p: BurnsideParams, sigma: float) -> float:
    q = p.summability_ratio(sigma)
    if q >= 1:
        raise DivergenceError(f"exact series diverges: beta*exp(theta*xbar + ...) = {q:.6g} >= 1")
    return q


def truncation_tail(p: BurnsideParams, x, sigma: float | None = None) -> np.ndarray:
    """Geometric-envelope estimate of the neglected tail of :func:`exact_policy`."""
    s = p.sigma if sigma is None else sigma
    q = _check_summable(p, s)
    a, b = exponent_coefficients(p, s)
    x = np.asarray(x, dtype=float)
    last = np.exp(p.N_terms * math.log(p.beta) + a[-1] + b[-1] * (x - p.xbar))
    return last * q / (1 - q)


def exact_policy(p: BurnsideParams, x, sigma: float | None = None) -> np.ndarray:
    """Exact price-dividend ratio ``y(x)``, truncated at ``N_terms`` terms."""
    s = p.sigma if sigma is None else sigma
    _check_summable(p, s)
    a, b = exponent_coefficients(p, s)
    x = np.asarray(x, dtype=float)
    logb = _idx(p) * math.log(p.beta)
    terms = np.exp(logb + a + b * (x[..., None] - p.xbar))
    y = terms.sum(axis=-1)
    tail = truncation_tail(p, x, s)
    if np.any(tail > 1e-12 * np.abs(y)):
        warnings.warn("exact_policy: truncation tail exceeds 1e-12 relative; raise N_terms", RuntimeWarning)
    return y


def det_policy(p: BurnsideParams, x) -> np.ndarray:
    """Deterministic (``sigma = 0``) policy ``y0(x)``."""
    x = np.asarray(x, dtype=float)
    i = _idx(p)
    t, r = p.theta, p.rho
    load = r * (1 - r**i) / (1 - r)
    expo = i * math.log(p.beta) + t * (p.xbar * i + load * (x[..., None] - p.xbar))
    return np.exp(expo).sum(axis=-1)


def det_path(p: BurnsideParams, x0: float, length: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form deterministic path ``(x0_t, y0_t)`` for ``t = 0..length-1``."""
    d = float(x0) - p.xbar
    m = np.arange(length)
    dev = p.rho ** m.astype(float) * d
    xs = p.xbar + dev
    ys = np.full(length, p.ybar)
    live = np.abs(dev) * max(1.0, abs(p.theta) / (1 - p.rho)) > _NEGLIGIBLE
    if live.any():
        ys[live] = det_policy(p, xs[live])
    return xs, ys


def k_inf(p: BurnsideParams, x0: float, t) -> np.ndarray:
    """Infinite-horizon first-order loading ``K(t)`` with ``y1_t = -K(t) x1_t``.

    ``K(t) = -theta * sum_i (beta rho)^i (1 + y0_{t+i}) exp(theta sum_{j<=i} x0_{t+j})``
    along the deterministic path started at ``x0``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=int))
    N = p.N_terms
    i = _idx(p)
    th, r = p.theta, p.rho
    d = float(x0) - p.xbar
    _, ys = det_path(p, x0, int(t.max()) + N + 1)
    out = np.empty(t.shape, dtype=float)
    loads = r * (1 - r**i) / (1 - r)
    for n, tt in enumerate(t):
        # sum_{j=1..i} x0_{t+j} = i*xbar + rho^t * rho(1-rho^i)/(1-rho) * d
        S = i * p.xbar + r**tt * loads * d
        terms = np.exp(i * math.log(p.beta * r) + th * S) * (1 + ys[tt + 1: tt + N + 1])
        out[n] = -th * terms.sum()
    return out


def k_inf_steady(p: BurnsideParams) -> float:
    q = p.beta * p.rho * math.exp(p.theta * p.xbar)
    return -p.theta * q * (1 + p.ybar) / (1 - q)


def _k_inf_along(p: BurnsideParams, x0: float, upto: int) -> np.ndarray:
    """``K(1..upto)``, switching to the steady value once the path is flat."""
    d = abs(float(x0) - p.xbar)
    scale = max(1.0, abs(p.theta) / (1 - p.rho))
    if d == 0:
        flat_from = 0
    elif p.rho == 0:
        flat_from = 1
    else:
        flat_from = max(0, int(math.ceil(math.log(_NEGLIGIBLE / (d * scale)) / math.log(abs(p.rho)))) + 1)
    ts = np.arange(1, upto + 1)
    K = np.full(upto, k_inf_steady(p))
    live = ts < flat_from
    if live.any():
        K[live] = k_inf(p, x0, ts[live])
    return K


def y2_policy(p: BurnsideParams, x0) -> np.ndarray:
    """Second-order term ``y0^(2)(x0)`` of the semi-global expansion."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    N = p.N_terms
    i = _idx(p)
    th, r = p.theta, p.rho
    b = r * (1 - r**i) / (1 - r)
    var = (1 - r ** (2 * i)) / (1 - r**2)
    out = np.empty_like(x0)
    for n, xx in enumerate(x0):
        _, ys = det_path(p, xx, N + 1)
        K = _k_inf_along(p, xx, N)
        w = np.exp(i * math.log(p.beta) + th * (i * p.xbar + b * (xx - p.xbar)))
        terms = w * var * (th * (1 + ys[1:]) - 2 * K)
        s = terms.sum()
        if abs(terms[-1]) > 1e-12 * abs(s):
            warnings.warn("y2_policy: truncation tail exceeds 1e-12 relative", RuntimeWarning)
        out[n] = 0.5 * th * s
    return out


def semiglobal_policy(p: BurnsideParams, x0, sigma: float | None = None) -> np.ndarray:
    s = p.sigma if sigma is None else sigma
    return det_policy(p, x0) + s**2 * y2_policy(p, x0)


def taylor_coefficients(p: BurnsideParams, order: int) -> dict[tuple[int, int], float]:
    """Coefficients ``C[(k, q)]`` of ``(x - xbar)^k * sigma^(2q)`` in the local expansion.

    The local expansion is the Taylor polynomial of the exact policy in
    ``(x - xbar, sigma)`` around ``(xbar, 0)``, truncated at total degree
    ``order``.  Odd powers of sigma vanish because the exact policy is even
    in sigma.
    """
    i = _idx(p)
    th, r = p.theta, p.rho
    w = np.exp(i * (math.log(p.beta) + th * p.xbar))
    b = th * r * (1 - r**i) / (1 - r)
    half_c = 0.5 * (th / (1 - r)) ** 2 * (i - 2 * r * (1 - r**i) / (1 - r) + r**2 * (1 - r ** (2 * i)) / (1 - r**2))
    coef = {}
    for q in range(order // 2 + 1):
        for k in range(order - 2 * q + 1):
            coef[(k, q)] = float(np.sum(w * b**k * half_c**q)) / (math.factorial(k) * math.factorial(q))
    return coef


def local_taylor(p: BurnsideParams, order: int, x, sigma: float | None = None) -> np.ndarray:
    """Local perturbation approximation of total degree ``order`` (2 or 6)."""
    if order not in (2, 6):
        raise ValueError("order must be 2 or 6")
    s = p.sigma if sigma is None else sigma
    d = np.asarray(x, dtype=float) - p.xbar
    out = np.zeros_like(d)
    for (k, q), c in taylor_coefficients(p, order).items():
        out = out + c * d**k * s ** (2 * q)
    return out


@dataclass
class AccuracyReport:
    """Policy values on a grid for the exact and approximate solutions.

    ``columns`` maps column names to equally long arrays; ``flags`` holds
    the sign checks at the right endpoint and ``summary`` the error ranking.
    """

    columns: dict[str, np.ndarray]
    flags: dict[str, bool]
    summary: dict[str, float] = field(default_factory=dict)

    def header(self) -> list[str]:
        return list(self.columns)

    def rows(self) -> list[list[float]]:
        return np.column_stack([self.columns[k] for k in self.columns]).tolist()


APPROXIMATIONS = ("semiglobal2", "taylor2", "taylor6")


def accuracy_report(p: BurnsideParams, grid=None) -> AccuracyReport:
    """Compare the semi-global and local approximations with the exact policy."""
    x = p.grid() if grid is None else np.asarray(grid, dtype=float)
    exact = exact_policy(p, x)
    approx = {
        "semiglobal2": semiglobal_policy(p, x),
        "taylor2": local_taylor(p, 2, x),
        "taylor6": local_taylor(p, 6, x),
    }
    cols = {"x0": x, "exact": exact, **approx}
    for k, v in approx.items():
        cols[f"err_{k}"] = v - exact
    for k, v in approx.items():
        cols[f"relerr_{k}"] = (v - exact) / exact

    ybar = p.ybar
    right = int(np.argmax(x))
    exact_sign = float(np.sign(exact[right] - ybar))
    flags = {"exact_below_ybar": bool(exact[right] < ybar)}
    for k, v in approx.items():
        flags[f"sign_mismatch_{k}"] = bool(np.sign(v[right] - ybar) != exact_sign)

    half = x >= p.xbar
    summary = {}
    for k, v in approx.items():
        rel = np.abs((v - exact) / exact)
        summary[f"max_relerr_{k}"] = float(rel.max())
        summary[f"max_relerr_right_{k}"] = float(rel[half].max())
    return AccuracyReport(cols, flags, summary)
