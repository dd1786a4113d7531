"""Built-in models, registered by name for the CLI."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .burnside import BurnsideParams
from .errors import ConfigError
from .model import ModelSpec


def burnside_model(p: BurnsideParams | None = None, sigma: float | None = None) -> ModelSpec:
    """Burnside asset-pricing model in residual form.

    Dividend growth ``x`` is the endogenous state and the innovation itself is
    the exogenous state (``Lambda = 0``), so that

        f = [ y_t - beta * exp(theta x_{t+1}) (1 + y_{t+1}),
              x_{t+1} - (1 - rho) xbar - rho x_t - z_{t+1} ].

    ``x_{t+1}`` moves one-for-one with the innovation, hence a unit
    ``x_shock_loading``.
    """
    p = p or BurnsideParams()
    beta, theta, xbar, rho = p.beta, p.theta, p.xbar, p.rho

    def f(yn, yc, xn, xc, zn, zc):
        e = math.exp(theta * xn[0])
        return np.array([
            yc[0] - beta * e * (1 + yn[0]),
            xn[0] - (1 - rho) * xbar - rho * xc[0] - zn[0],
        ])

    def jac(yn, yc, xn, xc, zn, zc):
        e = math.exp(theta * xn[0])
        return (
            np.array([[-beta * e], [0.0]]),
            np.array([[1.0], [0.0]]),
            np.array([[-beta * theta * e * (1 + yn[0])], [1.0]]),
            np.array([[0.0], [-rho]]),
            np.array([[0.0], [-1.0]]),
            np.array([[0.0], [0.0]]),
        )

    def hess(yn, yc, xn, xc, zn, zc):
        e = math.exp(theta * xn[0])
        return {
            (0, 2): np.array([[[-beta * theta * e]], [[0.0]]]),
            (2, 2): np.array([[[-beta * theta**2 * e * (1 + yn[0])]], [[0.0]]]),
        }

    return ModelSpec(
        n_x=1, n_y=1, n_z=1, residual=f, Lambda=[[0.0]], Omega=[[1.0]],
        sigma=p.sigma if sigma is None else sigma,
        jacobian=jac, hessian=hess, x_shock_loading=[[1.0]],
        name="burnside", steady_guess=[p.ybar, xbar],
        params={"beta": beta, "theta": theta, "xbar": xbar, "rho": rho, "sigma": p.sigma},
    )


def linear_model(M: list, *, n_x: int, n_y: int, n_z: int = 0, Lambda=None, Omega=None, sigma=0.0) -> ModelSpec:
    """Linear model ``f = sum_i M[i] @ arg_i`` with exact derivatives."""
    mats = [np.asarray(m, dtype=float).reshape(n_x + n_y, d) for m, d in zip(M, (n_y, n_y, n_x, n_x, n_z, n_z))]

    def f(*args):
        return sum(m @ a for m, a in zip(mats, args))

    return ModelSpec(
        n_x=n_x, n_y=n_y, n_z=n_z, residual=f,
        Lambda=np.zeros((n_z, n_z)) if Lambda is None else Lambda,
        Omega=np.eye(n_z) if Omega is None else Omega,
        sigma=sigma, jacobian=lambda *a: tuple(m.copy() for m in mats), hessian=lambda *a: {},
        name="linear",
    )


def growth_model(alpha: float = 0.33, beta: float = 0.9, rho: float = 0.9, sigma: float = 0.01) -> ModelSpec:
    """Brock-Mirman growth model (log utility, full depreciation).

    ``y = c``, ``x = k`` (chosen one period ahead), ``z = log TFP``.  No
    analytic derivatives are supplied, so the finite-difference provider
    is used.  The exact policy ``c = (1 - alpha beta) e^z k^alpha`` makes it a
    useful check on the generic solver.
    """

    def f(yn, yc, xn, xc, zn, zc):
        c, cn, k, kn = yc[0], yn[0], xc[0], xn[0]
        return np.array([
            1.0 / c - beta * alpha * math.exp(zn[0]) * kn ** (alpha - 1) / cn,
            kn - math.exp(zc[0]) * k**alpha + c,
        ])

    return ModelSpec(
        n_x=1, n_y=1, n_z=1, residual=f, Lambda=[[rho]], Omega=[[1.0]], sigma=sigma,
        name="growth", steady_guess=list(growth_steady(alpha, beta)), params={"alpha": alpha, "beta": beta, "rho": rho, "sigma": sigma},
    )


def growth_steady(alpha: float = 0.33, beta: float = 0.9) -> tuple[float, float]:
    k = (alpha * beta) ** (1 / (1 - alpha))
    return (1 - alpha * beta) * k**alpha, k


REGISTRY: dict[str, Callable[..., ModelSpec]] = {
    "burnside": lambda **kw: burnside_model(
        BurnsideParams(**{k: v for k, v in kw.items() if k in BurnsideParams.__dataclass_fields__})
    ),
    "growth": lambda **kw: growth_model(**kw),
}


def get_model(name: str, **overrides) -> ModelSpec:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; known: {sorted(REGISTRY)}") from None
    try:
        return factory(**overrides)
    except TypeError as exc:
        raise ConfigError(f"bad parameter override for {name!r}: {exc}") from None
