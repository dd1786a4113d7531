"""Second-order expansion in the shock scale around the deterministic path.

Order 0 is the deterministic path.  Order 1 is a linear system forced by the
exogenous state; its moving-average loadings give the second moments that
drive the order-2 system.
"""

from __future__ import annotations

import contextlib
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .detpath import DeterministicPath, solve_path
from .errors import HorizonError, SolverError, SpecificationError
from .model import ModelSpec, hessians
from .schur import SchurSplit, block_schur
from .tvlre import (
    OrderSolution,
    RecursionTables,
    TVSystem,
    backward_recursion,
    build_tvsystem,
    norm_bounds,
    solve_order,
    transition_matrix,
)


@dataclass(frozen=True)
class MACoefficients:
    """First-order loadings on the innovation of date ``i``: ``v_t = sum_{i<=t} load[t, i] eps_i``.

    Arrays are indexed ``[t, i]`` for ``t, i = 0 .. T+1``; entries with
    ``i > t`` or ``i = 0`` are zero.
    """

    gamma: np.ndarray
    delta: np.ndarray
    rho_x: np.ndarray
    rho_y: np.ndarray
    rho_z: np.ndarray

    @property
    def T(self) -> int:
        return self.gamma.shape[0] - 2

    def covariance(self, which: str, t: int, Omega: np.ndarray) -> np.ndarray:
        """``Var_0`` of ``x_t`` / ``y_t`` / ``z_t`` at first order."""
        C = getattr(self, "rho_" + which)[t]
        return np.einsum("iak,kl,ibl->ab", C, Omega, C)


def _lambda_powers(Lam: np.ndarray, n: int) -> np.ndarray:
    out = np.empty((n,) + Lam.shape)
    out[0] = np.eye(Lam.shape[0])
    for k in range(1, n):
        out[k] = Lam @ out[k - 1]
    return out


def first_order_ma(sys: TVSystem, tables: RecursionTables, shock_loading: np.ndarray | None = None) -> MACoefficients:
    """Moving-average loadings of the order-1 solution (zero initial conditions).

    ``shock_loading`` is the model's ``G``: the surprise in ``x_t`` per unit
    innovation.
    """
    sp = sys.split
    T, nx, ny, nz = tables.T, sys.n_x, sys.n_y, sys.n_z
    G = np.zeros((nx, nz)) if shock_loading is None else np.asarray(shock_loading, dtype=float)
    K, R = tables.K, tables.R
    LP = _lambda_powers(sys.Lambda, T + 2)
    gamma = np.zeros((T + 2, T + 2, nx, nz))
    delta = np.zeros((T + 2, T + 2, ny, nz))
    rho_z = np.zeros((T + 2, T + 2, nz, nz))
    A, Q12, Pi1 = sys.A_t, sys.Q12, sys.Pi1
    for t in range(1, T + 2):
        i = np.arange(1, t + 1)
        rho_z[t, 1 : t + 1] = LP[t - i]
        if t >= 2:
            Abar = A[t - 1] - Q12[t - 1] @ K[t - 1]
            Pbar = Pi1[t - 1] - Q12[t - 1] @ R[t - 1]
            gamma[t, 1:t] = Abar @ gamma[t - 1, 1:t] + Pbar @ LP[t - 1 - np.arange(1, t)]
        # surprise at date t
        W = sp.Zi22 + K[t] @ sp.Zi12
        dy = -np.linalg.solve(W, (sp.Zi21 + K[t] @ sp.Zi11) @ G + R[t]) if ny else np.zeros((0, nz))
        gamma[t, t] = sp.Zi11 @ G + sp.Zi12 @ dy
        delta[t, 1 : t + 1] = -K[t] @ gamma[t, 1 : t + 1] - R[t] @ rho_z[t, 1 : t + 1]
    rho_x = sp.Z11 @ gamma + sp.Z12 @ delta
    rho_y = sp.Z21 @ gamma + sp.Z22 @ delta
    return MACoefficients(gamma, delta, rho_x, rho_y, rho_z)


def stacked_loadings(ma: MACoefficients, t: int) -> np.ndarray:
    """Loadings of ``(y_{t+1}, y_t, x_{t+1}, x_t, z_{t+1}, z_t)`` on each innovation date, shape ``(T+2, N, n_z)``."""
    if t + 1 > ma.T + 1:
        raise HorizonError(f"moments for the equation dated {t} need loadings beyond the stored horizon {ma.T}")
    return np.concatenate(
        [ma.rho_y[t + 1], ma.rho_y[t], ma.rho_x[t + 1], ma.rho_x[t], ma.rho_z[t + 1], ma.rho_z[t]], axis=1
    )


def argument_covariance(ma: MACoefficients, Omega: np.ndarray, t: int) -> np.ndarray:
    C = stacked_loadings(ma, t)
    return np.einsum("iak,kl,ibl->ab", C, Omega, C)


def eta2_forcing(H: np.ndarray, ma: MACoefficients, Omega: np.ndarray, t: int) -> np.ndarray:
    """Expected second-order forcing of the equation dated ``t``.

    ``H`` is the dense ``(n_eq, N, N)`` Hessian at date ``t``; the forcing is
    ``(1/2) sum_ab H[r, a, b] Cov(v_a, v_b)`` over the stacked first-order
    arguments ``v``.
    """
    return 0.5 * np.einsum("rab,ab->r", H, argument_covariance(ma, Omega, t))


def _dense_hessian(blocks: dict, dims) -> np.ndarray:
    offs = np.concatenate([[0], np.cumsum(dims)])
    n_eq = next(iter(blocks.values())).shape[0]
    H = np.zeros((n_eq, offs[-1], offs[-1]))
    for (i, j), blk in blocks.items():
        H[:, offs[i] : offs[i + 1], offs[j] : offs[j + 1]] = blk
        H[:, offs[j] : offs[j + 1], offs[i] : offs[i + 1]] = np.swapaxes(blk, 1, 2)
    return H


def path_hessians(model: ModelSpec, path: DeterministicPath) -> np.ndarray:
    """Dense Hessians at every equation date, shape ``(T+1, n_eq, N, N)``."""
    return np.stack([_dense_hessian(hessians(model, path.point(t)), model.dims) for t in range(path.T + 1)])


def eta2_path(H: np.ndarray, ma: MACoefficients, Omega: np.ndarray) -> np.ndarray:
    T = H.shape[0] - 1
    C = np.concatenate([ma.rho_y[1:], ma.rho_y[:-1], ma.rho_x[1:], ma.rho_x[:-1], ma.rho_z[1:], ma.rho_z[:-1]], axis=2)[: T + 1]
    Cov = np.einsum("tiak,kl,tibl->tab", C, Omega, C)
    return 0.5 * np.einsum("trab,tab->tr", H, Cov)


@dataclass
class ExpansionSolution:
    """Per-order expected paths (``x[n]``, ``y[n]`` over dates ``0 .. T+1``) and their sum in powers of sigma."""

    order: int
    sigma: float
    path: DeterministicPath
    split: SchurSplit | None
    system: TVSystem | None
    tables: dict[int, RecursionTables]
    orders: dict[int, OrderSolution]
    ma: MACoefficients | None
    x: np.ndarray
    y: np.ndarray
    timings: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def Ex(self) -> np.ndarray:
        return sum(self.sigma**n * self.x[n] for n in range(self.order + 1))

    @property
    def Ey(self) -> np.ndarray:
        return sum(self.sigma**n * self.y[n] for n in range(self.order + 1))

    @property
    def policy(self) -> np.ndarray:
        """Combined ``y_0``."""
        return self.Ey[0]

    def y0(self, n: int) -> np.ndarray:
        return self.y[n][0]

    def impulse_response(self, shock=None) -> tuple[np.ndarray, np.ndarray]:
        """First-order expected paths of ``(x, y)`` after a date-1 innovation ``shock`` (default: a unit innovation in every component)."""
        if self.ma is None:
            raise SpecificationError("impulse responses need an order >= 1 solution")
        nz = self.ma.rho_z.shape[-1]
        e = np.ones(nz) if shock is None else np.asarray(shock, dtype=float).reshape(nz)
        return self.ma.rho_x[:, 1] @ e, self.ma.rho_y[:, 1] @ e


@contextlib.contextmanager
def _stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except SolverError:
        raise
    except (np.linalg.LinAlgError, FloatingPointError, ValueError, ZeroDivisionError, OverflowError) as exc:
        raise SolverError(f"{type(exc).__name__}: {exc}", stage=name) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def solve_expansion(
    model: ModelSpec,
    x0,
    z0=None,
    sigma: float | None = None,
    order: int = 2,
    *,
    T: int = 300,
    terminal_u=None,
    path: DeterministicPath | None = None,
) -> ExpansionSolution:
    """Run the pipeline up to ``order`` (0, 1 or 2) from ``(x0, z0)``.

    ``terminal_u`` sets the order-2 terminal value in split coordinates
    (default zero).
    """
    if order not in (0, 1, 2):
        raise SpecificationError("order must be 0, 1 or 2")
    sigma = model.sigma if sigma is None else float(sigma)
    timings: dict[str, float] = {}
    notes: list[str] = []
    if path is None:
        with _stage("det-path", timings):
            path = solve_path(model, x0, z0, T)
    T = path.T
    nx, ny = model.n_x, model.n_y
    xs = [np.asarray(path.x)]
    ys = [np.asarray(path.y)]
    tables: dict[int, RecursionTables] = {}
    orders: dict[int, OrderSolution] = {}
    split = system = ma = None
    if order >= 1:
        with _stage("schur-split", timings):
            L = transition_matrix(model, path.steady)
            split = block_schur(L, ny)
        with _stage("tvlre", timings):
            system = build_tvsystem(model, path, split, L)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                tables[1] = backward_recursion(system)
            notes.extend(tables[1].warnings)
            orders[1] = solve_order(system, tables[1])
        xs.append(orders[1].x)
        ys.append(orders[1].y)
    if order >= 2:
        with _stage("expansion", timings):
            ma = first_order_ma(system, tables[1], model.x_shock_loading)
            H = path_hessians(model, path)
            e2 = eta2_path(H, ma, model.Omega)
        with _stage("tvlre", timings):
            tables[2] = backward_recursion(system, e2, terminal_u, check=False)
            orders[2] = solve_order(system, tables[2])
        xs.append(orders[2].x)
        ys.append(orders[2].y)
    elif order == 1:
        with _stage("expansion", timings):
            ma = first_order_ma(system, tables[1], model.x_shock_loading)
    return ExpansionSolution(order, sigma, path, split, system, tables, orders, ma, np.stack(xs), np.stack(ys), timings, notes)


def simulate_first_order(
    sol: ExpansionSolution, model: ModelSpec, t_max: int, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``n`` first-order paths of ``(x, y, z)`` for dates ``0 .. t_max``.

    Steps the solved linear system forward with Gaussian innovations; an
    independent check on the moving-average moments.
    """
    sys, tb, sp = sol.system, sol.tables[1], sol.split
    G = model.x_shock_loading
    chol = np.linalg.cholesky(model.Omega) if model.n_z else np.zeros((0, 0))
    nx, ny, nz = model.n_x, model.n_y, model.n_z
    s, z = np.zeros((n, nx)), np.zeros((n, nz))
    xs, ys, zs = [np.zeros((n, nx))], [np.zeros((n, ny))], [np.zeros((n, nz))]
    for t in range(t_max):
        u = -s @ tb.K[t].T - z @ tb.R[t].T
        s_mean = s @ sys.A_t[t].T + u @ sys.Q12[t].T + z @ sys.Pi1[t].T
        u_mean = -s_mean @ tb.K[t + 1].T - (z @ model.Lambda.T) @ tb.R[t + 1].T
        eps = rng.standard_normal((n, nz)) @ chol.T
        z = z @ model.Lambda.T + eps
        x = s_mean @ sp.Z11.T + u_mean @ sp.Z12.T + eps @ G.T
        # y from the date-(t+1) policy: Zi21 x + Zi22 y = -K (Zi11 x + Zi12 y) - R z
        W = sp.Zi22 + tb.K[t + 1] @ sp.Zi12
        rhs = -(x @ (sp.Zi21 + tb.K[t + 1] @ sp.Zi11).T) - z @ tb.R[t + 1].T
        y = np.linalg.solve(W, rhs.T).T
        s = x @ sp.Zi11.T + y @ sp.Zi12.T
        xs.append(x)
        ys.append(y)
        zs.append(z)
    return np.stack(xs), np.stack(ys), np.stack(zs)


def solvability_summary(sol: ExpansionSolution) -> dict:
    if sol.system is None:
        return {}
    nb = norm_bounds(sol.system)
    rep = sol.tables[1].solvability
    return {
        "a": nb.a,
        "b": nb.b,
        "c": nb.c,
        "d": nb.d,
        "norm_A": nb.norm_A,
        "norm_B_inv": nb.norm_B_inv,
        "solvability": None if rep is None else rep.to_dict(),
        "max_cond_L": float(np.max(sol.tables[1].cond_L)),
        "max_cond_Phi": float(np.max(sol.system.cond_Phi)),
        "warnings": list(sol.warnings),
    }
