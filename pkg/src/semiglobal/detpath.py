"""Deterministic (zero-volatility) transition path by stacked-time Newton."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import HorizonError, PathError, SpecificationError
from .model import EvalPoint, ModelSpec, SteadyState, evaluate, jacobians, steady_state


def propagate_exogenous(Lambda, z0, T: int) -> np.ndarray:
    """Rows ``z_0, ..., z_T`` of ``z_{t+1} = Lambda z_t``."""
    Lam = np.atleast_2d(np.asarray(Lambda, dtype=float))
    z = np.atleast_1d(np.asarray(z0, dtype=float))
    if Lam.shape != (z.size, z.size) and z.size:
        raise SpecificationError(f"Lambda shape {Lam.shape} does not match z0 of length {z.size}")
    out = np.zeros((T + 1, z.size))
    out[0] = z
    for t in range(T):
        out[t + 1] = Lam @ out[t]
    return out


@dataclass(frozen=True)
class DeterministicPath:
    """Solved path; rows are dates ``0 .. T+1`` (the last row is the terminal steady state).

    Equations are dated ``0 .. T``; equation ``t`` links dates ``t`` and ``t+1``.
    """

    T: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    steady: SteadyState
    iterations: int = 0
    residual: float = 0.0

    def point(self, t: int) -> EvalPoint:
        return EvalPoint(self.y[t + 1], self.y[t], self.x[t + 1], self.x[t], self.z[t + 1], self.z[t])


def _unpack(w: np.ndarray, x0: np.ndarray, steady: SteadyState, T: int) -> tuple[np.ndarray, np.ndarray]:
    nx, ny = x0.size, steady.y.size
    n = nx + ny
    x = np.empty((T + 2, nx))
    y = np.empty((T + 2, ny))
    x[0] = x0
    y[0] = w[:ny]
    body = w[ny:ny + T * n].reshape(T, n)
    x[1:T + 1] = body[:, :nx]
    y[1:T + 1] = body[:, nx:]
    x[T + 1] = w[ny + T * n:]
    y[T + 1] = steady.y
    return x, y


def _stack_residual(model: ModelSpec, x, y, z, T: int) -> np.ndarray:
    return np.concatenate([
        evaluate(model, EvalPoint(y[t + 1], y[t], x[t + 1], x[t], z[t + 1], z[t])) for t in range(T + 1)
    ])


def _stack_jacobian(model: ModelSpec, x, y, z, T: int) -> sp.csc_matrix:
    # Unknown ordering: y_0, (x_1, y_1), ..., (x_T, y_T), x_{T+1}.
    nx, ny = model.n_x, model.n_y
    n = nx + ny
    rows, cols, vals = [], [], []

    def put(block, r0, c0):
        if block.size == 0:
            return
        r, c = np.nonzero(block)
        rows.append(r + r0)
        cols.append(c + c0)
        vals.append(block[r, c])

    def ycol(t):
        return 0 if t == 0 else ny + (t - 1) * n + nx

    def xcol(t):
        return ny + (t - 1) * n

    for t in range(T + 1):
        f1, f2, f3, f4, _, _ = jacobians(model, EvalPoint(y[t + 1], y[t], x[t + 1], x[t], z[t + 1], z[t]))
        r0 = t * n
        if t + 1 <= T:
            put(f1, r0, ycol(t + 1))
        put(f2, r0, ycol(t))
        put(f3, r0, xcol(t + 1))
        if t >= 1:
            put(f4, r0, xcol(t))
    N = (T + 1) * n
    if rows:
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    return sp.csc_matrix((vals, (rows, cols)), shape=(N, N))


def solve_path(
    model: ModelSpec,
    x0,
    z0=None,
    T: int = 300,
    *,
    steady: SteadyState | None = None,
    steady_guess=None,
    tol: float = 1e-10,
    tol_terminal: float = 1e-8,
    max_iter: int = 50,
) -> DeterministicPath:
    """Solve the ``sigma = 0`` two-point boundary problem from ``(x0, z0)``.

    The unknowns are ``y_0 .. y_T`` and ``x_1 .. x_{T+1}``; ``y_{T+1}`` is
    pinned to its steady-state value.  A terminal state that has not settled
    within ``tol_terminal`` of the steady state raises :class:`HorizonError`.
    """
    nx, ny, nz = model.n_x, model.n_y, model.n_z
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).reshape(nx)
    z0 = np.zeros(nz) if z0 is None else np.atleast_1d(np.asarray(z0, dtype=float)).reshape(nz)
    if T < 1:
        raise HorizonError("horizon must be at least 1")
    if steady is None:
        guess = steady_guess if steady_guess is not None else model.steady_guess
        guess = np.zeros(ny + nx) if guess is None else guess
        steady = steady_state(model, guess)
    z = propagate_exogenous(model.Lambda, z0, T + 1)

    n = nx + ny
    w = np.concatenate([steady.y] + [np.concatenate([steady.x, steady.y])] * T + [steady.x])
    x, y = _unpack(w, x0, steady, T)
    F = _stack_residual(model, x, y, z, T)
    trace = [float(np.max(np.abs(F)))]
    it = 0
    free_steps = 3
    while trace[-1] >= tol:
        if it >= max_iter:
            raise PathError(
                f"stacked Newton did not converge in {max_iter} iterations",
                diagnostics={"residual_trace": trace},
            )
        J = _stack_jacobian(model, x, y, z, T)
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", sp.linalg.MatrixRankWarning)
            step = spsolve(J, -F)
        if not np.all(np.isfinite(step)):
            raise PathError("singular stacked Jacobian", diagnostics={"residual_trace": trace})
        lam = 1.0
        for _ in range(30):
            x_try, y_try = _unpack(w + lam * step, x0, steady, T)
            with np.errstate(all="ignore"):
                try:
                    F_try = _stack_residual(model, x_try, y_try, z, T)
                except (ValueError, OverflowError, ZeroDivisionError):
                    F_try = np.array([np.inf])
            if np.all(np.isfinite(F_try)):
                nrm = np.max(np.abs(F_try))
                if nrm < trace[-1]:
                    break
                # A few non-monotone full steps let Newton through models that
                # are nearly linear in some unknowns.
                if lam == 1.0 and free_steps > 0 and nrm < 1e3 * max(trace[-1], 1.0):
                    free_steps -= 1
                    break
            lam *= 0.5
        else:
            raise PathError("line search failed", diagnostics={"residual_trace": trace})
        w = w + lam * step
        x, y, F = x_try, y_try, F_try
        trace.append(float(np.max(np.abs(F))))
        it += 1

    gap = max(
        float(np.max(np.abs(x[T + 1] - steady.x), initial=0.0)),
        float(np.max(np.abs(x[T] - steady.x), initial=0.0)),
        float(np.max(np.abs(y[T] - steady.y), initial=0.0)),
    )
    if gap > tol_terminal:
        raise HorizonError(
            f"path has not reached the steady state by T={T} (gap {gap:.3g}); increase the horizon",
            diagnostics={"terminal_gap": gap, "T": T},
        )
    for a in (x, y, z):
        a.setflags(write=False)
    return DeterministicPath(T, x, y, z, steady, it, trace[-1])


def path_residual(model: ModelSpec, path: DeterministicPath) -> float:
    """Largest absolute residual over the equations dated ``0 .. T``."""
    F = _stack_residual(model, path.x, path.y, path.z, path.T)
    return float(np.max(np.abs(F))) if F.size else 0.0
