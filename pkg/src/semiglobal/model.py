"""Model specification: residual map, exogenous AR(1) block and derivatives.

A model is the expectational system

    E_t f(y_{t+1}, y_t, x_{t+1}, x_t, z_{t+1}, z_t) = 0,
    z_{t+1} = Lambda z_t + sigma * eps_{t+1},   Var(eps) = Omega,

with ``x`` the endogenous states, ``y`` the non-state endogenous variables
and ``z`` the exogenous states.  The six arguments of ``f`` are referred to
by the 0-based indices in :data:`ARG_NAMES`.

Derivatives come from analytic closures when the model supplies them and
from central finite differences otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConditioningError, DifferentiationError, SpecificationError, SteadyStateError

Array = np.ndarray

ARG_NAMES = ("y_next", "y_cur", "x_next", "x_cur", "z_next", "z_cur")
PAIRS = tuple((i, j) for i in range(6) for j in range(i, 6))

ResidualFn = Callable[[Array, Array, Array, Array, Array, Array], Array]
JacobianFn = Callable[..., Sequence[Array]]
HessianFn = Callable[..., Mapping[tuple[int, int], Array]]


def _as_matrix(a, shape, name):
    out = np.atleast_2d(np.asarray(a, dtype=float))
    if out.shape != shape:
        raise SpecificationError(f"{name} must have shape {shape}, got {out.shape}")
    return out


@dataclass(frozen=True)
class ModelSpec:
    """A DSGE model in residual form.

    Parameters
    ----------
    n_x, n_y, n_z : int
        Number of endogenous states, non-state endogenous variables and
        exogenous states.
    residual : callable
        ``f(y_next, y_cur, x_next, x_cur, z_next, z_cur) -> array`` of length
        ``n_x + n_y``.
    Lambda, Omega : array_like
        AR(1) matrix of the exogenous block and innovation covariance.
    sigma : float
        Scale of the innovations.  ``sigma = 0`` is the deterministic skeleton.
    jacobian, hessian : callable, optional
        Analytic derivative providers with the same signature as
        ``residual``.  ``jacobian`` returns the six Jacobians; ``hessian``
        returns a mapping ``(i, j) -> (n_eq, d_i, d_j)`` for ``i <= j``
        (missing pairs are zero).
    x_shock_loading : array_like, optional
        ``(n_x, n_z)`` matrix ``G`` with ``x_{t+1} - E_t x_{t+1} = G (z_{t+1} -
        E_t z_{t+1})``.  Zero (the default) means ``x_{t+1}`` is chosen at
        ``t``.  Models whose state is driven directly by the innovation set it
        to the loading of that innovation.
    steady_guess : array_like, optional
        Starting point ``(y, x)`` for the steady-state Newton solve.
    """

    n_x: int
    n_y: int
    n_z: int
    residual: ResidualFn
    Lambda: Array
    Omega: Array
    sigma: float = 0.0
    jacobian: JacobianFn | None = None
    hessian: HessianFn | None = None
    x_shock_loading: Array | None = None
    name: str = "model"
    steady_guess: Array | None = None
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for k in ("n_x", "n_y", "n_z"):
            if int(getattr(self, k)) < 0:
                raise SpecificationError(f"{k} must be nonnegative")
        nz = self.n_z
        Lam = _as_matrix(self.Lambda, (nz, nz), "Lambda") if nz else np.zeros((0, 0))
        Om = _as_matrix(self.Omega, (nz, nz), "Omega") if nz else np.zeros((0, 0))
        if nz:
            if np.max(np.abs(np.linalg.eigvals(Lam))) >= 1.0:
                raise SpecificationError("all eigenvalues of Lambda must have modulus < 1")
            if not np.allclose(Om, Om.T, atol=1e-12):
                raise SpecificationError("Omega must be symmetric")
            if np.min(np.linalg.eigvalsh(Om)) < -1e-12:
                raise SpecificationError("Omega must be positive semidefinite")
        if self.sigma < 0:
            raise SpecificationError("sigma must be nonnegative")
        G = self.x_shock_loading
        G = np.zeros((self.n_x, nz)) if G is None else np.asarray(G, dtype=float).reshape(self.n_x, nz)
        object.__setattr__(self, "Lambda", Lam)
        object.__setattr__(self, "Omega", Om)
        object.__setattr__(self, "x_shock_loading", G)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def n_eq(self) -> int:
        return self.n_x + self.n_y

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.n_y, self.n_y, self.n_x, self.n_x, self.n_z, self.n_z)

    def with_sigma(self, sigma: float) -> "ModelSpec":
        from dataclasses import replace

        return replace(self, sigma=float(sigma))


@dataclass(frozen=True)
class EvalPoint:
    """Argument tuple ``(y_next, y_cur, x_next, x_cur, z_next, z_cur)``."""

    y_next: Array
    y_cur: Array
    x_next: Array
    x_cur: Array
    z_next: Array
    z_cur: Array

    def __post_init__(self):
        for name in ARG_NAMES:
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))

    def args(self) -> tuple[Array, ...]:
        return tuple(getattr(self, n) for n in ARG_NAMES)

    @classmethod
    def steady(cls, y, x, n_z: int) -> "EvalPoint":
        z = np.zeros(n_z)
        return cls(y, y, x, x, z, z)

    def check(self, model: ModelSpec) -> None:
        for name, d, v in zip(ARG_NAMES, model.dims, self.args()):
            if v.shape != (d,):
                raise SpecificationError(f"{name} has shape {v.shape}, model expects ({d},)")


@dataclass(frozen=True)
class DerivativeBundle:
    """Jacobians ``jac[i]`` and upper-triangle Hessian blocks ``hess[(i, j)]``.

    ``hess[(i, j)][r]`` is the ``(d_i, d_j)`` matrix of second partials of
    residual ``r``; the lower triangle is served by :meth:`pair`.
    """

    jac: tuple[Array, ...]
    hess: Mapping[tuple[int, int], Array] | None = None

    def pair(self, i: int, j: int) -> Array:
        if self.hess is None:
            raise ValueError("bundle carries no second derivatives")
        if i <= j:
            return self.hess[(i, j)]
        return np.swapaxes(self.hess[(j, i)], 1, 2)

    def bilinear(self, i: int, j: int, u: Array, v: Array) -> Array:
        """``f_ij(u, v)`` as a residual-length vector."""
        return np.einsum("rab,a,b->r", self.pair(i, j), u, v)

    def full_hessian(self) -> Array:
        """Dense ``(n_eq, N, N)`` Hessian over the stacked argument vector."""
        dims = [m.shape[1] for m in self.jac]
        offs = np.concatenate([[0], np.cumsum(dims)])
        n_eq = self.jac[0].shape[0]
        H = np.zeros((n_eq, offs[-1], offs[-1]))
        for i, j in PAIRS:
            blk = self.hess[(i, j)]
            H[:, offs[i]:offs[i + 1], offs[j]:offs[j + 1]] = blk
            H[:, offs[j]:offs[j + 1], offs[i]:offs[i + 1]] = np.swapaxes(blk, 1, 2)
        return H


def evaluate(model: ModelSpec, p: EvalPoint) -> Array:
    """Residual ``f(p)``."""
    p.check(model)
    r = np.asarray(model.residual(*p.args()), dtype=float).reshape(-1)
    if r.shape != (model.n_eq,):
        raise SpecificationError(f"residual has length {r.size}, expected n_x + n_y = {model.n_eq}")
    return r


def _safe_residual(model: ModelSpec, dims: Sequence[int]) -> Callable[[Array], Array]:
    """Residual on the stacked vector; evaluation failures come back as NaN."""

    def f(v):
        try:
            with np.errstate(all="ignore"):
                return np.asarray(model.residual(*_split(v, dims)), dtype=float).reshape(-1)
        except (ArithmeticError, ValueError):
            return np.full(model.n_eq, np.nan)

    return f


def _split(vec: Array, dims: Sequence[int]) -> list[Array]:
    return np.split(vec, np.cumsum(dims)[:-1])


def _locate(k: int, dims: Sequence[int]) -> tuple[int, int]:
    offs = np.cumsum(dims)
    arg = int(np.searchsorted(offs, k, side="right"))
    return arg, k - (int(offs[arg - 1]) if arg else 0)


def _fd_jacobian(model: ModelSpec, p: EvalPoint) -> tuple[Array, ...]:
    dims = model.dims
    w = np.concatenate(p.args())
    f = _safe_residual(model, dims)
    J = np.zeros((model.n_eq, w.size))
    for k in range(w.size):
        h = max(1e-6, 1e-7 * abs(w[k]))
        e = np.zeros_like(w)
        e[k] = h
        fp, fm = f(w + e), f(w - e)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            arg, comp = _locate(k, dims)
            raise DifferentiationError(
                f"non-finite residual in stencil of {ARG_NAMES[arg]}[{comp}]", argument=arg, component=comp
            )
        J[:, k] = (fp - fm) / (2 * h)
    return tuple(_split(J.T, dims)[i].T for i in range(6))


def _fd_hessian(model: ModelSpec, p: EvalPoint) -> dict[tuple[int, int], Array]:
    dims = model.dims
    w = np.concatenate(p.args())
    n = w.size
    steps = np.maximum(1e-4, 1e-5 * np.abs(w))

    f = _safe_residual(model, dims)
    H = np.zeros((model.n_eq, n, n))
    for k in range(n):
        for l in range(k, n):
            ek = np.zeros(n)
            el = np.zeros(n)
            ek[k] = steps[k]
            el[l] = steps[l]
            vals = [f(w + ek + el), f(w + ek - el), f(w - ek + el), f(w - ek - el)]
            if not all(np.all(np.isfinite(v)) for v in vals):
                arg, comp = _locate(k, dims)
                raise DifferentiationError(
                    f"non-finite residual in stencil of {ARG_NAMES[arg]}[{comp}]", argument=arg, component=comp
                )
            H[:, k, l] = H[:, l, k] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * steps[k] * steps[l])
    offs = np.concatenate([[0], np.cumsum(dims)])
    return {(i, j): H[:, offs[i]:offs[i + 1], offs[j]:offs[j + 1]].copy() for i, j in PAIRS}


def jacobians(model: ModelSpec, p: EvalPoint) -> tuple[Array, ...]:
    """The six Jacobians ``f_1 .. f_6`` (returned 0-based) at ``p``."""
    p.check(model)
    if model.jacobian is None:
        return _fd_jacobian(model, p)
    jac = tuple(np.asarray(m, dtype=float).reshape(model.n_eq, d) for m, d in zip(model.jacobian(*p.args()), model.dims))
    if len(jac) != 6:
        raise SpecificationError("analytic jacobian must return six matrices")
    return jac


def hessians(model: ModelSpec, p: EvalPoint) -> dict[tuple[int, int], Array]:
    """Upper-triangle second-derivative blocks ``f_ij``, ``i <= j``, at ``p``."""
    p.check(model)
    if model.hessian is None:
        return _fd_hessian(model, p)
    given = model.hessian(*p.args())
    dims = model.dims
    out = {}
    for i, j in PAIRS:
        blk = given.get((i, j))
        if blk is None:
            out[(i, j)] = np.zeros((model.n_eq, dims[i], dims[j]))
        else:
            out[(i, j)] = np.asarray(blk, dtype=float).reshape(model.n_eq, dims[i], dims[j])
    return out


def derivatives(model: ModelSpec, p: EvalPoint, order: int = 2) -> DerivativeBundle:
    jac = jacobians(model, p)
    return DerivativeBundle(jac, hessians(model, p) if order >= 2 else None)


class SteadyState(NamedTuple):
    y: Array
    x: Array


def steady_state(
    model: ModelSpec, guess, *, tol: float = 1e-12, max_iter: int = 200, max_halvings: int = 30
) -> SteadyState:
    """Damped Newton on ``g(y, x) = f(y, y, x, x, 0, 0)``.

    ``guess`` is the stacked vector ``(y, x)`` of length ``n_y + n_x``.
    """
    ny, nx = model.n_y, model.n_x
    w = np.asarray(guess, dtype=float).reshape(-1).copy()
    if w.size != ny + nx:
        raise SpecificationError(f"guess must have length n_y + n_x = {ny + nx}")
    z0 = np.zeros(model.n_z)

    def g(v):
        y, x = v[:ny], v[ny:]
        return evaluate(model, EvalPoint(y, y, x, x, z0, z0))

    def jac(v):
        y, x = v[:ny], v[ny:]
        J = jacobians(model, EvalPoint(y, y, x, x, z0, z0))
        return np.hstack([J[0] + J[1], J[2] + J[3]])

    r = g(w)
    for _ in range(max_iter):
        nrm = np.max(np.abs(r)) if r.size else 0.0
        if nrm < tol:
            break
        J = jac(w)
        if np.linalg.cond(J) > 1e12:
            raise ConditioningError("steady-state Jacobian is singular", diagnostics={"residual": float(nrm)})
        step = np.linalg.solve(J, -r)
        lam = 1.0
        for _ in range(max_halvings + 1):
            w_try = w + lam * step
            r_try = g(w_try)
            if np.all(np.isfinite(r_try)) and np.max(np.abs(r_try)) < nrm:
                break
            lam *= 0.5
        else:
            raise SteadyStateError("line search failed", diagnostics={"residual": float(nrm)})
        w, r = w_try, r_try
    else:
        nrm = float(np.max(np.abs(r)))
        if nrm >= tol:
            raise SteadyStateError(
                f"Newton did not converge in {max_iter} iterations", diagnostics={"residual": nrm}
            )
    J = jac(w)
    if w.size and np.linalg.cond(J) > 1e12:
        raise ConditioningError("steady-state Jacobian is singular at the solution")
    return SteadyState(w[:ny].copy(), w[ny:].copy())
