"""Linear rational-expectations systems with deterministic time-varying coefficients.

Along a deterministic path the order-``n`` system reads, in the coordinates
``[s; u] = Z^{-1} [x; y]`` of the steady-state block split,

    E_t s_{t+1} = A_t s_t + Q12_t u_t + Pi1_t z_t + Psi1_t e_t
    E_t u_{t+1} = B_t u_t + Q21_t s_t + Pi2_t z_t + Psi2_t e_t

where ``e_t`` is the expected forcing of the equation dated ``t``.  The
backward recursion from a horizon ``T`` yields ``u_t = -K_t s_t - R_t z_t + g_t``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .detpath import DeterministicPath
from .errors import (
    ExistenceError,
    IndeterminacyError,
    RecursionBreakdownError,
    SingularSystemError,
    SolvabilityPreconditionError,
)
from .model import EvalPoint, ModelSpec, jacobians
from .schur import SchurSplit, spectral_norm

MAX_COND = 1e12


def transition_matrix(model: ModelSpec, path_or_steady) -> np.ndarray:
    """``L = -[f_x', f_y']^{-1} [f_x, f_y]`` at the steady state."""
    st = getattr(path_or_steady, "steady", path_or_steady)
    p = EvalPoint.steady(st.y, st.x, model.n_z)
    f1, f2, f3, f4, _, _ = jacobians(model, p)
    Phi = np.hstack([f3, f1])
    if np.linalg.cond(Phi) > MAX_COND:
        raise IndeterminacyError(
            "[f_x', f_y'] is singular at the steady state; a generalised Schur (QZ) method would be required",
            stage="schur-split",
        )
    return -np.linalg.solve(Phi, np.hstack([f4, f2]))


@dataclass(frozen=True)
class TVSystem:
    """Per-date coefficients for equations dated ``0 .. T``; leading axis is ``t``."""

    T: int
    n_x: int
    n_y: int
    n_z: int
    split: SchurSplit
    L: np.ndarray
    Phi: np.ndarray
    Lam: np.ndarray
    M: np.ndarray
    P: np.ndarray  # Z^{-1} Phi_t^{-1} Lam_t Z
    Psi: np.ndarray  # -Z^{-1} Phi_t^{-1}
    Pi: np.ndarray  # -Z^{-1} Phi_t^{-1} (f_z' Lambda + f_z)
    Lambda: np.ndarray
    cond_Phi: np.ndarray

    A_t = property(lambda s: s.P[:, : s.n_x, : s.n_x])
    Q12 = property(lambda s: s.P[:, : s.n_x, s.n_x :])
    Q21 = property(lambda s: s.P[:, s.n_x :, : s.n_x])
    B_t = property(lambda s: s.P[:, s.n_x :, s.n_x :])
    Psi1 = property(lambda s: s.Psi[:, : s.n_x])
    Psi2 = property(lambda s: s.Psi[:, s.n_x :])
    Pi1 = property(lambda s: s.Pi[:, : s.n_x])
    Pi2 = property(lambda s: s.Pi[:, s.n_x :])

    @property
    def Q(self) -> np.ndarray:
        """``Z^{-1} M_t Z``: the deviation of the split-coordinate transition from ``diag(A, B)``."""
        return self.P - self.split.block_diagonal()[None]


def build_tvsystem(model: ModelSpec, path: DeterministicPath, split: SchurSplit, L: np.ndarray | None = None) -> TVSystem:
    T, nx, ny, nz = path.T, model.n_x, model.n_y, model.n_z
    n = nx + ny
    if L is None:
        L = transition_matrix(model, path.steady)
    Phi = np.empty((T + 1, n, n))
    Lam = np.empty((T + 1, n, n))
    Fz = np.empty((T + 1, n, nz))
    for t in range(T + 1):
        f1, f2, f3, f4, f5, f6 = jacobians(model, path.point(t))
        Phi[t] = np.hstack([f3, f1])
        Lam[t] = -np.hstack([f4, f2])
        Fz[t] = f5 @ model.Lambda + f6
    cond = np.linalg.cond(Phi)
    bad = np.nonzero(~(cond < MAX_COND))[0]
    if bad.size:
        t = int(bad[0])
        raise SingularSystemError(f"Phi_t is singular at t={t}", t=t, diagnostics={"cond": float(cond[t])})
    Phi_inv = np.linalg.inv(Phi)
    Zi, Z = split.Z_inv, split.Z
    M = Phi_inv @ Lam - L[None]
    P = Zi[None] @ (Phi_inv @ Lam) @ Z[None]
    Psi = -Zi[None] @ Phi_inv
    Pi = Psi @ Fz
    return TVSystem(T, nx, ny, nz, split, L, Phi, Lam, M, P, Psi, Pi, model.Lambda.copy(), cond)


@dataclass(frozen=True)
class NormBounds:
    """Suprema over dates of ``||A_t||``, ``||B_t^{-1}||``, ``||Q12_t||``, ``||Q21_t||``."""

    a: float
    b: float
    c: float
    d: float
    norm_A: float
    norm_B_inv: float


def norm_bounds(sys: TVSystem, start: int = 0) -> NormBounds:
    sl = slice(start, sys.T + 1)
    nrm = lambda stack: max((spectral_norm(m) for m in stack), default=0.0)
    binv = [np.linalg.inv(b) for b in sys.B_t[sl]] if sys.n_y else []
    split = sys.split
    return NormBounds(
        a=nrm(sys.A_t[sl]),
        b=nrm(binv),
        c=nrm(sys.Q12[sl]),
        d=nrm(sys.Q21[sl]),
        norm_A=spectral_norm(split.A),
        norm_B_inv=spectral_norm(np.linalg.inv(split.B)) if sys.n_y else 0.0,
    )


@dataclass(frozen=True)
class SolvabilityReport:
    passed: bool
    lhs: float
    rhs: float
    s1: float | None
    s2: float | None
    margin: float | None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _check_ab(a: float, b: float) -> None:
    if a >= 1 or b >= 1:
        raise SolvabilityPreconditionError(
            f"norm bounds a={a:.6g}, b={b:.6g} must both be below 1; start closer to the steady state",
            diagnostics={"a": a, "b": b},
        )


def solvability_check(nb: NormBounds) -> SolvabilityReport:
    """Sufficient condition ``c d < ((1 - a b) / (2 b))^2`` for a bounded solution."""
    a, b, c, d = nb.a, nb.b, nb.c, nb.d
    _check_ab(a, b)
    lhs = c * d
    rhs = math.inf if b == 0 else ((1 - a * b) / (2 * b)) ** 2
    passed = lhs < rhs
    s1 = s2 = margin = None
    if passed:
        s1, s2 = _fixed_points(a, b, c, d)
        margin = (1 + b * a) / 2
    return SolvabilityReport(passed, lhs, rhs, s1, s2, margin)


def _fixed_points(a: float, b: float, c: float, d: float) -> tuple[float, float]:
    disc = (1 - b * a) ** 2 - 4 * b * b * c * d
    if disc < 0:
        raise ExistenceError("majorant map has no fixed point", diagnostics={"discriminant": disc})
    r = math.sqrt(disc)
    s1 = 2 * b * d / (1 - b * a + r)
    s2 = math.inf if b * c == 0 else (1 - b * a + r) / (2 * b * c)
    return s1, s2


@dataclass(frozen=True)
class MajorantResult:
    s1: float
    s2: float
    iterates: np.ndarray


def majorant_fixed_points(a: float, b: float, c: float, d: float, *, tol: float = 1e-15, max_iter: int = 100_000) -> MajorantResult:
    """Closed-form fixed points of ``s -> (bd + ba s) / (1 - bc s)`` and its orbit from 0."""
    _check_ab(a, b)
    s1, s2 = _fixed_points(a, b, c, d)
    its = [0.0]
    for _ in range(max_iter):
        s = its[-1]
        nxt = (b * d + b * a * s) / (1 - b * c * s)
        its.append(nxt)
        if abs(nxt - s) <= tol * max(1.0, abs(nxt)):
            break
    return MajorantResult(s1, s2, np.array(its))


@dataclass(frozen=True)
class RecursionTables:
    """Backward-recursion output for horizon ``T``.

    ``K``, ``R`` and ``g`` have ``T + 2`` rows (dates ``0 .. T+1``; the last row
    is the terminal condition); ``Lmat`` and ``cond_L`` have ``T + 1``.
    """

    T: int
    K: np.ndarray
    R: np.ndarray
    g: np.ndarray
    Lmat: np.ndarray
    cond_L: np.ndarray
    forcing: np.ndarray
    solvability: SolvabilityReport | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)


def _conditioning(Lt: np.ndarray, Bt: np.ndarray) -> float:
    """Condition number of ``Lt``, measured against the steady-state unstable block as well as itself."""
    if not Lt.size:
        return 1.0
    sv = np.linalg.svd(Lt, compute_uv=False)
    top = max(sv[0], spectral_norm(Bt))
    return math.inf if sv[-1] == 0 else float(top / sv[-1])


def backward_recursion(
    sys: TVSystem,
    forcing: np.ndarray | None = None,
    terminal_u=None,
    *,
    horizon: int | None = None,
    check: bool = True,
) -> RecursionTables:
    """``K_t, R_t, g_t`` for ``t = T .. 0`` from ``K_{T+1} = 0``, ``R_{T+1} = 0``, ``g_{T+1} = terminal_u``.

    ``forcing[t]`` is the expected forcing of the equation dated ``t`` in the
    original equation space.  ``horizon`` truncates the system at an earlier
    date than ``sys.T``.
    """
    T = sys.T if horizon is None else int(horizon)
    if T > sys.T:
        raise ValueError(f"horizon {T} exceeds the system horizon {sys.T}")
    nx, ny, nz = sys.n_x, sys.n_y, sys.n_z
    n = nx + ny
    e = np.zeros((T + 1, n)) if forcing is None else np.asarray(forcing, dtype=float)[: T + 1]
    if e.shape != (T + 1, n):
        raise ValueError(f"forcing must have shape ({T + 1}, {n})")

    notes: list[str] = []
    report = None
    if check:
        try:
            report = solvability_check(norm_bounds(sys))
            if not report.passed:
                notes.append("sufficient solvability inequality fails; relying on per-step invertibility")
        except SolvabilityPreconditionError as exc:
            notes.append(str(exc))
        for msg in notes:
            warnings.warn(msg, RuntimeWarning, stacklevel=2)

    K = np.zeros((T + 2, ny, nx))
    R = np.zeros((T + 2, ny, nz))
    g = np.zeros((T + 2, ny))
    if terminal_u is not None:
        g[T + 1] = np.asarray(terminal_u, dtype=float).reshape(ny)
    Lm = np.zeros((T + 1, ny, ny))
    cond = np.zeros(T + 1)
    A, Q12, Q21, B = sys.A_t, sys.Q12, sys.Q21, sys.B_t
    Psi1, Psi2, Pi1, Pi2 = sys.Psi1, sys.Psi2, sys.Pi1, sys.Pi2
    Lam = sys.Lambda
    for t in range(T, -1, -1):
        Kn = K[t + 1]
        Lt = B[t] + Kn @ Q12[t]
        Lm[t] = Lt
        cond[t] = _conditioning(Lt, sys.split.B)
        if not cond[t] < MAX_COND:
            raise RecursionBreakdownError(
                f"recursion matrix is singular at t={t}", t=t, diagnostics={"cond": float(cond[t])}
            )
        K[t] = np.linalg.solve(Lt, Q21[t] + Kn @ A[t])
        R[t] = np.linalg.solve(Lt, Pi2[t] + Kn @ Pi1[t] + R[t + 1] @ Lam)
        g[t] = np.linalg.solve(Lt, g[t + 1] - (Psi2[t] + Kn @ Psi1[t]) @ e[t])
    return RecursionTables(T, K, R, g, Lm, cond, e, report, tuple(notes))


def policy_matrix(split: SchurSplit, K: np.ndarray) -> np.ndarray:
    """Map ``x_t -> y_t`` implied by ``u_t = -K_t s_t`` (zero exogenous state and forcing).

    Works on a stack of ``K`` matrices.
    """
    nx = split.n_x
    S = split.Z11[None] - split.Z12[None] @ K
    Y = split.Z21[None] - split.Z22[None] @ K
    return Y @ np.linalg.inv(S) if nx else np.zeros(K.shape[:-1] + (0,))


@dataclass(frozen=True)
class OrderSolution:
    """Expected paths ``E_0`` of one expansion order, dates ``0 .. T+1``."""

    s: np.ndarray
    u: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @property
    def y0(self) -> np.ndarray:
        return self.y[0]


def solve_order(sys: TVSystem, tables: RecursionTables, x0=None) -> OrderSolution:
    """Expected solution path from the order-``n`` initial state ``x0`` (default 0).

    The initial jump solves ``x0 = Z11 s0 + Z12 u0`` with ``u0 = -K_0 s0 + g_0``.
    """
    sp = sys.split
    nx, ny = sys.n_x, sys.n_y
    T = tables.T
    x0 = np.zeros(nx) if x0 is None else np.asarray(x0, dtype=float).reshape(nx)
    K, g, e = tables.K, tables.g, tables.forcing
    # y0 = (Z^22 + K0 Z^12)^{-1} [g0 - (Z^21 + K0 Z^11) x0]
    W = sp.Zi22 + K[0] @ sp.Zi12
    if ny and np.linalg.cond(W) > MAX_COND:
        raise IndeterminacyError("initial jump matrix is singular", stage="tvlre")
    y0 = np.linalg.solve(W, g[0] - (sp.Zi21 + K[0] @ sp.Zi11) @ x0) if ny else np.zeros(0)
    s = np.zeros((T + 2, nx))
    u = np.zeros((T + 2, ny))
    s[0] = sp.Zi11 @ x0 + sp.Zi12 @ y0
    A, Q12, Psi1 = sys.A_t, sys.Q12, sys.Psi1
    for t in range(T + 1):
        u[t] = -K[t] @ s[t] + g[t]
        s[t + 1] = A[t] @ s[t] + Q12[t] @ u[t] + Psi1[t] @ e[t]
    u[T + 1] = g[T + 1]
    x = s @ sp.Z11.T + u @ sp.Z12.T
    y = s @ sp.Z21.T + u @ sp.Z22.T
    return OrderSolution(s, u, x, y)


@dataclass(frozen=True)
class ConvergenceReport:
    horizons: tuple[int, ...]
    differences: tuple[float, ...]
    rate: float
    decaying: bool

    def to_dict(self) -> dict:
        return {
            "horizons": list(self.horizons),
            "differences": list(self.differences),
            "rate": self.rate,
            "decaying": self.decaying,
        }


def limit_convergence_test(sys: TVSystem, forcing=None, T1: int = 100, step: int = 25, n_steps: int = 2) -> ConvergenceReport:
    """Horizon sensitivity of ``K``: ``max_j ||K^{(T)}_j - K^{(T+step)}_j||`` for ``T = T1, T1+step, ...``.

    ``rate`` is the per-period geometric factor fitted to successive
    differences.  Non-decay is reported, not raised.
    """
    hs = [T1 + i * step for i in range(n_steps + 1)]
    tabs = [backward_recursion(sys, forcing, horizon=h, check=False).K for h in hs]
    diffs = []
    for Ka, Kb in zip(tabs, tabs[1:]):
        m = Ka.shape[0]
        diffs.append(max(spectral_norm(Ka[j] - Kb[j]) for j in range(m)))
    pos = [d for d in diffs if d > 0]
    if len(pos) == len(diffs) and len(diffs) >= 2:
        slope = np.polyfit(hs[:-1], np.log(diffs), 1)[0]
        rate = float(np.exp(slope / 1.0))
    else:
        rate = 0.0
    decaying = all(b <= a for a, b in zip(diffs, diffs[1:]))
    return ConvergenceReport(tuple(hs), tuple(diffs), rate, decaying)
