"""Stable/unstable block diagonalisation of the steady-state transition matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur, solve_sylvester

from .errors import BlanchardKahnError, ConditioningError, IndeterminacyError

UNIT_ROOT_BAND = 1e-10
MAX_COND = 1e8


def spectral_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


@dataclass(frozen=True)
class SchurSplit:
    """``Z^{-1} L Z = diag(A, B)`` with ``A`` stable (``n_x``) and ``B`` unstable (``n_y``)."""

    Z: np.ndarray
    Z_inv: np.ndarray
    A: np.ndarray
    B: np.ndarray
    gamma: float
    scale: float
    eigenvalues: np.ndarray

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    def _blk(self, M, i, j):
        k = self.n_x
        return (M[:k, :k], M[:k, k:], M[k:, :k], M[k:, k:])[2 * i + j]

    Z11 = property(lambda s: s._blk(s.Z, 0, 0))
    Z12 = property(lambda s: s._blk(s.Z, 0, 1))
    Z21 = property(lambda s: s._blk(s.Z, 1, 0))
    Z22 = property(lambda s: s._blk(s.Z, 1, 1))
    Zi11 = property(lambda s: s._blk(s.Z_inv, 0, 0))
    Zi12 = property(lambda s: s._blk(s.Z_inv, 0, 1))
    Zi21 = property(lambda s: s._blk(s.Z_inv, 1, 0))
    Zi22 = property(lambda s: s._blk(s.Z_inv, 1, 1))

    @property
    def alpha(self) -> float:
        """Spectral radius of ``A``."""
        return float(np.max(np.abs(np.linalg.eigvals(self.A)), initial=0.0))

    @property
    def beta(self) -> float:
        """Spectral radius of ``B^{-1}``."""
        return float(1.0 / np.min(np.abs(np.linalg.eigvals(self.B)))) if self.B.size else 0.0

    def block_diagonal(self) -> np.ndarray:
        n = self.Z.shape[0]
        P = np.zeros((n, n))
        P[: self.n_x, : self.n_x] = self.A
        P[self.n_x :, self.n_x :] = self.B
        return P


def _diag_blocks(T: np.ndarray) -> list[slice]:
    """Diagonal 1x1 / 2x2 blocks of a real quasi-triangular matrix."""
    out, i, n = [], 0, T.shape[0]
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            out.append(slice(i, i + 2))
            i += 2
        else:
            out.append(slice(i, i + 1))
            i += 1
    return out


def _scaling(T: np.ndarray, k: float) -> np.ndarray:
    """Diagonal ``D`` with ``D^{-1} T D`` having off-diagonal parts shrunk by powers of ``k``.

    2x2 blocks get an extra balancing so that their norm equals their
    eigenvalue modulus.
    """
    d = np.ones(T.shape[0])
    for j, blk in enumerate(_diag_blocks(T)):
        d[blk] = k**j
        if blk.stop - blk.start == 2:
            i = blk.start
            b, c = T[i, i + 1], T[i + 1, i]
            d[i + 1] *= np.sqrt(abs(c / b)) if b != 0 else 1.0
    return d


def block_schur(L, n_y: int, gamma: float | None = None, *, max_halvings: int = 60) -> SchurSplit:
    """Norm-controlled block split of ``L``.

    Steps: ordered real Schur form (stable block first), Sylvester solve to
    remove the coupling block, then a diagonal similarity within each block
    with base ``k = 2^{-m}`` for the smallest ``m`` such that
    ``||A|| < alpha + gamma`` and ``||B^{-1}|| < beta + gamma``.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if L.shape != (n, n):
        raise ValueError("L must be square")
    n_x = n - n_y
    eig = np.linalg.eigvals(L)
    mod = np.abs(eig)
    if np.any(np.abs(mod - 1.0) <= UNIT_ROOT_BAND):
        raise IndeterminacyError("unit-modulus eigenvalue in the linearised system", diagnostics={"moduli": mod.tolist()})
    n_unstable = int(np.sum(mod > 1.0))
    if n_unstable != n_y:
        raise BlanchardKahnError(
            f"{n_unstable} unstable eigenvalues for {n_y} jump variables", n_unstable=n_unstable, n_jump=n_y
        )
    T, Q, sdim = schur(L, output="real", sort="iuc")
    T11, T12, T22 = T[:n_x, :n_x], T[:n_x, n_x:], T[n_x:, n_x:]
    X = solve_sylvester(T11, -T22, -T12) if n_x and n_y else np.zeros((n_x, n_y))

    e1, e2 = np.linalg.eigvals(T11), np.linalg.eigvals(T22)
    alpha = float(np.max(np.abs(e1), initial=0.0))
    beta = float(1.0 / np.min(np.abs(e2))) if n_y else 0.0
    if gamma is None:
        gamma = (1.0 - max(alpha, beta)) / 2.0

    k = 1.0
    for _ in range(max_halvings + 1):
        d1, d2 = _scaling(T11, k), _scaling(T22, k)
        A = T11 * d1[None, :] / d1[:, None]
        B = T22 * d2[None, :] / d2[:, None]
        okA = n_x == 0 or spectral_norm(A) < alpha + gamma
        okB = n_y == 0 or spectral_norm(np.linalg.inv(B)) < beta + gamma
        if okA and okB:
            break
        k *= 0.5
    else:
        raise ConditioningError("no scaling achieves the norm bounds", stage="schur-split")

    # Z = Q [[I, X], [0, I]] D,   Z^{-1} = D^{-1} [[I, -X], [0, I]] Q^T
    d = np.concatenate([d1, d2])
    Z2 = np.eye(n)
    Z2[:n_x, n_x:] = X
    Z2i = np.eye(n)
    Z2i[:n_x, n_x:] = -X
    Z = (Q @ Z2) * d[None, :]
    Z_inv = (Z2i @ Q.T) / d[:, None]
    cond = float(np.linalg.cond(Z))
    if cond > MAX_COND:
        raise ConditioningError(
            f"block-diagonalising transform is ill-conditioned (cond {cond:.3g})",
            stage="schur-split",
            diagnostics={"cond_Z": cond},
        )
    return SchurSplit(Z, Z_inv, A, B, float(gamma), k, eig)


def bk_check(L_or_split, n_y: int) -> dict:
    """Stable/unstable eigenvalue counts against the number of jump variables."""
    if isinstance(L_or_split, SchurSplit):
        eig = L_or_split.eigenvalues
    else:
        eig = np.linalg.eigvals(np.asarray(L_or_split, dtype=float))
    mod = np.abs(eig)
    n_unstable = int(np.sum(mod > 1.0 + UNIT_ROOT_BAND))
    n_unit = int(np.sum(np.abs(mod - 1.0) <= UNIT_ROOT_BAND))
    n_stable = mod.size - n_unstable - n_unit
    return {
        "n_stable": n_stable,
        "n_unstable": n_unstable,
        "n_unit": n_unit,
        "n_jump": int(n_y),
        "passed": n_unit == 0 and n_unstable == n_y,
    }
