"""Impulse responses, block Hankel matrices, and minimal realization.

A state-space system ``(A, B, C)`` has impulse response blocks ``G_0 = 0`` and
``G_t = C A^{t-1} B``.  The block Hankel matrix built from those blocks factors
as observability times controllability, its rank stabilizes at the minimal
order, and a balanced SVD factorization recovers a realization from the blocks
alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_matrix, check_square

__all__ = [
    "ImpulseResponse",
    "SystemRealization",
    "SilvermanResult",
    "markov_params",
    "hankel",
    "structure_matrices",
    "silverman_order",
    "minimal_realization",
]


@dataclass(frozen=True)
class ImpulseResponse:
    """Impulse response blocks ``G_0, G_1, ..., G_N``.

    ``blocks[t]`` is the (p, m) matrix ``G_t``; ``G_0`` must be zero.
    """

    m: int
    p: int
    blocks: tuple

    def __post_init__(self):
        if self.m < 1 or self.p < 1:
            raise ValueError(f"m and p must be positive, got m={self.m}, p={self.p}")
        if len(self.blocks) < 1:
            raise ValueError("blocks must contain at least G_0")
        coerced = []
        for t, G in enumerate(self.blocks):
            G = as_matrix(G, f"G_{t}")
            if G.shape != (self.p, self.m):
                raise ValueError(
                    f"G_{t} has shape {G.shape}, expected ({self.p}, {self.m})"
                )
            G.setflags(write=False)
            coerced.append(G)
        if np.any(coerced[0] != 0.0):
            raise ValueError("G_0 must be the zero matrix")
        object.__setattr__(self, "blocks", tuple(coerced))

    @property
    def horizon(self) -> int:
        """Largest available block index N."""
        return len(self.blocks) - 1

    def block(self, t: int) -> np.ndarray:
        if not 0 <= t <= self.horizon:
            raise IndexError(f"block index {t} outside 0..{self.horizon}")
        return self.blocks[t]


@dataclass(frozen=True)
class SystemRealization:
    """A state-space triple ``(A, B, C)``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = check_square(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        n = A.shape[0]
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        for name, M in (("A", A), ("B", B), ("C", C)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @property
    def order(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class SilvermanResult:
    """Outcome of the Hankel rank-stabilization scan.

    ``order`` is the stabilized rank, or None when the ranks kept changing up
    to ``max_depth``.  ``ranks[r - 1]`` is the rank of the depth-r square
    Hankel matrix, for each depth the scan reached.
    """

    order: int | None
    stabilized: bool
    ranks: tuple


def markov_params(sys: SystemRealization, N: int) -> ImpulseResponse:
    """Impulse response ``G_0 = 0``, ``G_t = C A^{t-1} B`` for ``t = 1..N``."""
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    p, m = sys.C.shape[0], sys.B.shape[1]
    blocks = [np.zeros((p, m))]
    CAk = sys.C.copy()
    for _ in range(N):
        blocks.append(CAk @ sys.B)
        CAk = CAk @ sys.A
    return ImpulseResponse(m=m, p=p, blocks=tuple(blocks))


def _numerical_rank(M: np.ndarray, rank_tol: float) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def _block_hankel(g: ImpulseResponse, r: int, rp: int, first: int) -> np.ndarray:
    """Assemble the (r*p, rp*m) matrix with block (i, j) = G_{i+j-first+ ...}.

    Block (i, j), both 1-based, holds ``G_{first + (i-1) + (j-1)}``.
    """
    top = first + (r - 1) + (rp - 1)
    if top > g.horizon:
        raise ValueError(
            f"insufficient blocks: need G_{top} but the impulse response "
            f"stops at G_{g.horizon}"
        )
    p, m = g.p, g.m
    H = np.empty((r * p, rp * m))
    for i in range(r):
        for j in range(rp):
            H[i * p : (i + 1) * p, j * m : (j + 1) * m] = g.blocks[first + i + j]
    return H


def hankel(g: ImpulseResponse, r: int, rp: int) -> np.ndarray:
    """Block Hankel matrix with block ``(i, j) = G_{i+j-1}``, i = 1..r, j = 1..rp."""
    if r < 1 or rp < 1:
        raise ValueError(f"Hankel depths must be positive, got r={r}, rp={rp}")
    return _block_hankel(g, r, rp, first=1)


def structure_matrices(sys: SystemRealization, r: int, rp: int):
    """Observability (depth r) and controllability (depth rp) matrices.

    Returns ``(O, Ctr)`` with ``O = [C; CA; ...; CA^{r-1}]`` of shape (r*p, n)
    and ``Ctr = [B, AB, ..., A^{rp-1}B]`` of shape (n, rp*m).  The depth-(r, rp)
    Hankel matrix of the system's impulse response equals ``O @ Ctr``.
    """
    if r < 1 or rp < 1:
        raise ValueError(f"structure depths must be positive, got r={r}, rp={rp}")
    n = sys.order
    p, m = sys.C.shape[0], sys.B.shape[1]
    O = np.empty((r * p, n))
    row = sys.C.copy()
    for i in range(r):
        O[i * p : (i + 1) * p] = row
        row = row @ sys.A
    Ctr = np.empty((n, rp * m))
    col = sys.B.copy()
    for j in range(rp):
        Ctr[:, j * m : (j + 1) * m] = col
        col = sys.A @ col
    return O, Ctr


def silverman_order(
    g: ImpulseResponse,
    max_depth: int = 8,
    rank_tol: float = 1e-10,
    j_max: int = 3,
) -> SilvermanResult:
    """Minimal order by Hankel rank stabilization.

    Scans depths ``r = 1..max_depth`` and returns the first rank ``rho`` with
    ``rank H_{r,r} = rank H_{r+1,r+j} = rho`` for the tested offsets
    ``j = 1..j_max`` (offsets the available blocks cannot form are skipped,
    but at least ``j = 1`` must be checkable).  When the rank keeps changing
    through ``max_depth``, returns ``order=None`` with the observed rank
    sequence for diagnosis.
    """
    if max_depth < 1:
        raise ValueError(f"max_depth must be at least 1, got {max_depth}")
    if g.horizon < 2:
        raise ValueError(
            "insufficient blocks: the depth-1 stabilization check needs G_2 "
            f"but the impulse response stops at G_{g.horizon}"
        )
    ranks = []
    for r in range(1, max_depth + 1):
        try:
            rho = _numerical_rank(hankel(g, r, r), rank_tol)
        except ValueError:
            break
        ranks.append(rho)
        offsets = [j for j in range(1, j_max + 1) if 2 * r + j <= g.horizon]
        if not offsets:
            break
        stable = all(
            _numerical_rank(_block_hankel(g, r + 1, r + j, first=1), rank_tol) == rho
            for j in offsets
        )
        if stable:
            return SilvermanResult(order=rho, stabilized=True, ranks=tuple(ranks))
    return SilvermanResult(order=None, stabilized=False, ranks=tuple(ranks))


def minimal_realization(
    g: ImpulseResponse, n: int, rank_tol: float = 1e-10
) -> SystemRealization:
    """Order-n realization from impulse response blocks via balanced SVD.

    Factors a block Hankel matrix built from every available block as
    ``U S V*``, truncates to rank n, takes observability ``U_n S_n^{1/2}``
    and controllability ``S_n^{1/2} V_n*``, reads C and B off the first block
    row and column, and solves for A from the one-step-shifted Hankel matrix
    by least squares.  With the minimum data ``G_1..G_{2n}`` the factored
    matrix has n+1 block rows and n block columns; deeper impulse responses
    are used in full, so an order that cannot explain the later blocks is
    rejected rather than silently fit to the early ones.  The result matches
    ``g`` on ``G_1..G_{2n}`` and is unique up to state-space similarity.
    """
    if n < 1:
        raise ValueError(f"order n must be at least 1, got {n}")
    N = g.horizon
    if N < 2 * n:
        raise ValueError(
            f"insufficient blocks: order {n} needs G_1..G_{2 * n} but the "
            f"impulse response stops at G_{N}"
        )
    p, m = g.p, g.m
    # r + rp = N + 1, so the unshifted and shifted matrices both fit in the data.
    r = (N + 2) // 2
    rp = N + 1 - r
    H0 = _block_hankel(g, r, rp, first=1)
    U, s, Vt = np.linalg.svd(H0, full_matrices=False)
    rank = int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0
    if rank != n:
        raise ValueError(
            f"inconsistent order: Hankel numerical rank is {rank}, requested {n}"
        )
    sq = np.sqrt(s[:n])
    O = U[:, :n] * sq
    Ctr = sq[:, None] * Vt[:n]
    C = O[:p]
    B = Ctr[:, :m]
    H1 = _block_hankel(g, r - 1, rp, first=2)
    # A = pinv(O_head) @ H1 @ pinv(Ctr); Ctr's pseudo-inverse is exact from the SVD.
    Ctr_pinv = Vt[:n].T / sq
    A, *_ = np.linalg.lstsq(O[: (r - 1) * p], H1 @ Ctr_pinv, rcond=None)
    return SystemRealization(A=A, B=B, C=C)
