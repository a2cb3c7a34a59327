"""Recover a sparse susceptance matrix that reproduces a fully-connected behaviour.

Given a target interaction (``U = (H_r Theta)^H`` on the receiver side or
``V = Theta G`` on the transmitter side), the Cayley relation turns into the
real linear system ``B M = Gamma`` in the free entries of ``B``.  The
assembler is driven by the architecture support, so band, stem and arbitrary
optimal-class graphs share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import ChannelSet, DimensionMismatch
from .network import Z0, ScatteringMatrix, SusceptanceMatrix, theta_from_susceptance
from .topology import Architecture

CONSISTENCY_TOL = 1e-8
RANK_TOL = 1e-10
# sigma_min / sigma_max of A below this marks a near-singular coefficient block
SINGULAR_BLOCK_TOL = 1e-10
COEFF_COND_LIMIT = 1e12

RECEIVER = "receiver"
TRANSMITTER = "transmitter"


class Inconsistent(ArithmeticError):
    def __init__(self, residual: float, message: str | None = None):
        self.residual = residual
        super().__init__(message or f"linear system is inconsistent (relative residual {residual:.3e})")


class SingularCoefficientBlock(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class TargetInteraction:
    """``u_or_v`` is ``U`` (receiver) or ``V`` (transmitter); ``coupling`` is ``H_r^H`` or ``G``."""

    side: str
    u_or_v: np.ndarray
    coupling: np.ndarray

    def __post_init__(self):
        if self.side not in (RECEIVER, TRANSMITTER):
            raise ValueError(f"side must be receiver or transmitter, got {self.side!r}")
        if self.u_or_v.shape != self.coupling.shape:
            raise DimensionMismatch("target and coupling shapes differ")


@dataclass(frozen=True, eq=False)
class RealPair:
    m: np.ndarray
    gamma: np.ndarray

    @property
    def kappa(self) -> int:
        return self.m.shape[1]


@dataclass(frozen=True, eq=False)
class ReconstructionSystem:
    a: np.ndarray
    b: np.ndarray
    var_index: dict
    arch: Architecture
    kappa: int

    @property
    def n_vars(self) -> int:
        return self.a.shape[1]

    def augmented(self) -> np.ndarray:
        return np.column_stack([self.a, self.b])

    def unpack(self, x: np.ndarray) -> np.ndarray:
        n = self.arch.n_elements
        out = np.zeros((n, n))
        for (i, j), col in self.var_index.items():
            out[i, j] = out[j, i] = x[col]
        return out

    def pack(self, b: np.ndarray) -> np.ndarray:
        x = np.zeros(self.n_vars)
        for (i, j), col in self.var_index.items():
            x[col] = b[i, j]
        return x


def make_target(ch: ChannelSet, theta, side: str = RECEIVER) -> TargetInteraction:
    theta = theta.theta if isinstance(theta, ScatteringMatrix) else np.asarray(theta)
    if theta.shape != (ch.n_ris, ch.n_ris):
        raise DimensionMismatch(f"Theta must be {ch.n_ris}x{ch.n_ris}, got {theta.shape}")
    if side == RECEIVER:
        return TargetInteraction(side, (ch.h_r @ theta).conj().T, ch.h_r.conj().T)
    if side == TRANSMITTER:
        return TargetInteraction(side, theta @ ch.g, ch.g)
    raise ValueError(f"side must be receiver or transmitter, got {side!r}")


def check_ubar(t: TargetInteraction, tol: float = 1e-9) -> bool:
    """Membership of a receiver-side ``U`` in the algebraic superset of reachable targets.

    Requires ``U^H U = H_r H_r^H`` and ``U^T H_r^H`` symmetric, both relative
    to ``tol``.
    """
    if t.side != RECEIVER:
        raise ValueError("check_ubar applies to receiver-side targets")
    u, hrh = t.u_or_v, t.coupling
    gram = hrh.conj().T @ hrh
    cross = u.T @ hrh
    gram_ok = np.linalg.norm(u.conj().T @ u - gram) <= tol * np.linalg.norm(gram)
    sym_ok = np.linalg.norm(cross - cross.T) <= tol * np.linalg.norm(cross)
    return bool(gram_ok and sym_ok)


def real_pair(t: TargetInteraction, z0: float = Z0) -> RealPair:
    # Theta X = Y  <=>  B * iZ0(X + Y) = X - Y, split into real and imaginary columns
    if t.side == RECEIVER:
        x, y = t.u_or_v, t.coupling
    else:
        x, y = t.coupling, t.u_or_v
    s = 1j * z0 * (x + y)
    d = x - y
    return RealPair(np.hstack([s.real, s.imag]), np.hstack([d.real, d.imag]))


def lemma6_residual(rp: RealPair) -> float:
    """Relative size of ``M^T Gamma - Gamma^T M`` (zero for reachable targets)."""
    mg = rp.m.T @ rp.gamma
    denom = np.linalg.norm(mg)
    return float(np.linalg.norm(mg - mg.T) / denom) if denom > 0 else 0.0


def variable_index(arch: Architecture) -> dict:
    """Row-major upper-triangle ordering of the free entries: ``(n, n)`` then each edge ``(n, m)``, ``m > n``."""
    index = {}
    adj = arch.adjacency
    for i in range(arch.n_elements):
        index[(i, i)] = len(index)
        for j in np.flatnonzero(adj[i, i + 1 :]) + i + 1:
            index[(i, int(j))] = len(index)
    return index


def assemble_system(rp: RealPair, arch: Architecture) -> ReconstructionSystem:
    """Stack the ``kappa`` equations of each row of ``B M = Gamma`` into ``A x = b``."""
    n, kappa = rp.m.shape
    if n != arch.n_elements:
        raise DimensionMismatch(f"M has {n} rows, architecture has {arch.n_elements} ports")
    index = variable_index(arch)
    a = np.zeros((n * kappa, len(index)))
    for (i, j), col in index.items():
        a[kappa * i : kappa * (i + 1), col] = rp.m[j]
        if i != j:
            a[kappa * j : kappa * (j + 1), col] = rp.m[i]
    return ReconstructionSystem(a, rp.gamma.reshape(-1).copy(), index, arch, kappa)


@dataclass(frozen=True)
class SolveReport:
    residual: float
    rank_a: int
    sigma_ratio: float

    @property
    def near_singular(self) -> bool:
        """A lost column rank: the target sits (numerically) in the exception set."""
        return self.sigma_ratio < SINGULAR_BLOCK_TOL


def solve_report(sys: ReconstructionSystem) -> tuple[np.ndarray, SolveReport]:
    """Minimum-norm least-squares solution with its residual and conditioning."""
    x, _, rank, sv = scipy.linalg.lstsq(sys.a, sys.b, cond=RANK_TOL, lapack_driver="gelsd")
    scale = max(np.linalg.norm(sys.b), np.finfo(float).eps)
    residual = float(np.linalg.norm(sys.a @ x - sys.b) / scale)
    ratio = float(sv[-1] / sv[0]) if sv.size and sv[0] > 0 else 0.0
    if sys.a.shape[0] < sys.a.shape[1]:
        ratio = 0.0
    return x, SolveReport(residual, int(rank), ratio)


def solve_susceptance(sys: ReconstructionSystem, tol: float = CONSISTENCY_TOL) -> SusceptanceMatrix:
    x, report = solve_report(sys)
    if not report.residual <= tol:
        raise Inconsistent(report.residual)
    return SusceptanceMatrix(sys.unpack(x), sys.arch)


def numerical_rank(mat: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.count_nonzero(sv > rank_tol * sv[0]))


def predicted_rank(n: int, kappa: int) -> int:
    return n * kappa - kappa * (kappa - 1) // 2


@dataclass(frozen=True)
class RankReport:
    rank_a: int
    rank_ab: int
    predicted: int

    @property
    def ok(self) -> bool:
        return self.rank_a == self.rank_ab == self.predicted


def rank_report(sys: ReconstructionSystem, rank_tol: float = RANK_TOL) -> RankReport:
    return RankReport(
        numerical_rank(sys.a, rank_tol),
        numerical_rank(sys.augmented(), rank_tol),
        predicted_rank(sys.arch.n_elements, sys.kappa),
    )


@dataclass(frozen=True)
class RowElimination:
    """Max-abs entry of the vanishing row combination and the magnitude of its terms."""

    max_abs_residual: float
    scale: float

    @property
    def relative(self) -> float:
        return self.max_abs_residual / self.scale if self.scale > 0 else 0.0


def _checked_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if mat.size and np.linalg.cond(mat) > COEFF_COND_LIMIT:
        raise SingularCoefficientBlock(f"coefficient block condition number {np.linalg.cond(mat):.3e}")
    return np.linalg.solve(mat, rhs)


def elimination_coefficients(a_rows: np.ndarray, n: int, j: int, l: int) -> tuple[float, np.ndarray]:
    """``alpha_{n,j}`` and ``c_{n,j,l}`` (all indices 1-based) from the rows ``a_n`` of ``M``."""
    N = a_rows.shape[0]
    a = lambda row, comp: a_rows[row - 1, comp - 1]  # noqa: E731
    tail = list(range(N - j + 2, N + 1))
    if j == 1:
        alpha = a(n, 1)
    else:
        f = np.array([a(r, 1) for r in tail])
        d = np.array([[a(r, s) for r in tail] for s in range(2, j + 1)])
        xi = np.array([a(n, s) for s in range(2, j + 1)])
        alpha = a(n, 1) - f @ _checked_solve(d, xi)
    rows = [n] + tail
    c_mat = np.array([[a(r, s) for s in range(1, j + 1)] for r in rows])
    c = _checked_solve(c_mat, np.array([a(r, l) for r in rows]))
    return float(alpha), c


def verify_row_elimination(sys: ReconstructionSystem, rp: RealPair, j: int, l: int) -> RowElimination:
    """Form ``sum_n alpha_{n,j} (r_{kappa(n-1)+l} - c_{n,j,l}^T [r_{kappa(n-1)+1..j}])`` over rows of ``[A b]``.

    ``j`` and ``l`` are 1-based with ``1 <= j < l <= kappa``; the system must
    be the canonical band system with ``kappa = 2L``.
    """
    kappa = sys.kappa
    if not 1 <= j < l <= kappa:
        raise ValueError(f"need 1 <= j < l <= kappa={kappa}")
    ab = sys.augmented()
    N = rp.m.shape[0]
    total = np.zeros(ab.shape[1])
    scale = 0.0
    for n in range(1, N - j + 2):
        alpha, c = elimination_coefficients(rp.m, n, j, l)
        base = kappa * (n - 1)
        term = alpha * (ab[base + l - 1] - c @ ab[base : base + j])
        total += term
        scale += abs(alpha) * (np.abs(ab[base + l - 1]).max() + np.abs(c) @ np.abs(ab[base : base + j]).max(axis=1))
    return RowElimination(float(np.abs(total).max()), float(scale))


@dataclass(frozen=True, eq=False)
class Reconstruction:
    susceptance: SusceptanceMatrix | None
    theta: ScatteringMatrix | None
    report: SolveReport
    roundtrip_error: float | None
    side: str

    @property
    def ok(self) -> bool:
        return self.susceptance is not None


def choose_side(ch: ChannelSet) -> str:
    """Receiver side when the users' antennas set the degree of freedom, else transmitter."""
    return RECEIVER if ch.n_rx <= ch.n_tx else TRANSMITTER


def roundtrip_error(ch: ChannelSet, side: str, theta_hat, theta_star) -> float:
    th = theta_hat.theta if isinstance(theta_hat, ScatteringMatrix) else theta_hat
    ts = theta_star.theta if isinstance(theta_star, ScatteringMatrix) else theta_star
    if side == RECEIVER:
        ref = ch.h_r @ ts
        return float(np.linalg.norm(ch.h_r @ th - ref) / np.linalg.norm(ref))
    ref = ts @ ch.g
    return float(np.linalg.norm(th @ ch.g - ref) / np.linalg.norm(ref))


def reconstruct(
    ch: ChannelSet,
    theta_star,
    arch: Architecture,
    side: str | None = None,
    z0: float | None = None,
    tol: float = CONSISTENCY_TOL,
) -> Reconstruction:
    """Solve for ``B`` on ``arch`` matching ``theta_star``'s interaction; never raises on inconsistency."""
    if z0 is None:
        z0 = theta_star.z0 if isinstance(theta_star, ScatteringMatrix) else Z0
    side = choose_side(ch) if side is None else side
    rp = real_pair(make_target(ch, theta_star, side), z0)
    sys = assemble_system(rp, arch)
    x, report = solve_report(sys)
    if not report.residual <= tol:
        return Reconstruction(None, None, report, None, side)
    b_hat = SusceptanceMatrix(sys.unpack(x), arch)
    theta_hat = theta_from_susceptance(b_hat, z0)
    return Reconstruction(b_hat, theta_hat, report, roundtrip_error(ch, side, theta_hat, theta_star), side)
