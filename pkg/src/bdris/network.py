"""Lossless reciprocal network layer: susceptance <-> scattering via the Cayley map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import Architecture, make_architecture

Z0 = 50.0

# residual of the forward solve above which the map is declared broken
SOLVE_RTOL = 1e-8
SINGULAR_CAYLEY_TOL = 1e-10


class IllConditioned(ArithmeticError):
    pass


class SingularCayley(ArithmeticError):
    """``I + Theta`` is singular: Theta has an eigenvalue at -1."""


@dataclass(frozen=True, eq=False)
class SusceptanceMatrix:
    b: np.ndarray
    arch: Architecture

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        n = self.arch.n_elements
        if b.shape != (n, n):
            raise ValueError(f"susceptance must be {n}x{n}, got {b.shape}")
        if not np.allclose(b, b.T, rtol=0, atol=1e-12 * max(1.0, np.abs(b).max())):
            raise ValueError("susceptance matrix must be symmetric")
        off_support = ~self.arch.adjacency & ~np.eye(n, dtype=bool)
        if np.any(b[off_support] != 0):
            raise ValueError("susceptance has entries outside the architecture support")
        b = 0.5 * (b + b.T)
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @classmethod
    def full(cls, b) -> "SusceptanceMatrix":
        b = np.asarray(b, dtype=float)
        return cls(b, make_architecture("fully", b.shape[0]))


@dataclass(frozen=True, eq=False)
class ScatteringMatrix:
    theta: np.ndarray
    z0: float = Z0

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    def unitarity_residual(self) -> float:
        return float(np.linalg.norm(self.theta @ self.theta.conj().T - np.eye(self.n)))

    def symmetry_residual(self) -> float:
        """Relative ``||Theta - Theta^T||_F / ||Theta||_F``."""
        return float(np.linalg.norm(self.theta - self.theta.T) / np.linalg.norm(self.theta))


def _as_array(b) -> np.ndarray:
    return np.asarray(b.b if isinstance(b, SusceptanceMatrix) else b, dtype=float)


def theta_from_susceptance(b, z0: float = Z0) -> ScatteringMatrix:
    """``Theta = (I + i Z0 B)^-1 (I - i Z0 B)`` via one linear solve."""
    b = _as_array(b)
    n = b.shape[0]
    if not np.allclose(b, b.T, rtol=0, atol=1e-12 * max(1.0, np.abs(b).max(initial=0.0))):
        raise ValueError("susceptance matrix must be symmetric")
    eye = np.eye(n)
    lhs = eye + 1j * z0 * b
    rhs = eye - 1j * z0 * b
    theta = np.linalg.solve(lhs, rhs)
    residual = np.linalg.norm(lhs @ theta - rhs) / np.linalg.norm(rhs)
    if not np.isfinite(residual) or residual > SOLVE_RTOL:
        raise IllConditioned(f"Cayley solve residual {residual:.3e}")
    # exact result is symmetric; remove rounding asymmetry
    theta = 0.5 * (theta + theta.T)
    return ScatteringMatrix(theta, z0)


def cayley_derivative(b, db, z0: float = Z0) -> np.ndarray:
    """Directional derivative ``dTheta = -2 i Z0 (I + i Z0 B)^-1 dB (I + i Z0 B)^-1``."""
    b = _as_array(b)
    zinv = np.linalg.inv(np.eye(b.shape[0]) + 1j * z0 * b)
    return -2j * z0 * zinv @ np.asarray(db) @ zinv


def susceptance_from_theta(theta, z0: float | None = None) -> SusceptanceMatrix:
    """Inverse Cayley map ``B = Re[(I - Theta)(I + Theta)^-1 / (i Z0)]``."""
    if isinstance(theta, ScatteringMatrix):
        z0 = theta.z0 if z0 is None else z0
        theta = theta.theta
    z0 = Z0 if z0 is None else z0
    theta = np.asarray(theta, dtype=complex)
    n = theta.shape[0]
    eye = np.eye(n)
    smin = np.linalg.svd(eye + theta, compute_uv=False)[-1]
    if smin < SINGULAR_CAYLEY_TOL:
        raise SingularCayley(f"smallest singular value of I + Theta is {smin:.3e}")
    # (I - Theta) and (I + Theta)^-1 commute
    x = np.linalg.solve(eye + theta, eye - theta) / (1j * z0)
    b = x.real
    return SusceptanceMatrix.full(0.5 * (b + b.T))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_susceptance(n: int, seed=None, z0: float = Z0, scale: float | None = None) -> np.ndarray:
    """Dense symmetric ``B`` with Gaussian entries of standard deviation ``scale`` (default ``1/Z0``)."""
    rng = _rng(seed)
    scale = 1.0 / z0 if scale is None else scale
    x = rng.standard_normal((n, n))
    return scale * 0.5 * (x + x.T)


def sample_symmetric_unitary(n: int, seed=None, z0: float = Z0, scale: float | None = None) -> ScatteringMatrix:
    """A fully-connected-feasible scattering matrix drawn through a random susceptance."""
    return theta_from_susceptance(sample_susceptance(n, seed, z0, scale), z0)


def complex_to_json(a: np.ndarray) -> list:
    """Row-major nested lists of ``[re, im]`` pairs."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return [[[float(v.real), float(v.imag)] for v in row] for row in a]


def complex_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]
