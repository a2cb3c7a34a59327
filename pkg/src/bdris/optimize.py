"""Utilities, their gradients with respect to free susceptances, and a local optimizer.

The optimizer is deliberately plain (projected gradient for the beamformer,
Armijo gradient ascent for the susceptances): architecture comparisons in the
optimal class go through :func:`equalize_by_reconstruction`, which is exact,
so optimizer quality only affects the non-optimal baselines.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelSet, effective_channel, trial_rng
from .network import Z0, ScatteringMatrix, SusceptanceMatrix, theta_from_susceptance
from .reconstruct import Inconsistent, Reconstruction, reconstruct, variable_index
from .topology import Architecture

OBJECTIVES = ("sum_channel_gain", "sum_rate")


class NonFinite(ArithmeticError):
    pass


class SingularInterference(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class Beamformer:
    w: np.ndarray
    power_budget: float
    streams: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.streams is not None:
            object.__setattr__(self, "streams", tuple(int(d) for d in self.streams))
            if sum(self.streams) != self.w.shape[1]:
                raise ValueError("stream counts do not match beamformer columns")
        if np.linalg.norm(self.w) ** 2 > self.power_budget + 1e-9 * max(1.0, self.power_budget):
            raise ValueError("beamformer exceeds the power budget")

    def column_slices(self, user_dims: Sequence[int]) -> list[slice]:
        return _slices(self.streams if self.streams is not None else user_dims)


def _slices(counts: Sequence[int]) -> list[slice]:
    edges = np.concatenate([[0], np.cumsum(counts)])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


@dataclass(frozen=True, eq=False)
class FreeParams:
    x: np.ndarray
    var_index: dict

    def __post_init__(self):
        if len(self.x) != len(self.var_index):
            raise ValueError("free-parameter vector length does not match the architecture")

    @classmethod
    def zeros(cls, arch: Architecture) -> "FreeParams":
        index = variable_index(arch)
        return cls(np.zeros(len(index)), index)

    def matrix(self, n: int) -> np.ndarray:
        b = np.zeros((n, n))
        for (i, j), col in self.var_index.items():
            b[i, j] = b[j, i] = self.x[col]
        return b


def _theta(theta) -> np.ndarray:
    return theta.theta if isinstance(theta, ScatteringMatrix) else np.asarray(theta)


def sum_channel_gain(ch: ChannelSet, theta) -> float:
    return float(np.linalg.norm(effective_channel(ch, _theta(theta))) ** 2)


def _rate_and_grads(h: np.ndarray, w: np.ndarray, user_rows, user_cols, sigma2: float):
    """Sum rate (nats) with Euclidean gradients w.r.t. the effective channel and W."""
    w = np.asarray(w, dtype=complex)
    total = 0.0
    grad_h = np.zeros_like(h)
    grad_w = np.zeros_like(w)
    for rows, cols in zip(user_rows, user_cols):
        hk = h[rows]
        w_other = w.copy()
        w_other[:, cols] = 0
        eye = np.eye(hk.shape[0])
        hw = hk @ w
        hwo = hk @ w_other
        s = sigma2 * eye + hw @ hw.conj().T
        t = sigma2 * eye + hwo @ hwo.conj().T
        sign_s, logdet_s = np.linalg.slogdet(s)
        sign_t, logdet_t = np.linalg.slogdet(t)
        if sign_t == 0 or sign_s == 0:
            raise SingularInterference("interference-plus-noise covariance is singular")
        total += logdet_s - logdet_t
        s_hw = np.linalg.solve(s, hw)
        t_hwo = np.linalg.solve(t, hwo)
        grad_h[rows] = 2 * (s_hw @ w.conj().T - t_hwo @ w_other.conj().T)
        grad_w += 2 * hk.conj().T @ (s_hw - t_hwo)
    return float(total), grad_h, grad_w


def _as_w(w) -> np.ndarray:
    return w.w if isinstance(w, Beamformer) else np.asarray(w)


def _cols(ch: ChannelSet, w) -> list[slice]:
    if isinstance(w, Beamformer):
        return w.column_slices(ch.user_dims)
    return ch.user_slices()


def sum_rate(ch: ChannelSet, w, theta) -> float:
    """Sum over users of the log-det rate with linear precoding, in nats."""
    h = effective_channel(ch, _theta(theta))
    value, _, _ = _rate_and_grads(h, _as_w(w), ch.user_slices(), _cols(ch, w), ch.noise_power)
    return value


def objective_value(objective: str, ch: ChannelSet, w, theta) -> float:
    if objective == "sum_channel_gain":
        return sum_channel_gain(ch, theta)
    if objective == "sum_rate":
        return sum_rate(ch, w, theta)
    raise ValueError(f"unknown objective {objective!r}")


def _grad_heff(objective: str, ch: ChannelSet, w, h: np.ndarray, cols=None) -> tuple[float, np.ndarray]:
    if objective == "sum_channel_gain":
        return float(np.linalg.norm(h) ** 2), 2 * h
    if objective == "sum_rate":
        cols = _cols(ch, w) if cols is None else cols
        value, grad_h, _ = _rate_and_grads(h, _as_w(w), ch.user_slices(), cols, ch.noise_power)
        return value, grad_h
    raise ValueError(f"unknown objective {objective!r}")


def _value_and_grad_x(objective, ch, w, b, index, z0, cols=None):
    n = b.shape[0]
    zinv = np.linalg.inv(np.eye(n) + 1j * z0 * b)
    theta = 2 * zinv - np.eye(n)
    h = ch.h_d + ch.h_r @ theta @ ch.g
    value, grad_h = _grad_heff(objective, ch, w, h, cols)
    grad_theta = ch.h_r.conj().T @ grad_h @ ch.g.conj().T
    k = (-2j * z0) * zinv @ grad_theta.conj().T @ zinv
    ks = (k + k.T).real
    grad = np.empty(len(index))
    for (i, j), col in index.items():
        grad[col] = k[i, i].real if i == j else ks[i, j]
    return value, grad


def gradient_free_params(objective: str, ch: ChannelSet, w, arch: Architecture, x, z0: float = Z0) -> np.ndarray:
    """Analytic gradient of the objective with respect to the free susceptances ``x``."""
    params = x if isinstance(x, FreeParams) else FreeParams(np.asarray(x, dtype=float), variable_index(arch))
    b = params.matrix(arch.n_elements)
    return _value_and_grad_x(objective, ch, w, b, params.var_index, z0)[1]


def finite_difference_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences with step ``rel_step * (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * (1 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (fn(xp) - fn(xm)) / (2 * h)
    return grad


def project_power(w: np.ndarray, power_budget: float) -> np.ndarray:
    norm2 = np.linalg.norm(w) ** 2
    if norm2 <= power_budget:
        return w
    return w * np.sqrt(power_budget / norm2)


def mrt_beamformer(ch: ChannelSet, theta, power_budget: float, streams: Sequence[int] | None = None) -> np.ndarray:
    """Matched-filter start: ``W proportional to H_eff^H`` at full power.

    With ``streams`` user k keeps the first ``d_k`` rows of its channel block.
    """
    h = effective_channel(ch, _theta(theta))
    if streams is not None:
        h = np.vstack([h[sl][:d] for sl, d in zip(ch.user_slices(), streams)])
    w = h.conj().T
    norm = np.linalg.norm(w)
    if norm == 0:
        w = np.ones_like(w)
        norm = np.linalg.norm(w)
    return w * np.sqrt(power_budget) / norm


@dataclass
class OptimizeOptions:
    restarts: int = 4
    max_iters: int = 200
    tol: float = 1e-9
    seed: int = 0
    # std of the dimensionless perturbation Z0 * x for restarts past the first
    init_scale: float = 1.0
    warm_starts: Sequence[np.ndarray] = field(default_factory=tuple)
    z0: float = Z0
    threads: int = 1

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or self.threads < 1:
            raise ValueError("restarts, max_iters and threads must be positive")
        if not self.tol >= 0:
            raise ValueError("tol must be nonnegative")


@dataclass(frozen=True, eq=False)
class OptimizeResult:
    susceptance: SusceptanceMatrix
    beamformer: Beamformer | None
    value: float
    trace: tuple[float, ...]
    iterations: int
    start: int
    objective: str

    @property
    def theta(self) -> ScatteringMatrix:
        return theta_from_susceptance(self.susceptance, self.susceptance_z0)

    susceptance_z0: float = Z0


_ARMIJO = 1e-4
_MAX_BACKTRACK = 40


def _check(value: float) -> float:
    if not np.isfinite(value):
        raise NonFinite(f"objective evaluated to {value}")
    return value


class _Ascent:
    """Armijo ascent state for one block of variables, with a Barzilai-Borwein step guess."""

    def __init__(self):
        self.step: float | None = None
        self.prev_x = None
        self.prev_g = None

    def guess(self, x, g) -> float:
        if self.prev_x is not None:
            s = (x - self.prev_x).ravel()
            yv = (g - self.prev_g).ravel()
            sy = abs(np.vdot(s, yv).real)
            if sy > 0:
                return float(np.vdot(s, s).real / sy)
        if self.step is not None:
            return 2 * self.step
        gnorm = np.linalg.norm(g)
        return 1.0 / gnorm if gnorm > 0 else 0.0

    def accept(self, x, g, step):
        self.prev_x, self.prev_g, self.step = x, g, step


def _run_start(objective, ch, arch, index, y0, w0, opts, power_budget, cols):
    z0 = opts.z0
    n = arch.n_elements
    inv_z0 = 1.0 / z0

    def b_of(y):
        b = np.zeros((n, n))
        for (i, j), col in index.items():
            b[i, j] = b[j, i] = y[col] * inv_z0
        return b

    def f_and_gy(y, w):
        value, gx = _value_and_grad_x(objective, ch, w, b_of(y), index, z0, cols)
        return _check(value), gx * inv_z0

    def theta_of(y):
        return 2 * np.linalg.inv(np.eye(n) + 1j * z0 * b_of(y)) - np.eye(n)

    y = y0.copy()
    w = w0
    value, gy = f_and_gy(y, w)
    trace = [value]
    b_state, w_state = _Ascent(), _Ascent()
    stalls = 0
    it = 0
    for it in range(1, opts.max_iters + 1):
        start_value = value
        if objective == "sum_rate":
            h = ch.h_d + ch.h_r @ theta_of(y) @ ch.g
            _, _, gw = _rate_and_grads(h, w, ch.user_slices(), cols, ch.noise_power)
            t = w_state.guess(w, gw)
            for _ in range(_MAX_BACKTRACK):
                w_new = project_power(w + t * gw, power_budget)
                v_new, _, _ = _rate_and_grads(h, w_new, ch.user_slices(), cols, ch.noise_power)
                if np.isfinite(v_new) and v_new >= value + _ARMIJO * np.vdot(gw, w_new - w).real and v_new >= value:
                    w_state.accept(w, gw, t)
                    w, value = w_new, v_new
                    break
                t *= 0.5
            value, gy = f_and_gy(y, w)
        if len(index):
            t = b_state.guess(y, gy)
            g2 = float(gy @ gy)
            for _ in range(_MAX_BACKTRACK):
                y_new = y + t * gy
                try:
                    v_new, g_new = f_and_gy(y_new, w)
                except (NonFinite, np.linalg.LinAlgError):
                    t *= 0.5
                    continue
                if v_new >= value + _ARMIJO * t * g2:
                    b_state.accept(y, gy, t)
                    y, value, gy = y_new, v_new, g_new
                    break
                t *= 0.5
        trace.append(value)
        if value - start_value <= opts.tol * max(abs(value), np.finfo(float).tiny):
            stalls += 1
            if stalls >= 3:
                break
        else:
            stalls = 0
    return y, w, value, trace, it


def optimize_architecture(
    ch: ChannelSet,
    arch: Architecture,
    objective: str,
    opts: OptimizeOptions | None = None,
    power_budget: float | None = None,
    streams: Sequence[int] | None = None,
) -> OptimizeResult:
    """Multi-start local ascent over susceptances on ``arch`` (and the beamformer for sum rate).

    Start 0 is ``B = 0``; further starts add Gaussian perturbations drawn from
    ``trial_rng(opts.seed, start)``; each warm start, a ``B`` or a ``(B, W)``
    pair, is projected to the support and appended as an extra start.  The
    best value wins, ties going to the lowest start.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    opts = OptimizeOptions() if opts is None else opts
    if objective == "sum_rate" and power_budget is None:
        raise ValueError("sum_rate needs a power budget")
    index = variable_index(arch)
    z0 = opts.z0
    starts = []
    for r in range(opts.restarts):
        y0 = np.zeros(len(index))
        if r > 0:
            y0 = opts.init_scale * trial_rng(opts.seed, r).standard_normal(len(index))
        starts.append((y0, None))
    for warm in opts.warm_starts:
        b, w = warm if isinstance(warm, tuple) else (warm, None)
        starts.append((np.array([b[i, j] for (i, j) in index]) * z0, w))
    cols = _slices(streams) if streams is not None else ch.user_slices()

    def one(start):
        y0, w0 = start
        if objective == "sum_rate":
            if w0 is not None:
                w0 = project_power(np.asarray(w0), power_budget)
            else:
                b0 = np.zeros((arch.n_elements,) * 2)
                for (i, j), col in index.items():
                    b0[i, j] = b0[j, i] = y0[col] / z0
                w0 = mrt_beamformer(ch, theta_from_susceptance(b0, z0), power_budget, streams)
        return _run_start(objective, ch, arch, index, y0, w0, opts, power_budget, cols)

    if opts.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            runs = list(pool.map(one, starts))
    else:
        runs = [one(start) for start in starts]
    best = None
    for k, run in enumerate(runs):
        # strict comparison keeps the lowest start index on ties
        if best is None or run[2] > best[2]:
            best = (*run, k)
    y, w, value, trace, iters, k = best
    b = np.zeros((arch.n_elements,) * 2)
    for (i, j), col in index.items():
        b[i, j] = b[j, i] = y[col] / z0
    bf = None if w is None else Beamformer(w, power_budget, None if streams is None else tuple(streams))
    return OptimizeResult(SusceptanceMatrix(b, arch), bf, float(value), tuple(trace), iters, k, objective, z0)


@dataclass(frozen=True, eq=False)
class EqualizeResult:
    susceptance: SusceptanceMatrix
    value: float
    reconstruction: Reconstruction


def equalize_by_reconstruction(
    ch: ChannelSet, arch: Architecture, fully_result: OptimizeResult, side: str | None = None
) -> EqualizeResult:
    """Carry a fully-connected solution over to ``arch`` by solving for its susceptances.

    The objective is re-evaluated at the reconstructed scattering matrix with
    the fully-connected beamformer.  Raises :class:`Inconsistent` when the
    linear system has no solution on ``arch``.
    """
    theta_star = fully_result.theta
    rec = reconstruct(ch, theta_star, arch, side=side, z0=fully_result.susceptance_z0)
    if not rec.ok:
        raise Inconsistent(rec.report.residual)
    value = objective_value(fully_result.objective, ch, fully_result.beamformer, rec.theta)
    return EqualizeResult(rec.susceptance, value, rec)
