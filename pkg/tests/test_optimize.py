import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdris.channel import ChannelSet, ScenarioConfig, effective_channel, sample_channels, trial_rng
from bdris.network import SusceptanceMatrix, theta_from_susceptance
from bdris.optimize import (
    Beamformer,
    FreeParams,
    NonFinite,
    OptimizeOptions,
    OptimizeResult,
    equalize_by_reconstruction,
    finite_difference_gradient,
    gradient_free_params,
    mrt_beamformer,
    objective_value,
    optimize_architecture,
    sum_channel_gain,
    sum_rate,
)
from bdris.reconstruct import variable_index
from bdris.topology import SystemDims, make_architecture


def cn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def small_channels(rng, n=6, n_tx=3, users=(1, 1), direct=True, noise=0.1):
    n_rx = sum(users)
    h_d = cn(rng, n_rx, n_tx) if direct else np.zeros((n_rx, n_tx), complex)
    return ChannelSet(cn(rng, n, n_tx), cn(rng, n_rx, n), h_d, users, noise)


def test_gain_without_ris_path(rng):
    ch = small_channels(rng)
    ch0 = ChannelSet(ch.g, np.zeros_like(ch.h_r), ch.h_d, ch.user_dims, 1.0)
    theta = theta_from_susceptance(np.diag(rng.standard_normal(6))).theta
    assert sum_channel_gain(ch0, theta) == pytest.approx(np.linalg.norm(ch.h_d) ** 2, rel=1e-14)


def test_gain_orthonormal_bound(rng):
    n = 5
    q, _ = np.linalg.qr(cn(rng, n, n))
    h_r, g = q[:2], q[:, :2].conj()
    ch = ChannelSet(g, h_r, np.zeros((2, 2), complex), (1, 1), 1.0)
    for _ in range(20):
        x = rng.standard_normal((n, n)) * 0.02
        assert sum_channel_gain(ch, theta_from_susceptance(x + x.T).theta) <= 2 + 1e-12
    aligned = ChannelSet(np.eye(n)[:, :2], np.eye(n)[:2], np.zeros((2, 2), complex), (1, 1), 1.0)
    assert sum_channel_gain(aligned, np.eye(n)) == pytest.approx(2.0)


def test_gain_matches_naive(rng):
    ch = small_channels(rng)
    theta = theta_from_susceptance(np.zeros((6, 6))).theta
    h = ch.h_d + ch.h_r @ theta @ ch.g
    assert sum_channel_gain(ch, theta) == pytest.approx(float(np.sum(np.abs(h) ** 2)), rel=1e-13)


def test_rate_scalar_snr():
    ch = ChannelSet(np.array([[1.0 + 0j]]), np.array([[0.5j]]), np.array([[0.2 + 0j]]), (1,), 0.3)
    w = np.array([[0.7 - 0.1j]])
    h = 0.2 + 0.5j
    assert sum_rate(ch, w, np.eye(1)) == pytest.approx(np.log(1 + abs(h * w[0, 0]) ** 2 / 0.3), rel=1e-14)


def test_rate_zero_beamformer(rng):
    ch = small_channels(rng)
    assert sum_rate(ch, np.zeros((3, 2)), np.eye(6)) == 0.0


@given(st.integers(0, 10**6))
def test_rate_matches_sinr_formula(seed):
    rng = np.random.default_rng(seed)
    ch = small_channels(rng, users=(1, 1))
    w = cn(rng, 3, 2)
    h = effective_channel(ch, np.eye(6))
    expect = sum(
        np.log(1 + abs(h[k] @ w[:, k]) ** 2 / (abs(h[k] @ w[:, 1 - k]) ** 2 + ch.noise_power)) for k in range(2)
    )
    assert sum_rate(ch, w, np.eye(6)) == pytest.approx(expect, rel=1e-12)


def _fd_check(objective, ch, w, arch, x):
    index = variable_index(arch)
    n = arch.n_elements

    def f(xx):
        return objective_value(objective, ch, w, theta_from_susceptance(FreeParams(xx, index).matrix(n)))

    g = gradient_free_params(objective, ch, w, arch, x)
    fd = finite_difference_gradient(f, x)
    return np.linalg.norm(g - fd) / np.linalg.norm(fd)


@pytest.mark.parametrize("objective", ["sum_channel_gain", "sum_rate"])
@given(seed=st.integers(0, 10**6), kind=st.sampled_from(["band", "group", "fully", "single"]))
def test_gradient_matches_differences(objective, seed, kind):
    rng = np.random.default_rng(seed)
    ch = small_channels(rng, users=(1, 2))
    arch = make_architecture(kind, 6, **({"q": 2} if kind == "band" else {"G": 2} if kind == "group" else {}))
    x = rng.standard_normal(len(variable_index(arch))) / 50
    w = cn(rng, 3, 3) * 0.3
    assert _fd_check(objective, ch, w, arch, x) <= 1e-5


def test_gradient_at_zero(rng):
    ch = small_channels(rng, direct=False)
    arch = make_architecture("band", 6, q=3)
    assert _fd_check("sum_channel_gain", ch, None, arch, np.zeros(len(variable_index(arch)))) <= 1e-5


def test_gradient_vanishes_without_ris_path(rng):
    ch = small_channels(rng)
    ch0 = ChannelSet(ch.g, np.zeros_like(ch.h_r), ch.h_d, ch.user_dims, ch.noise_power)
    arch = make_architecture("fully", 6)
    x = rng.standard_normal(21) / 50
    assert not gradient_free_params("sum_channel_gain", ch0, None, arch, x).any()
    assert not gradient_free_params("sum_rate", ch0, cn(rng, 3, 2), arch, x).any()


def test_gradient_scales_with_objective(rng):
    ch = small_channels(rng, direct=False)
    c = 3.7
    scaled = ChannelSet(ch.g, np.sqrt(c) * ch.h_r, ch.h_d, ch.user_dims, ch.noise_power)
    arch = make_architecture("band", 6, q=1)
    x = rng.standard_normal(11) / 50
    g1 = gradient_free_params("sum_channel_gain", ch, None, arch, x)
    g2 = gradient_free_params("sum_channel_gain", scaled, None, arch, x)
    assert np.allclose(g2, c * g1, rtol=1e-12)


def test_rank_one_upper_bound():
    rng = np.random.default_rng(3)
    h_r = np.outer(cn(rng, 2), cn(rng, 4))
    g = np.outer(cn(rng, 4), cn(rng, 2))
    ch = ChannelSet(g, h_r, np.zeros((2, 2), complex), (1, 1), 1.0)
    res = optimize_architecture(ch, make_architecture("fully", 4), "sum_channel_gain", OptimizeOptions(restarts=8))
    bound = (np.linalg.norm(h_r, 2) * np.linalg.norm(g, 2)) ** 2
    assert res.value >= 0.99 * bound and res.value <= bound * (1 + 1e-9)


def test_nesting_with_warm_start():
    cfg = ScenarioConfig(dims=SystemDims(2, 8, (1, 1)))
    for t in range(3):
        ch = sample_channels(cfg, trial_rng(0, t))
        opts = OptimizeOptions(restarts=2, max_iters=60, seed=t)
        single = optimize_architecture(ch, make_architecture("single", 8), "sum_channel_gain", opts)
        warm = OptimizeOptions(restarts=2, max_iters=60, seed=t, warm_starts=[single.susceptance.b])
        fully = optimize_architecture(ch, make_architecture("fully", 8), "sum_channel_gain", warm)
        assert single.value <= fully.value + 1e-9


def test_sum_rate_feasible_and_monotone():
    cfg = ScenarioConfig(dims=SystemDims(3, 8, (1, 1, 1)))
    ch = sample_channels(cfg, trial_rng(1, 0))
    res = optimize_architecture(
        ch, make_architecture("band", 8, q=2), "sum_rate", OptimizeOptions(restarts=3, max_iters=40), cfg.power_budget
    )
    assert np.linalg.norm(res.beamformer.w) ** 2 <= cfg.power_budget * (1 + 1e-9)
    assert all(b >= a for a, b in zip(res.trace, res.trace[1:]))
    assert res.value == pytest.approx(sum_rate(ch, res.beamformer, res.theta), rel=1e-12)


def test_streams_beamformer_shape():
    cfg = ScenarioConfig(dims=SystemDims(4, 6, (2, 2), (1, 1)))
    ch = sample_channels(cfg, trial_rng(0, 0))
    res = optimize_architecture(
        ch, make_architecture("fully", 6), "sum_rate", OptimizeOptions(restarts=1, max_iters=10), cfg.power_budget, (1, 1)
    )
    assert res.beamformer.w.shape == (4, 2)
    assert res.value == pytest.approx(sum_rate(ch, res.beamformer, res.theta), rel=1e-12)


def test_threads_deterministic():
    cfg = ScenarioConfig(dims=SystemDims(2, 6, (1, 1)))
    ch = sample_channels(cfg, trial_rng(0, 0))
    arch = make_architecture("band", 6, q=3)
    a = optimize_architecture(ch, arch, "sum_channel_gain", OptimizeOptions(restarts=4, max_iters=30))
    b = optimize_architecture(ch, arch, "sum_channel_gain", OptimizeOptions(restarts=4, max_iters=30, threads=3))
    assert a.value == b.value and np.array_equal(a.susceptance.b, b.susceptance.b)


def test_equalize_identity_target(rng):
    ch = small_channels(rng, n=6, n_tx=3, users=(1, 1), direct=False)
    fully = make_architecture("fully", 6)
    w = mrt_beamformer(ch, np.eye(6), 1.0)
    res = OptimizeResult(SusceptanceMatrix(np.zeros((6, 6)), fully), Beamformer(w, 1.0), sum_rate(ch, w, np.eye(6)),
                         (), 0, 0, "sum_rate")
    eq = equalize_by_reconstruction(ch, make_architecture("band", 6, q=3), res)
    assert not eq.susceptance.b.any()
    assert eq.value == res.value


@pytest.mark.parametrize("objective", ["sum_channel_gain", "sum_rate"])
def test_equalize_parity(objective):
    cfg = ScenarioConfig()
    for t in range(3):
        ch = sample_channels(cfg, trial_rng(0, t))
        full = optimize_architecture(
            ch, make_architecture("fully", 16), objective, OptimizeOptions(restarts=1, max_iters=20), cfg.power_budget
        )
        for kind in ("band", "stem"):
            eq = equalize_by_reconstruction(ch, make_architecture(kind, 16, q=7), full)
            assert abs(eq.value - full.value) <= 1e-6 * abs(full.value)
            assert eq.reconstruction.side == "receiver"


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_raised(rng):
    ch = small_channels(rng, direct=False)
    huge = ChannelSet(ch.g * 1e200, ch.h_r * 1e200, ch.h_d, ch.user_dims, 1.0)
    with pytest.raises(NonFinite):
        optimize_architecture(huge, make_architecture("single", 6), "sum_channel_gain", OptimizeOptions(restarts=1))


def test_type_invariants():
    with pytest.raises(ValueError):
        Beamformer(np.ones((2, 2)), 1.0)
    with pytest.raises(ValueError):
        Beamformer(np.ones((2, 2)) * 0.1, 1.0, (1,))
    arch = make_architecture("band", 4, q=1)
    with pytest.raises(ValueError):
        FreeParams(np.zeros(3), variable_index(arch))
    assert len(FreeParams.zeros(arch).x) == 4 + 3
    with pytest.raises(ValueError):
        OptimizeOptions(restarts=0)
    with pytest.raises(ValueError):
        optimize_architecture(None, arch, "energy_efficiency")
