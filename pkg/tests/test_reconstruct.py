import numpy as np
import pytest

from bdris.channel import ChannelSet, ScenarioConfig, sample_channels
from bdris.network import sample_susceptance, theta_from_susceptance
from bdris.reconstruct import (
    RECEIVER,
    TRANSMITTER,
    Inconsistent,
    RealPair,
    TargetInteraction,
    assemble_system,
    check_ubar,
    choose_side,
    elimination_coefficients,
    lemma6_residual,
    make_target,
    predicted_rank,
    rank_report,
    real_pair,
    reconstruct,
    solve_report,
    solve_susceptance,
    verify_row_elimination,
)
from bdris.suites import gaussian_channels, ubar_target
from bdris.topology import SystemDims, make_architecture, random_theorem1_architecture


def random_theta(n, rng):
    return theta_from_susceptance(sample_susceptance(n, rng)).theta


def test_make_target_examples(rng):
    ch = gaussian_channels(rng, 3, 2, 2)
    assert np.array_equal(make_target(ch, np.eye(3), RECEIVER).u_or_v, ch.h_r.conj().T)
    assert np.array_equal(make_target(ch, np.eye(3), TRANSMITTER).u_or_v, ch.g)
    theta = random_theta(3, rng)
    u = make_target(ch, theta).u_or_v
    naive = np.array([[np.conj(sum(ch.h_r[k, i] * theta[i, n] for i in range(3))) for k in range(2)] for n in range(3)])
    assert np.allclose(u, naive)


def test_check_ubar_examples(rng):
    ch = gaussian_channels(rng, 6, 3, 2)
    assert check_ubar(make_target(ch, random_theta(6, rng)))
    assert check_ubar(make_target(ch, np.eye(6)))
    hrh = ch.h_r.conj().T
    assert not check_ubar(TargetInteraction(RECEIVER, 2 * hrh, hrh))


def test_real_pair_identity_gives_zero_gamma(rng):
    ch = gaussian_channels(rng, 5, 3, 2)
    rp = real_pair(make_target(ch, np.eye(5)))
    assert rp.kappa == 4 and not rp.gamma.any()


@pytest.mark.parametrize("side", [RECEIVER, TRANSMITTER])
def test_forward_consistency(rng, side):
    ch = gaussian_channels(rng, 7, 2, 3)
    b = sample_susceptance(7, rng)
    rp = real_pair(make_target(ch, theta_from_susceptance(b).theta, side))
    assert np.linalg.norm(b @ rp.m - rp.gamma) <= 1e-10 * max(1.0, np.linalg.norm(rp.gamma))


def test_lemma6(rng):
    for _ in range(10):
        _, _, target = ubar_target(rng, 8, 4)
        assert check_ubar(target)
        assert lemma6_residual(real_pair(target)) <= 1e-9


@pytest.mark.parametrize("n,L", [(6, 2), (8, 1), (12, 2), (10, 3)])
def test_band_system_shape(rng, n, L):
    kappa = 2 * L
    _, _, target = ubar_target(rng, n, kappa)
    sys = assemble_system(real_pair(target), make_architecture("band", n, q=2 * L - 1))
    assert sys.a.shape == (n * kappa, n * kappa - kappa * (kappa - 1) // 2)
    assert (np.count_nonzero(sys.a, axis=0) <= 2 * kappa).all()


def test_system_counts():
    rp = RealPair(np.ones((3, 2)), np.zeros((3, 2)))
    assert assemble_system(rp, make_architecture("single", 3)).a.shape == (6, 3)
    rp4 = RealPair(np.ones((4, 2)), np.zeros((4, 2)))
    assert assemble_system(rp4, make_architecture("fully", 4)).n_vars == 10


def test_block_layout_matches_definition(rng):
    # variable (n, m) carries row m of M in block n and row n of M in block m
    _, _, target = ubar_target(rng, 5, 4)
    rp = real_pair(target)
    sys = assemble_system(rp, make_architecture("band", 5, q=3))
    k = rp.kappa
    for (n, m), col in sys.var_index.items():
        assert np.array_equal(sys.a[k * n : k * (n + 1), col], rp.m[m])
        assert np.array_equal(sys.a[k * m : k * (m + 1), col], rp.m[n])
    assert np.array_equal(sys.b, rp.gamma.ravel())


def test_identity_target_gives_zero(rng):
    ch = gaussian_channels(rng, 6, 3, 2)
    sys = assemble_system(real_pair(make_target(ch, np.eye(6))), make_architecture("band", 6, q=3))
    b = solve_susceptance(sys)
    _, rep = solve_report(sys)
    assert np.abs(b.b).max() == 0 and rep.residual == 0


def test_band_roundtrip(rng):
    for _ in range(20):
        ch = gaussian_channels(rng, 10, 3, 2)
        theta = random_theta(10, rng)
        rec = reconstruct(ch, theta, make_architecture("band", 10, q=3))
        assert rec.ok and rec.side == RECEIVER
        assert rec.roundtrip_error <= 1e-8
        assert rec.report.residual <= 1e-8


def test_transmitter_side(rng):
    ch = gaussian_channels(rng, 9, 2, 4)
    assert choose_side(ch) == TRANSMITTER
    theta = random_theta(9, rng)
    rec = reconstruct(ch, theta, make_architecture("stem", 9, q=3))
    assert rec.ok and rec.side == TRANSMITTER
    assert np.linalg.norm(rec.theta.theta @ ch.g - theta @ ch.g) <= 1e-8 * np.linalg.norm(theta @ ch.g)


def test_generic_member_roundtrip(rng):
    ch = gaussian_channels(rng, 11, 4, 2)
    arch = random_theorem1_architecture(11, 2, rng)
    rec = reconstruct(ch, random_theta(11, rng), arch)
    assert rec.ok and rec.roundtrip_error <= 1e-8


def test_single_connected_inconsistent():
    hits = 0
    for t in range(100):
        rng = np.random.default_rng(t)
        ch = gaussian_channels(rng, 8, 3, 2)
        sys = assemble_system(real_pair(make_target(ch, random_theta(8, rng))), make_architecture("single", 8))
        try:
            solve_susceptance(sys)
        except Inconsistent as exc:
            hits += exc.residual > 1e-4
    assert hits >= 99


@pytest.mark.parametrize("n,kappa,arch,expect", [(6, 4, ("band", 3), 18), (8, 2, ("tridiagonal", None), 15), (12, 4, ("band", 3), 42)])
def test_rank_examples(rng, n, kappa, arch, expect):
    kind, q = arch
    a = make_architecture(kind, n, q=q) if q is not None else make_architecture(kind, n)
    _, _, target = ubar_target(rng, n, kappa)
    rep = rank_report(assemble_system(real_pair(target), a))
    assert (rep.rank_a, rep.rank_ab, rep.predicted) == (expect, expect, expect)
    assert predicted_rank(n, kappa) == expect


def test_perturbed_target_rank_jump(rng):
    jumps = 0
    for _ in range(10):
        _, _, target = ubar_target(rng, 6, 4)
        noise = 1e-2 * (rng.standard_normal(target.u_or_v.shape) + 1j * rng.standard_normal(target.u_or_v.shape))
        bad = TargetInteraction(RECEIVER, target.u_or_v + noise, target.coupling)
        assert not check_ubar(bad)
        rep = rank_report(assemble_system(real_pair(bad), make_architecture("band", 6, q=3)))
        jumps += rep.rank_ab == rep.predicted + 1 and not rep.ok
    assert jumps >= 9


def test_row_elimination_identity_target(rng):
    ch = gaussian_channels(rng, 6, 3, 2)
    rp = real_pair(make_target(ch, np.eye(6)))
    sys = assemble_system(rp, make_architecture("band", 6, q=3))
    assert verify_row_elimination(sys, rp, 1, 2).relative <= 1e-15


def test_row_elimination_all_pairs(rng):
    arch = make_architecture("band", 6, q=3)
    for _ in range(5):
        _, _, target = ubar_target(rng, 6, 4)
        rp = real_pair(target)
        sys = assemble_system(rp, arch)
        for j in range(1, 4):
            for l in range(j + 1, 5):
                assert verify_row_elimination(sys, rp, j, l).relative <= 1e-8


def test_row_elimination_perturbed(rng):
    _, _, target = ubar_target(rng, 6, 4)
    noise = 1e-2 * (rng.standard_normal(target.u_or_v.shape) + 1j * rng.standard_normal(target.u_or_v.shape))
    rp = real_pair(TargetInteraction(RECEIVER, target.u_or_v + noise, target.coupling))
    sys = assemble_system(rp, make_architecture("band", 6, q=3))
    assert max(verify_row_elimination(sys, rp, j, l).relative for j in range(1, 4) for l in range(j + 1, 5)) > 1e-8


def test_elimination_coefficient_j1(rng):
    # j = 1: alpha is a_{n,1} and c solves the 1x1 system a_{n,1} c = a_{n,l}
    a = rng.standard_normal((6, 4))
    alpha, c = elimination_coefficients(a, 2, 1, 3)
    assert alpha == a[1, 0]
    assert c == pytest.approx([a[1, 2] / a[1, 0]])
    rp = RealPair(a, a)
    with pytest.raises(ValueError):
        verify_row_elimination(assemble_system(rp, make_architecture("band", 6, q=3)), rp, 2, 2)


def test_permutation_covariance(rng):
    ch = gaussian_channels(rng, 8, 3, 2)
    theta = random_theta(8, rng)
    arch = make_architecture("band", 8, q=3)
    rp = real_pair(make_target(ch, theta))
    b_hat = solve_susceptance(assemble_system(rp, arch)).b
    order = rng.permutation(8)
    rp2 = RealPair(rp.m[order], rp.gamma[order])
    b2 = solve_susceptance(assemble_system(rp2, arch.permuted(order))).b
    assert np.abs(b2 - b_hat[np.ix_(order, order)]).max() <= 1e-9 * np.abs(b_hat).max()


def test_sparsity_honored(rng):
    ch = gaussian_channels(rng, 9, 3, 2)
    arch = make_architecture("stem", 9, q=3)
    rec = reconstruct(ch, random_theta(9, rng), arch)
    off = ~arch.adjacency & ~np.eye(9, dtype=bool)
    assert (rec.susceptance.b[off] == 0).all()


def test_scenario_channels_roundtrip():
    cfg = ScenarioConfig(dims=SystemDims(4, 16, (1, 1, 1, 1)))
    rng = np.random.default_rng(5)
    ch = sample_channels(cfg, rng)
    for kind in ("band", "stem"):
        rec = reconstruct(ch, random_theta(16, rng), make_architecture(kind, 16, q=7))
        assert rec.ok and rec.roundtrip_error <= 1e-8
