"""Named invariant suites run by ``bdris verify``.

Every suite takes a base seed and a trial count and returns a
:class:`SuiteReport`.  Trial ``t`` of configuration ``c`` draws from
``SeedSequence([seed, c, t])`` (see :func:`case_rng`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, ScenarioConfig, sample_channels
from .network import sample_susceptance, susceptance_from_theta, theta_from_susceptance
from .reconstruct import (
    RECEIVER,
    TRANSMITTER,
    SingularCoefficientBlock,
    TargetInteraction,
    assemble_system,
    check_ubar,
    lemma6_residual,
    make_target,
    predicted_rank,
    rank_report,
    real_pair,
    reconstruct,
    verify_row_elimination,
)
from .topology import SystemDims, effective_L, make_architecture, tree_equivalence_census

SUITES = ("cayley", "ranks", "roundtrip", "tree-census", "row-elim", "ubar")


@dataclass
class SuiteReport:
    name: str
    passed: bool
    summary: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "summary": self.summary, "failures": self.failures}


def case_rng(seed: int, case: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(case), int(trial)]))


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def gaussian_channels(rng, n_ris: int, n_tx: int, n_rx: int) -> ChannelSet:
    """Unit-variance i.i.d. channels with single-antenna users and no direct link."""
    return ChannelSet(
        _cn(rng, (n_ris, n_tx)), _cn(rng, (n_rx, n_ris)), np.zeros((n_rx, n_tx), dtype=complex), (1,) * n_rx, 1.0
    )


def ubar_target(rng, n_ris: int, kappa: int) -> tuple[ChannelSet, np.ndarray, TargetInteraction]:
    """Receiver-side target reached by a random fully-connected Theta; ``kappa = 2 * n_rx``."""
    if kappa % 2:
        raise ValueError("receiver-side targets have an even kappa")
    n_rx = kappa // 2
    ch = gaussian_channels(rng, n_ris, n_rx + 1, n_rx)
    theta = theta_from_susceptance(sample_susceptance(n_ris, rng)).theta
    return ch, theta, make_target(ch, theta, RECEIVER)


def suite_cayley(seed: int = 0, trials: int = 100, sizes=(4, 16, 64)) -> SuiteReport:
    failures = []
    worst = {"unitarity": 0.0, "symmetry": 0.0, "roundtrip": 0.0}
    for case, n in enumerate(sizes):
        for t in range(trials):
            b = sample_susceptance(n, case_rng(seed, case, t))
            th = theta_from_susceptance(b)
            unit = th.unitarity_residual()
            sym = th.symmetry_residual()
            back = susceptance_from_theta(th).b
            rt = float(np.linalg.norm(back - b) / np.linalg.norm(b))
            worst["unitarity"] = max(worst["unitarity"], unit / n)
            worst["symmetry"] = max(worst["symmetry"], sym)
            worst["roundtrip"] = max(worst["roundtrip"], rt)
            if unit > 1e-10 * n or sym > 1e-12 or rt > 1e-9:
                failures.append({"n": n, "trial": t, "unitarity": unit, "symmetry": sym, "roundtrip": rt})
    return SuiteReport("cayley", not failures, {"max_unitarity_per_n": worst["unitarity"],
                                                 "max_symmetry": worst["symmetry"],
                                                 "max_roundtrip": worst["roundtrip"]}, failures)


def suite_ranks(seed: int = 0, trials: int = 50, sizes=(6, 8, 10, 12), kappas=(2, 4)) -> SuiteReport:
    failures = []
    summary = {}
    case = 0
    for n in sizes:
        for kappa in kappas:
            arch = make_architecture("band", n, q=kappa - 1)
            hits = 0
            seen = None
            for t in range(trials):
                _, _, target = ubar_target(case_rng(seed, case, t), n, kappa)
                rep = rank_report(assemble_system(real_pair(target), arch))
                seen = f"{rep.rank_a}/{rep.rank_ab}/{rep.predicted}"
                if rep.ok:
                    hits += 1
                else:
                    failures.append({"n": n, "kappa": kappa, "trial": t, "ranks": seen})
            summary[f"n={n},kappa={kappa}"] = {"predicted": predicted_rank(n, kappa), "last": seen, "matches": hits}
            case += 1
    return SuiteReport("ranks", not failures, summary, failures)


def roundtrip_cases(sizes=(8, 12, 16), dofs=(2, 4)) -> list[tuple]:
    """``(n_ris, n_tx, n_rx, side)``: receiver-limited then transmitter-limited scenarios."""
    cases = []
    for n in sizes:
        for d in dofs:
            cases.append((n, d + 2, d, RECEIVER))
            cases.append((n, d, d + 2, TRANSMITTER))
    return cases


def effective_channel_error(ch: ChannelSet, theta_hat, theta_star) -> float:
    ref = ch.h_r @ theta_star @ ch.g
    return float(np.linalg.norm(ch.h_r @ theta_hat @ ch.g - ref) / np.linalg.norm(ref))


def suite_roundtrip(seed: int = 0, trials: int = 200, sizes=(8, 12, 16), dofs=(2, 4), tol: float = 1e-8) -> SuiteReport:
    """Reconstruction on band and stem at width ``2L-1``; failures must be flagged near-singular."""
    failures = []
    summary = {}
    for case, (n, n_tx, n_rx, side) in enumerate(roundtrip_cases(sizes, dofs)):
        dims = SystemDims(n_tx, n, (1,) * n_rx)
        q = 2 * effective_L(dims) - 1
        cfg = ScenarioConfig(dims=dims)
        for kind in ("band", "stem"):
            arch = make_architecture(kind, n, q=int(q))
            good = 0
            for t in range(trials):
                rng = case_rng(seed, case, t)
                ch = sample_channels(cfg, rng)
                theta = theta_from_susceptance(sample_susceptance(n, rng)).theta
                rec = reconstruct(ch, theta, arch)
                err = effective_channel_error(ch, rec.theta.theta, theta) if rec.ok else np.inf
                if rec.side != side:
                    failures.append({"case": [n, n_tx, n_rx], "trial": t, "reason": f"side {rec.side} != {side}"})
                if err <= tol:
                    good += 1
                elif not rec.report.near_singular:
                    failures.append({"case": [n, n_tx, n_rx], "arch": arch.label, "trial": t, "error": err})
            key = f"n={n},tx={n_tx},rx={n_rx},{arch.label}"
            summary[key] = good / trials
            if good < 0.99 * trials:
                failures.append({"case": key, "success_rate": good / trials})
    return SuiteReport("roundtrip", not failures, summary, failures)


def suite_tree_census(seed: int = 0, trials: int = 1, sizes=(2, 3, 4, 5, 6)) -> SuiteReport:
    # exhaustive: seed and trials are unused
    failures = []
    summary = {}
    for n in sizes:
        res = tree_equivalence_census(n)
        summary[f"n={n}"] = {"graphs": res.n_graphs, "trees": res.count_trees, "mismatches": len(res.mismatches)}
        if res.mismatches:
            failures.append({"n": n, "mismatches": [list(map(list, m)) for m in res.mismatches[:10]]})
        if res.count_trees != n ** (n - 2) or res.count_condition_satisfied != res.count_trees:
            failures.append({"n": n, "trees": res.count_trees, "expected": n ** (n - 2)})
    return SuiteReport("tree-census", not failures, summary, failures)


def suite_row_elim(seed: int = 0, trials: int = 20, n: int = 6, kappa: int = 4, tol: float = 1e-8) -> SuiteReport:
    arch = make_architecture("band", n, q=kappa - 1)
    failures = []
    worst = 0.0
    for t in range(trials):
        _, _, target = ubar_target(case_rng(seed, 0, t), n, kappa)
        rp = real_pair(target)
        sys = assemble_system(rp, arch)
        for j in range(1, kappa):
            for l in range(j + 1, kappa + 1):
                try:
                    rel = verify_row_elimination(sys, rp, j, l).relative
                except SingularCoefficientBlock as exc:
                    failures.append({"trial": t, "j": j, "l": l, "reason": str(exc)})
                    continue
                worst = max(worst, rel)
                if rel > tol:
                    failures.append({"trial": t, "j": j, "l": l, "relative": rel})
    return SuiteReport("row-elim", not failures, {"max_relative": worst}, failures)


def suite_ubar(seed: int = 0, trials: int = 50, n: int = 8, kappa: int = 4) -> SuiteReport:
    """Reached targets are in the superset and satisfy the symmetry identity; perturbed ones are not."""
    failures = []
    worst = 0.0
    rejected = 0
    for t in range(trials):
        rng = case_rng(seed, 0, t)
        ch, theta, target = ubar_target(rng, n, kappa)
        res = lemma6_residual(real_pair(target))
        worst = max(worst, res)
        if not check_ubar(target) or res > 1e-10:
            failures.append({"trial": t, "lemma6": res, "in_ubar": check_ubar(target)})
        noisy = TargetInteraction(RECEIVER, target.u_or_v + 1e-3 * _cn(rng, target.u_or_v.shape), target.coupling)
        rejected += not check_ubar(noisy)
    if rejected != trials:
        failures.append({"perturbed_rejected": rejected, "trials": trials})
    return SuiteReport("ubar", not failures, {"max_lemma6": worst, "perturbed_rejected": rejected}, failures)


_RUNNERS = {
    "cayley": suite_cayley,
    "ranks": suite_ranks,
    "roundtrip": suite_roundtrip,
    "tree-census": suite_tree_census,
    "row-elim": suite_row_elim,
    "ubar": suite_ubar,
}


def run_suite(name: str, seed: int = 0, trials: int | None = None, **params) -> SuiteReport:
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    kwargs = dict(params)
    if trials is not None:
        kwargs["trials"] = trials
    return _RUNNERS[name](seed=seed, **kwargs)
