"""Monte Carlo sweeps comparing architectures on one objective.

Seeding: trial ``t`` draws its channels from ``trial_rng(seed, t)`` and runs
the optimizer with seed ``optimizer_seed(seed, t)``, so every architecture
and every sweep value of a trial sees the same realization whenever the
dimensions agree.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .channel import ScenarioConfig, sample_channels, trial_rng
from .optimize import OBJECTIVES, OptimizeOptions, OptimizeResult, equalize_by_reconstruction, optimize_architecture
from .reconstruct import Inconsistent
from .topology import (
    Architecture,
    InvalidParam,
    SystemDims,
    complexity_count,
    effective_L,
    make_architecture,
    random_theorem1_architecture,
    satisfies_theorem1,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SWEEP_AXES = ("n_ris", "q", "group_size", "n_users")
CSV_FIELDS = (
    "schema_version",
    "objective",
    "sweep_axis",
    "sweep_value",
    "architecture",
    "complexity_count",
    "mean_value",
    "std_value",
    "trials",
    "seed_base",
)


def optimizer_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(trial), 1]).generate_state(1)[0])


@dataclass(frozen=True)
class ArchSpec:
    """Architecture recipe resolved against a surface size and ``L``.

    ``q`` may be the string ``"2L-1"``.  Kind ``generic`` is a random member
    of the optimal class drawn from ``params["seed"]``.
    """

    kind: str
    params: tuple = ()

    @classmethod
    def parse(cls, obj) -> "ArchSpec":
        """Accepts ``"band:q=2L-1"``, ``"group:group_size=4"``, ``"fully"`` or a dict."""
        if isinstance(obj, ArchSpec):
            return obj
        if isinstance(obj, dict):
            params = dict(obj.get("params", {}))
            params.update({k: v for k, v in obj.items() if k not in ("kind", "params")})
            return cls(obj["kind"], tuple(sorted(params.items())))
        text = str(obj).strip()
        kind, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, eq, value = item.partition("=")
            if not eq:
                raise InvalidParam(f"bad architecture parameter {item!r}")
            value = value.strip()
            params[key.strip()] = value if value == "2L-1" else int(value)
        return cls(kind.strip(), tuple(sorted(params.items())))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def text(self) -> str:
        if not self.params:
            return self.kind
        return self.kind + ":" + ",".join(f"{k}={v}" for k, v in self.params)

    def resolve(self, n_ris: int, L) -> dict:
        params = self.param_dict
        if params.get("q") == "2L-1":
            params["q"] = int(2 * Fraction(L) - 1)
        return params

    def build(self, n_ris: int, L) -> Architecture:
        params = self.resolve(n_ris, L)
        if self.kind == "generic":
            return random_theorem1_architecture(n_ris, L, np.random.default_rng(int(params.get("seed", 0))))
        return make_architecture(self.kind, n_ris, **params)

    def label(self, n_ris: int, L) -> str:
        params = self.resolve(n_ris, L)
        if self.kind in ("band", "stem"):
            return f"{self.kind}(q={params['q']})"
        if self.kind == "group":
            size = params.get("group_size", n_ris // params.get("G", 1))
            return f"group(Gs={size})"
        if self.kind == "generic":
            return f"generic(seed={params.get('seed', 0)})"
        return self.kind

    def with_axis(self, axis: str, value) -> "ArchSpec":
        params = self.param_dict
        if axis == "q" and self.kind in ("band", "stem"):
            params["q"] = value
        elif axis == "group_size" and self.kind == "group":
            params.pop("G", None)
            params["group_size"] = value
        else:
            return self
        return ArchSpec(self.kind, tuple(sorted(params.items())))


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    architectures: list = field(default_factory=lambda: ["single", "fully"])
    objective: str = "sum_channel_gain"
    sweep_axis: str | None = None
    sweep_values: list = field(default_factory=list)
    trials: int = 1
    output_path: str | None = None
    equalize: bool = False
    restarts: int = 4
    max_iters: int = 200

    def __post_init__(self):
        if isinstance(self.scenario, dict):
            self.scenario = ScenarioConfig.from_dict(self.scenario)
        self.architectures = [ArchSpec.parse(a) for a in self.architectures]
        if self.objective not in OBJECTIVES:
            raise InvalidParam(f"unknown objective {self.objective!r}")
        if self.trials < 1:
            raise InvalidParam("trials must be at least 1")
        if self.sweep_axis is not None and self.sweep_axis not in SWEEP_AXES:
            raise InvalidParam(f"unknown sweep axis {self.sweep_axis!r}")
        if self.sweep_axis is not None and not self.sweep_values:
            raise InvalidParam("a sweep axis needs values")
        for value in self.sweep_values:
            if self.sweep_axis == "q" and value != "2L-1" and int(value) < 0:
                raise InvalidParam("q values must be nonnegative")
            if self.sweep_axis in ("n_ris", "group_size", "n_users") and int(value) < 1:
                raise InvalidParam(f"{self.sweep_axis} values must be positive")
        # fail early on combinations that cannot be built
        for point in self.points():
            dims = point[1].dims
            L = effective_L(dims)
            for arch in point[2]:
                arch.build(dims.n_ris, L)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise InvalidParam(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def points(self) -> list[tuple]:
        """``(sweep_value, scenario, arch_specs)`` for every sweep point."""
        if self.sweep_axis is None:
            return [("", self.scenario, list(self.architectures))]
        out = []
        for value in self.sweep_values:
            scenario = self.scenario
            archs = list(self.architectures)
            if self.sweep_axis == "n_ris":
                dims = dataclasses.replace(scenario.dims, n_ris=int(value))
                scenario = scenario.replace(dims=dims)
            elif self.sweep_axis == "n_users":
                k = int(value)
                dims = SystemDims(scenario.dims.n_tx, scenario.dims.n_ris, (1,) * k)
                scenario = scenario.replace(dims=dims)
            else:
                archs = [a.with_axis(self.sweep_axis, value) for a in archs]
            out.append((value, scenario, archs))
        return out


@dataclass(frozen=True)
class ResultRecord:
    sweep_value: object
    architecture_label: str
    complexity_count: int
    mean_value: float
    std_value: float
    trials: int
    seed_base: int

    def __post_init__(self):
        if not self.std_value >= 0:
            raise ValueError("std_value must be nonnegative")


@dataclass
class SweepResult:
    spec: ExperimentSpec
    records: list
    # (sweep_value, label) -> per-trial values, trial order
    per_trial: dict
    # labels whose values came from reconstruction of the fully-connected optimum
    equalized: dict

    def to_csv(self) -> str:
        return records_to_csv(self.records, self.spec.objective, self.spec.sweep_axis or "")


def _fmt(x) -> str:
    return "%.17g" % x if isinstance(x, float) else str(x)


def records_to_csv(records: Sequence[ResultRecord], objective: str, axis: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        writer.writerow(
            [
                SCHEMA_VERSION,
                objective,
                axis,
                _fmt(r.sweep_value),
                r.architecture_label,
                r.complexity_count,
                _fmt(r.mean_value),
                _fmt(r.std_value),
                r.trials,
                r.seed_base,
            ]
        )
    return buf.getvalue()


def report_value(objective: str, value: float) -> float:
    """IO units: sum rate in bits, channel gain as is."""
    return value / np.log(2) if objective == "sum_rate" else value


def run_trial(
    scenario: ScenarioConfig,
    archs: Sequence[Architecture],
    objective: str,
    trial: int,
    equalize_mask: Sequence[bool] = (),
    restarts: int = 4,
    max_iters: int = 200,
) -> tuple[list[float], list[bool]]:
    """Values (nats for sum rate) of every architecture on one channel draw.

    Architectures are optimized in increasing edge count; each run is
    warm-started from the optima of all earlier runs on subgraphs of it.
    Masked architectures take the reconstruction of the fully-connected
    optimum instead, falling back to local optimization if the linear system
    turns out inconsistent.
    """
    seed = scenario.seed
    ch = sample_channels(scenario, trial_rng(seed, trial))
    dims = scenario.dims
    mask = list(equalize_mask) or [False] * len(archs)
    power = scenario.power_budget if objective == "sum_rate" else None
    streams = dims.streams

    solved: list[tuple[Architecture, OptimizeResult]] = []

    def optimize(arch: Architecture) -> OptimizeResult:
        warm = [(r.susceptance.b, None if r.beamformer is None else r.beamformer.w) for a, r in solved if a.is_subgraph_of(arch)]
        opts = OptimizeOptions(restarts=restarts, max_iters=max_iters, seed=optimizer_seed(seed, trial), warm_starts=warm)
        res = optimize_architecture(ch, arch, objective, opts, power_budget=power, streams=streams)
        solved.append((arch, res))
        return res

    values: list[float | None] = [None] * len(archs)
    used_equalize = [False] * len(archs)
    order = sorted(range(len(archs)), key=lambda i: (archs[i].n_edges, i))
    for i in order:
        if not mask[i]:
            values[i] = optimize(archs[i]).value
    if any(mask):
        fully = make_architecture("fully", dims.n_ris)
        fully_res = next((r for a, r in solved if a == fully), None) or optimize(fully)
        for i in order:
            if not mask[i]:
                continue
            try:
                values[i] = equalize_by_reconstruction(ch, archs[i], fully_res).value
                used_equalize[i] = True
            except Inconsistent as exc:
                log.warning("trial %d: reconstruction on %r inconsistent (%s); optimizing locally", trial, archs[i], exc)
                values[i] = optimize(archs[i]).value
    return [float(v) for v in values], used_equalize


def run_sweep(spec: ExperimentSpec, threads: int = 1) -> SweepResult:
    records = []
    per_trial = {}
    equalized = {}
    seed = spec.scenario.seed
    for sweep_value, scenario, arch_specs in spec.points():
        dims = scenario.dims
        L = effective_L(dims)
        archs = [a.build(dims.n_ris, L) for a in arch_specs]
        labels = [a.label(dims.n_ris, L) for a in arch_specs]
        if len(set(labels)) != len(labels):
            raise InvalidParam(f"duplicate architectures at sweep value {sweep_value!r}: {labels}")
        mask = [
            spec.equalize and s.kind != "fully" and (s.kind == "generic" or satisfies_theorem1(a, L).ok)
            for s, a in zip(arch_specs, archs)
        ]

        def job(t, scenario=scenario, archs=archs, mask=mask):
            return run_trial(scenario, archs, spec.objective, t, mask, spec.restarts, spec.max_iters)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(job, range(spec.trials)))
        else:
            results = [job(t) for t in range(spec.trials)]
        vals = np.array([r[0] for r in results])
        for j, (label, arch) in enumerate(zip(labels, archs)):
            col = np.array([report_value(spec.objective, v) for v in vals[:, j]])
            per_trial[(sweep_value, label)] = col
            equalized[(sweep_value, label)] = all(r[1][j] for r in results)
            std = float(col.std(ddof=1)) if len(col) > 1 else 0.0
            records.append(
                ResultRecord(sweep_value, label, complexity_count(arch), float(col.mean()), std, spec.trials, seed)
            )
    return SweepResult(spec, records, per_trial, equalized)


def write_sweep(result: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(result.to_csv())
