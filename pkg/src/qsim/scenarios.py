"""Named end-to-end experiments with deterministic, serializable reports.

Every scenario is a pure function of its configuration: identical configs
produce byte-identical result payloads (wall time is reported outside the
determinism contract).
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import decision_payoff as dp
from . import heisenberg_flow as hf
from . import knowledge_entropy as ke
from . import operator_core as oc
from . import properties
from .errors import CapacityError, UsageError
from .rng import substream

SCENARIOS = (
    "copy-demo",
    "decoherence-demo",
    "payoff-demo",
    "no-cloning",
    "second-law",
    "property-suite",
)


def fmt(x: float) -> str:
    """Lossless decimal rendering of a double (17 significant digits)."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    seed: int = 1
    dims: tuple[int, ...] = (2, 2)
    trials: int = 100
    epsilon: float = 0.1
    epsilon_sweep: tuple[float, ...] | None = None
    output_path: str | None = None
    format: str = "json"
    uniform_weights: bool = False  # second-law: fixed uniform p_ab per trial

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise UsageError(
                f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}"
            )
        if self.trials < 1:
            raise UsageError(f"trials must be >= 1, got {self.trials}")
        if self.epsilon < 0:
            raise UsageError(f"epsilon must be >= 0, got {self.epsilon}")
        dims = tuple(int(d) for d in self.dims)
        if any(d < 2 for d in dims):
            raise UsageError(f"dims must each be >= 2, got {dims}")
        if int(np.prod(dims)) > oc.MAX_TOTAL_DIM:
            raise CapacityError(
                f"total dim {int(np.prod(dims))} exceeds maximum {oc.MAX_TOTAL_DIM}"
            )
        if self.format not in ("json", "csv"):
            raise UsageError(f"format must be json or csv, got {self.format!r}")
        if self.epsilon_sweep is not None:
            sweep = tuple(float(e) for e in self.epsilon_sweep)
            if not sweep or any(e < 0 for e in sweep) or list(sweep) != sorted(sweep):
                raise UsageError("epsilon sweep must be a nonempty ascending list of >= 0")
            object.__setattr__(self, "epsilon_sweep", sweep)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "seed", int(self.seed))

    def echo(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "dims": list(self.dims),
            "trials": self.trials,
            "epsilon": self.epsilon,
            "epsilon_sweep": list(self.epsilon_sweep) if self.epsilon_sweep else None,
            "format": self.format,
            "output_path": self.output_path,
            "uniform_weights": self.uniform_weights,
        }


@dataclass(frozen=True)
class RunReport:
    scenario: str
    config: dict
    results: dict
    csv_rows: tuple[tuple, ...]  # (header, row, row, ...) tabular projection
    tool_version: str
    wall_time_ms: float
    exit_code: int = 0

    def to_json(self) -> str:
        doc = {
            "scenario": self.scenario,
            "config": self.config,
            "results": self.results,
            "tool_version": self.tool_version,
            "wall_time_ms": self.wall_time_ms,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def results_payload(self) -> str:
        """The byte-reproducible part of the report."""
        return json.dumps(self.results, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.csv_rows:
            w.writerow(row)
        return buf.getvalue()


def _run_trials(seed: int, n: int, fn, parallel: bool = False) -> list:
    """Evaluate fn(trial_index, rng) for each trial on its own substream.

    Results are reduced in index order, so parallel and serial execution
    agree exactly.
    """
    if parallel:
        with ThreadPoolExecutor() as pool:
            return list(pool.map(lambda t: fn(t, substream(seed, t)), range(n)))
    return [fn(t, substream(seed, t)) for t in range(n)]


# ---------------------------------------------------------------------------
# Individual scenarios


def _scenario_copy_demo(cfg: ScenarioConfig):
    if tuple(cfg.dims) == (2, 2):
        ci = hf.cnot_interaction()
    else:
        rng = substream(cfg.seed, 0)
        d1, d2 = cfg.dims[0], cfg.dims[1]
        p1 = oc.random_projector_set(d1, [1] * d1, rng)
        p2 = oc.random_projector_set(d2, [1] * d2, rng)
        phases = rng.uniform(0, 2 * np.pi, size=(d1, d2))
        ci = hf.build_copy_unitary(phases, p1, p2)
    sd = oc.spectral_decompose_unitary(ci.unitary)
    report = hf.analyze_copy(ci)
    families = hf.copiable_projector_families(ci.unitary)
    fam_json = [
        {
            "labels": list(range(len(f))),
            "ranks": list(f.ranks()),
            "projectors": [oc.matrix_to_json(p) for p in f.projectors],
        }
        for f in families.families
    ]
    results = {
        "spectral_phases": [fmt(p) for p in sorted(sd.phases)],
        "projector_ranks": sorted(sd.projectors.ranks()),
        "copy_report": report.to_json(),
        "copiable_families": fam_json,
        "only_trivial_family": families.only_trivial,
        "degenerate_identity": families.degenerate_identity,
    }
    rows = [("c", "d", "copied") + tuple(f"phase_a{a}" for a in range(len(ci.proj1)))]
    for e in report.dyadic_table:
        rows.append((e.c, e.d, int(e.copied)) + tuple(fmt(p) for p in e.phases_by_a))
    return results, tuple(rows)


def _scenario_decoherence_demo(cfg: ScenarioConfig):
    ci = hf.cnot_interaction()
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    zero = np.array([1, 0], dtype=complex)
    rho0 = oc.DensityMatrix.pure(np.kron(plus, zero), ci.layout)
    bd = hf.branch_decomposition(rho0, ci)

    def margin_trial(t, rng):
        dim = int(rng.integers(2, 9))
        rho = oc.random_density(dim, int(rng.integers(1, dim + 1)), rng)
        blocks = []
        left = dim
        while left > 0:
            b = int(rng.integers(1, left + 1))
            blocks.append(b)
            left -= b
        ps = oc.random_projector_set(dim, blocks, rng)
        _, _, margin = ke.entropy_after_decoherence_geq(rho, ps)
        return margin

    margins = _run_trials(cfg.seed, cfg.trials, margin_trial)
    results = {
        "branches": [
            {"label": str(b.label), "weight": fmt(b.weight)} for b in bd.branches
        ],
        "cross_branch_norm_s1": fmt(bd.cross_branch_norm_s1),
        "cross_branch_norm_s2": fmt(bd.cross_branch_norm_s2),
        "decoherence_margins": {
            "trials": cfg.trials,
            "min": fmt(min(margins)),
            "mean": fmt(sum(margins) / len(margins)),
            "violations": sum(1 for m in margins if m < -1e-9),
        },
    }
    rows = [("branch_label", "weight")]
    for b in bd.branches:
        rows.append((str(b.label), fmt(b.weight)))
    return results, tuple(rows)


def _worked_qubit_example():
    """rho_v = |0><0| with payoff observable (|0>+|1>)(<0|+<1|)/2."""
    v = dp.RelativeState.from_ket(np.array([1, 0], dtype=complex))
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
    ps = oc.ProjectorSet.from_basis(np.column_stack([plus, minus]), labels=("+", "-"))
    a = dp.PayoffObservable((1.0, 0.0), ps)
    return v, a


def _scenario_payoff_demo(cfg: ScenarioConfig):
    v, a = _worked_qubit_example()
    payoff = dp.expected_payoff(v, a)
    freq = dp.frequency_experiment(v, a, cfg.trials, cfg.seed)
    results = {
        "expected_payoff": fmt(payoff),
        "payoff_product": oc.matrix_to_json(dp.payoff_product(v, a)),
        "frequencies": [
            {
                "outcome": str(r.outcome_label),
                "weight": fmt(r.weight),
                "count": r.count,
                "frequency": fmt(r.frequency),
                "abs_deviation": fmt(r.abs_deviation),
            }
            for r in freq.rows
        ],
        "max_deviation": fmt(freq.max_deviation),
    }
    rows = [("outcome_label", "weight", "count", "frequency", "abs_deviation")]
    for r in freq.rows:
        rows.append(
            (str(r.outcome_label), fmt(r.weight), r.count, fmt(r.frequency), fmt(r.abs_deviation))
        )
    return results, tuple(rows)


def _scenario_no_cloning(cfg: ScenarioConfig):
    ci = hf.cnot_interaction()
    zero = np.array([1, 0], dtype=complex)
    one = np.array([0, 1], dtype=complex)
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    fids = hf.no_cloning_demo([zero, one, plus], ci, blank=zero)
    names = ["|0>", "|1>", "|+>"]
    results = {
        "copier": "cnot",
        "fidelities": [
            {"source": n, "fidelity": fmt(f)} for n, f in zip(names, fids)
        ],
    }
    rows = [("source", "fidelity")] + [
        (n, fmt(f)) for n, f in zip(names, fids)
    ]
    return results, tuple(rows)


def _second_law_trial(dims, epsilon, uniform_weights):
    d1, d2 = dims

    def trial(t, rng):
        if uniform_weights:
            p = np.full((d1, d2), 1.0 / (d1 * d2))
        else:
            p = rng.random((d1, d2))
            p /= p.sum()
        ks = ke.build_knowledge_state(p, (d1, d2))
        theta = ke.perturb_selection((d1, d2), epsilon, rng)
        rep = ke.apply_selection_process(ks, theta)
        return rep.ds1, rep.ds2

    return trial


def _sweep_rows(cfg: ScenarioConfig, sweep):
    if len(cfg.dims) != 2:
        raise UsageError("second-law scenario needs exactly two factors")
    rows = []
    for i, eps in enumerate(sweep):
        trial = _second_law_trial(cfg.dims, eps, cfg.uniform_weights)
        # per-epsilon substream block keeps rows independent of sweep shape
        outs = _run_trials(cfg.seed + i, cfg.trials, trial)
        ds1 = [o[0] for o in outs]
        ds2 = [o[1] for o in outs]
        rows.append(
            {
                "epsilon": eps,
                "trials": cfg.trials,
                "mean_ds1": sum(ds1) / len(ds1),
                "mean_ds2": sum(ds2) / len(ds2),
                "violation_fraction_s1": sum(1 for d in ds1 if d < -1e-9) / len(ds1),
                "violation_fraction_s2": sum(1 for d in ds2 if d < -1e-9) / len(ds2),
            }
        )
    return rows


def run_second_law_sweep(cfg: ScenarioConfig) -> "RunReport":
    """Sweep the selection-imperfection dial and track entropy growth."""
    if not cfg.epsilon_sweep:
        raise UsageError("second-law sweep needs --epsilon-sweep")
    return run_scenario(cfg)


def _scenario_second_law(cfg: ScenarioConfig):
    sweep = cfg.epsilon_sweep if cfg.epsilon_sweep else (cfg.epsilon,)
    data = _sweep_rows(cfg, sweep)
    # the shipped counterexample: a perfect relabeling that lowers S1
    ks, theta = ke.relabeling_counterexample()
    counter = ke.apply_selection_process(ks, theta)
    results = {
        "sweep": [
            {
                "epsilon": fmt(r["epsilon"]),
                "trials": r["trials"],
                "mean_ds1": fmt(r["mean_ds1"]),
                "mean_ds2": fmt(r["mean_ds2"]),
                "violation_fraction_s1": fmt(r["violation_fraction_s1"]),
                "violation_fraction_s2": fmt(r["violation_fraction_s2"]),
            }
            for r in data
        ],
        "relabeling_counterexample": {
            "ds1": fmt(counter.ds1),
            "ds2": fmt(counter.ds2),
            "note": "entropy growth under selection is conditional, not automatic",
        },
    }
    rows = [
        (
            "epsilon",
            "trials",
            "mean_ds1",
            "mean_ds2",
            "violation_fraction_s1",
            "violation_fraction_s2",
        )
    ]
    for r in data:
        rows.append(
            (
                fmt(r["epsilon"]),
                r["trials"],
                fmt(r["mean_ds1"]),
                fmt(r["mean_ds2"]),
                fmt(r["violation_fraction_s1"]),
                fmt(r["violation_fraction_s2"]),
            )
        )
    return results, tuple(rows)


def _scenario_property_suite(cfg: ScenarioConfig, trials_override: int | None):
    results_list = properties.run_all(cfg.seed, trials_override)
    reduced = trials_override is not None and any(
        trials_override < properties.REGISTRY[r.property_id][0] for r in results_list
    )
    results = {
        "properties": [
            {
                "id": r.property_id,
                "trials": r.trials,
                "violations": r.violations,
                "worst_residual": fmt(r.worst),
                "status": "pass" if r.passed else "fail",
                "repro": (
                    None
                    if r.passed
                    else {"seed": cfg.seed, "trial_index": r.first_bad_trial}
                ),
            }
            for r in results_list
        ],
        "all_passed": all(r.passed for r in results_list),
        "reduced_confidence": reduced,
    }
    rows = [("property_id", "trials", "violations", "worst_residual", "status")]
    for r in results_list:
        rows.append(
            (r.property_id, r.trials, r.violations, fmt(r.worst), "pass" if r.passed else "fail")
        )
    exit_code = 0 if results["all_passed"] else 1
    return results, tuple(rows), exit_code


def run_scenario(cfg: ScenarioConfig, trials_override: int | None = None) -> RunReport:
    """Dispatch a scenario and assemble its deterministic report."""
    start = time.perf_counter()
    exit_code = 0
    if cfg.scenario == "copy-demo":
        results, rows = _scenario_copy_demo(cfg)
    elif cfg.scenario == "decoherence-demo":
        results, rows = _scenario_decoherence_demo(cfg)
    elif cfg.scenario == "payoff-demo":
        results, rows = _scenario_payoff_demo(cfg)
    elif cfg.scenario == "no-cloning":
        results, rows = _scenario_no_cloning(cfg)
    elif cfg.scenario == "second-law":
        results, rows = _scenario_second_law(cfg)
    elif cfg.scenario == "property-suite":
        results, rows, exit_code = _scenario_property_suite(cfg, trials_override)
    else:  # unreachable; config validates the name
        raise UsageError(f"unknown scenario {cfg.scenario!r}")
    wall = (time.perf_counter() - start) * 1000.0
    return RunReport(
        scenario=cfg.scenario,
        config=cfg.echo(),
        results=results,
        csv_rows=rows,
        tool_version=__version__,
        wall_time_ms=wall,
        exit_code=exit_code,
    )
