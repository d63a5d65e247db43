"""Decision-theoretic probability over relative states.

A branch ("version") of a system is described by a relative-state
projector; its betting weight for a payoff observable is the trace rule,
and conditioning on a copied outcome renormalizes the projected branch.
The frequency experiment models one observer-history of repeated trials.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ImpossibleOutcomeError, UsageError, ValidationError
from .heisenberg_flow import CopyInteraction
from .operator_core import (
    TAU_PROJ,
    ProjectorSet,
    as_matrix,
    dagger,
    is_hermitian,
    max_abs,
    tensor_product,
)
from .rng import substream


@dataclass(frozen=True)
class RelativeState:
    """Projector describing one branch, plus its branch-label history."""

    projector: np.ndarray
    label: tuple = ()

    def __post_init__(self):
        p = as_matrix(self.projector, "relative state")
        if not is_hermitian(p, TAU_PROJ) or max_abs(p @ p - p) > TAU_PROJ:
            raise ValidationError("relative state must be a projector")
        if np.trace(p).real < 0.5:
            raise ValidationError("relative state projector has rank 0")
        object.__setattr__(self, "projector", p)
        object.__setattr__(self, "label", tuple(self.label))

    @property
    def dim(self) -> int:
        return self.projector.shape[0]

    def as_density(self) -> np.ndarray:
        """Rank > 1 projectors renormalize to a unit-trace state."""
        return self.projector / np.trace(self.projector).real

    @staticmethod
    def from_ket(ket: np.ndarray, label: tuple = ()) -> "RelativeState":
        ket = np.asarray(ket, dtype=complex).reshape(-1)
        ket = ket / np.linalg.norm(ket)
        return RelativeState(np.outer(ket, ket.conj()), label)


@dataclass(frozen=True)
class PayoffObservable:
    """Observable whose eigenvalues are payoffs: sum_k payoff_k P_k."""

    eigenvalues: tuple[float, ...]
    projectors: ProjectorSet

    def __post_init__(self):
        vals = tuple(float(v) for v in self.eigenvalues)
        if len(vals) != len(self.projectors):
            raise ValidationError("payoff count must match projector count")
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError("payoffs must be finite")
        object.__setattr__(self, "eigenvalues", vals)

    def matrix(self) -> np.ndarray:
        dim = self.projectors.dim
        out = np.zeros((dim, dim), dtype=complex)
        for v, p in zip(self.eigenvalues, self.projectors.projectors):
            out += v * p
        return out


def payoff_product(v: RelativeState, a: PayoffObservable) -> np.ndarray:
    """The operator rho_v A whose trace is the expected payoff."""
    if v.dim != a.projectors.dim:
        raise UsageError(f"state dim {v.dim} != observable dim {a.projectors.dim}")
    return v.as_density() @ a.matrix()


def expected_payoff(v: RelativeState, a: PayoffObservable) -> float:
    """Betting weight tr(rho_v A)."""
    return float(np.trace(payoff_product(v, a)).real)


def outcome_weights(v: RelativeState, ps: ProjectorSet) -> np.ndarray:
    """Branch weights tr(rho_v P_k), clamped against rounding noise."""
    rho = v.as_density()
    w = np.array([np.trace(rho @ p).real for p in ps.projectors])
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def relative_state_update(
    v: RelativeState, ci: CopyInteraction, outcome_label
) -> tuple[RelativeState, float]:
    """Condition the evolved branch on one copied outcome.

    Outcomes are the copied branch labels, i.e. the labels of the S1
    projector family whose information the interaction records.  Returns
    the renormalized projected state with its label path extended by
    (interaction, outcome), together with the branch weight.
    """
    if outcome_label not in ci.proj1.labels:
        raise UsageError(f"unknown outcome {outcome_label!r}; have {ci.proj1.labels}")
    if v.dim != ci.unitary.dim:
        raise UsageError(f"state dim {v.dim} != interaction dim {ci.unitary.dim}")
    k = ci.proj1.labels.index(outcome_label)
    q = tensor_product(ci.proj1.projectors[k], np.eye(ci.proj2.dim, dtype=complex))
    u = ci.unitary.mat
    evolved = u @ v.as_density() @ dagger(u)
    block = q @ evolved @ q
    weight = float(np.trace(block).real)
    if weight <= 1e-12:
        raise ImpossibleOutcomeError(
            f"outcome {outcome_label!r} has zero branch weight"
        )
    # rebuild a projector onto the support of the conditioned state
    evals, evecs = np.linalg.eigh(block / weight)
    support = evecs[:, evals > 1e-10]
    proj = support @ dagger(support)
    label = v.label + ((id_of(ci), outcome_label),)
    return RelativeState(proj, label), weight


def id_of(ci: CopyInteraction) -> str:
    """Stable identity for an interaction inside branch-label paths."""
    return f"copy[{len(ci.proj1)}x{len(ci.proj2)}]@{ci.unitary.dim}"


@dataclass(frozen=True)
class OutcomeRow:
    outcome_label: object
    weight: float
    count: int
    frequency: float
    abs_deviation: float


@dataclass(frozen=True)
class FrequencyReport:
    rows: tuple[OutcomeRow, ...]
    n_trials: int
    seed: int
    expected_payoff: float
    max_deviation: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["outcome_label", "weight", "count", "frequency", "abs_deviation"])
        for r in self.rows:
            w.writerow(
                [
                    r.outcome_label,
                    format(r.weight, ".17g"),
                    r.count,
                    format(r.frequency, ".17g"),
                    format(r.abs_deviation, ".17g"),
                ]
            )
        return buf.getvalue()


def frequency_experiment(
    v: RelativeState, a: PayoffObservable, n_trials: int, seed: int
) -> FrequencyReport:
    """Simulate one observer-history of repeated branch selections.

    Trial i draws from substream(seed, i), so the report is deterministic
    and independent of evaluation order.
    """
    if n_trials < 1:
        raise UsageError(f"n_trials must be >= 1, got {n_trials}")
    weights = outcome_weights(v, a.projectors)
    cum = np.cumsum(weights)
    counts = np.zeros(len(weights), dtype=int)
    for i in range(n_trials):
        u = substream(seed, i).random()
        k = int(np.searchsorted(cum, u, side="right"))
        counts[min(k, len(weights) - 1)] += 1
    rows = []
    for k, label in enumerate(a.projectors.labels):
        freq = counts[k] / n_trials
        rows.append(
            OutcomeRow(label, float(weights[k]), int(counts[k]), freq, abs(freq - weights[k]))
        )
    return FrequencyReport(
        tuple(rows),
        n_trials,
        seed,
        expected_payoff(v, a),
        max(r.abs_deviation for r in rows),
    )
