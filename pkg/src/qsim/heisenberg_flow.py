"""Heisenberg-picture information flow between two interacting subsystems.

Builds product-of-projector copy interactions, checks which observables
survive them unchanged, and extracts the discrete projector families whose
labels are the only information a unitary interaction can copy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AnalysisError, UsageError, ValidationError
from .operator_core import (
    TAU_RECON,
    DensityMatrix,
    ProjectorSet,
    SpectralDecomposition,
    SubsystemLayout,
    UnitaryOperator,
    as_matrix,
    computational_projectors,
    dagger,
    evolve_state,
    is_hermitian,
    max_abs,
    tensor_product,
)


@dataclass(frozen=True)
class Descriptor:
    """One named operator of a subsystem, embedded in the total space."""

    name: str
    subsystem: int
    mat: np.ndarray


@dataclass(frozen=True)
class DescriptorSet:
    """Representative operators of each subsystem at one time step."""

    layout: SubsystemLayout
    descriptors: tuple[Descriptor, ...]
    time_tag: int = 0

    def __post_init__(self):
        for d in self.descriptors:
            m = as_matrix(d.mat, f"descriptor {d.name}")
            if m.shape[0] != self.layout.total_dim:
                raise ValidationError(
                    f"descriptor {d.name} dim {m.shape[0]} != total {self.layout.total_dim}"
                )

    def by_name(self, name: str) -> np.ndarray:
        for d in self.descriptors:
            if d.name == name:
                return d.mat
        raise UsageError(f"no descriptor named {name!r}")


@dataclass(frozen=True)
class ObservableSpec:
    """Observable sum_a alpha_a P_a over a complete projector family."""

    coefficients: tuple[float, ...]
    projectors: ProjectorSet

    def __post_init__(self):
        if len(self.coefficients) != len(self.projectors):
            raise ValidationError("coefficient count must match projector count")
        object.__setattr__(
            self, "coefficients", tuple(float(c) for c in self.coefficients)
        )

    def matrix(self) -> np.ndarray:
        dim = self.projectors.dim
        out = np.zeros((dim, dim), dtype=complex)
        for c, p in zip(self.coefficients, self.projectors.projectors):
            out += c * p
        return out


@dataclass(frozen=True)
class CopyInteraction:
    """U = sum_ab exp(i phi_ab) P_1a x P_2b on S1 x S2."""

    phases: np.ndarray  # rows indexed by S1 labels, columns by S2 labels
    proj1: ProjectorSet
    proj2: ProjectorSet
    unitary: UnitaryOperator

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        if phases.shape != (len(self.proj1), len(self.proj2)):
            raise ValidationError(
                f"phase matrix shape {phases.shape} != projector counts "
                f"({len(self.proj1)}, {len(self.proj2)})"
            )
        phases = phases.copy()
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)
        recon = _copy_unitary_matrix(phases, self.proj1, self.proj2)
        if max_abs(recon - self.unitary.mat) > TAU_RECON:
            raise ValidationError("copy interaction does not reconstruct its unitary")

    @property
    def layout(self) -> SubsystemLayout:
        return self.unitary.layout


def _copy_unitary_matrix(
    phases: np.ndarray, p1: ProjectorSet, p2: ProjectorSet
) -> np.ndarray:
    d = p1.dim * p2.dim
    out = np.zeros((d, d), dtype=complex)
    for a, pa in enumerate(p1.projectors):
        for b, pb in enumerate(p2.projectors):
            out += np.exp(1j * phases[a, b]) * tensor_product(pa, pb)
    return out


def build_copy_unitary(
    phases: np.ndarray, p1: ProjectorSet, p2: ProjectorSet
) -> CopyInteraction:
    """Assemble the product-of-projectors interaction unitary.

    The global phase gauge is fixed by shifting all phases so phi[0, 0] = 0.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (len(p1), len(p2)):
        raise ValidationError(
            f"phase matrix shape {phases.shape} != ({len(p1)}, {len(p2)})"
        )
    phases = phases - phases[0, 0]
    mat = _copy_unitary_matrix(phases, p1, p2)
    layout = SubsystemLayout((p1.dim, p2.dim))
    u = UnitaryOperator(layout, mat)
    return CopyInteraction(phases, p1, p2, u)


def cnot_interaction() -> CopyInteraction:
    """The canonical two-qubit copier: control computational, target +/-."""
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
    p2 = ProjectorSet.from_basis(np.column_stack([plus, minus]), labels=("+", "-"))
    p1 = computational_projectors(2)
    return build_copy_unitary(np.array([[0.0, 0.0], [0.0, np.pi]]), p1, p2)


# ---------------------------------------------------------------------------
# Evolution and invariance


def evolve_descriptor(d: DescriptorSet, u: UnitaryOperator) -> DescriptorSet:
    """Heisenberg step: each operator O becomes U-dagger O U."""
    if d.layout.total_dim != u.dim:
        raise UsageError(f"descriptor dim {d.layout.total_dim} != unitary dim {u.dim}")
    ud = dagger(u.mat)
    evolved = tuple(
        Descriptor(x.name, x.subsystem, ud @ x.mat @ u.mat) for x in d.descriptors
    )
    return DescriptorSet(d.layout, evolved, d.time_tag + 1)


def conjugate_dyadic(x_cd: np.ndarray, sd: SpectralDecomposition) -> np.ndarray:
    """U-dagger X_cd U for a dyadic aligned with the eigenspaces of U.

    A dyadic mapping eigenspace d into eigenspace c just picks up the phase
    difference exp(i (phi_d - phi_c)); in particular it is invariant when
    c = d or when the two eigenphases are degenerate (already clustered).
    """
    x_cd = as_matrix(x_cd, "dyadic")
    scale = max_abs(x_cd)
    if scale == 0.0:
        raise AnalysisError("zero dyadic is not aligned with any eigenspace pair")
    projs = sd.projectors.projectors
    for c, pc in enumerate(projs):
        for d, pd in enumerate(projs):
            if max_abs(pc @ x_cd @ pd - x_cd) <= 1e-9 * max(1.0, scale):
                return np.exp(1j * (sd.phases[d] - sd.phases[c])) * x_cd
    raise AnalysisError("dyadic is not aligned with the eigenbasis of the decomposition")


@dataclass(frozen=True)
class InvarianceResult:
    invariant: bool
    residual: float


def check_invariance(obs: ObservableSpec, ci: CopyInteraction) -> InvarianceResult:
    """Does the interaction leave A x I unchanged?"""
    a_full = tensor_product(obs.matrix(), np.eye(ci.proj2.dim, dtype=complex))
    u = ci.unitary.mat
    residual = max_abs(dagger(u) @ a_full @ u - a_full)
    return InvarianceResult(residual <= 1e-9, residual)


# ---------------------------------------------------------------------------
# Copy analysis


def _block_basis(ps: ProjectorSet) -> tuple[np.ndarray, list[list[int]]]:
    """Orthonormal basis adapted to a projector family.

    Returns a column matrix of basis vectors and, per label, the column
    indices spanning that block.
    """
    dim = ps.dim
    cols = []
    groups: list[list[int]] = []
    for p in ps.projectors:
        evals, evecs = np.linalg.eigh(p)
        members = [k for k in range(dim) if evals[k] > 0.5]
        groups.append(list(range(len(cols), len(cols) + len(members))))
        cols.extend(evecs[:, k] for k in members)
    return np.column_stack(cols), groups


def _phase_spread(phases: np.ndarray) -> float:
    """Max deviation of unit phasors from their common direction."""
    mean = np.mean(np.exp(1j * phases))
    if abs(mean) < 1e-15:
        return 2.0
    return float(np.max(np.abs(np.exp(1j * phases) - mean / abs(mean))))


@dataclass(frozen=True)
class DyadicEntry:
    c: int
    d: int
    phases_by_a: tuple[float, ...]
    copied: bool


@dataclass(frozen=True)
class CopyReport:
    """Which projector labels the interaction writes into the other subsystem."""

    dyadic_table: tuple[DyadicEntry, ...]
    copied_into_2: tuple  # proj1 labels copied into S2 descriptors
    copied_into_1: tuple  # proj2 labels copied into S1 descriptors
    max_residual: float  # corrected transformation vs brute-force conjugation

    def to_json(self) -> dict:
        return {
            "copied_families": {
                "into_subsystem_2": list(self.copied_into_2),
                "into_subsystem_1": list(self.copied_into_1),
            },
            "dyadic_table": [
                {
                    "c": e.c,
                    "d": e.d,
                    "phases_by_a": list(e.phases_by_a),
                    "copied": e.copied,
                }
                for e in self.dyadic_table
            ],
            "residuals": {"max": self.max_residual},
        }


def analyze_copy(ci: CopyInteraction, dependence_tol: float = 1e-9) -> CopyReport:
    """Evolve every S2 dyadic and record its dependence on the S1 projectors.

    The evolved dyadic is sum_a exp(i (phi_ad - phi_ac)) P_1a x X_2cd; the
    dyadic carries copied information exactly when those phases differ
    across a.  Each predicted form is checked against brute-force
    conjugation of I x X_2cd.
    """
    u = ci.unitary.mat
    d1 = ci.proj1.dim
    i1 = np.eye(d1, dtype=complex)
    basis2, groups2 = _block_basis(ci.proj2)
    n2 = len(ci.proj2)
    table = []
    max_residual = 0.0
    copied_labels_1 = set()
    for c in range(n2):
        for d in range(n2):
            # one representative dyadic per (c, d) block pair
            vc = basis2[:, groups2[c][0]]
            vd = basis2[:, groups2[d][0]]
            x_cd = np.outer(vc, vd.conj())
            phases = ci.phases[:, d] - ci.phases[:, c]
            predicted = np.zeros((u.shape[0], u.shape[0]), dtype=complex)
            for a, pa in enumerate(ci.proj1.projectors):
                predicted += np.exp(1j * phases[a]) * tensor_product(pa, x_cd)
            brute = dagger(u) @ tensor_product(i1, x_cd) @ u
            max_residual = max(max_residual, max_abs(predicted - brute))
            copied = _phase_spread(phases) > dependence_tol
            if copied:
                copied_labels_1.update(ci.proj1.labels)
            table.append(DyadicEntry(c, d, tuple(float(p) % (2 * np.pi) for p in phases), copied))
    # reverse direction: S1 dyadics pick up phases phi_cb - ... across b
    copied_labels_2 = set()
    n1 = len(ci.proj1)
    for c in range(n1):
        for d in range(n1):
            phases = ci.phases[d, :] - ci.phases[c, :]
            if _phase_spread(phases) > dependence_tol:
                copied_labels_2.update(ci.proj2.labels)
    copied_into_2 = tuple(l for l in ci.proj1.labels if l in copied_labels_1)
    copied_into_1 = tuple(l for l in ci.proj2.labels if l in copied_labels_2)
    return CopyReport(tuple(table), copied_into_2, copied_into_1, max_residual)


# ---------------------------------------------------------------------------
# Which projector families can be copied at all


@dataclass(frozen=True)
class CopiableFamilies:
    """Maximal S1 projector families left invariant by a bipartite unitary."""

    families: tuple[ProjectorSet, ...]
    only_trivial: bool
    degenerate_identity: bool  # every S1 observable is invariant (no interaction)


def _fixed_s1_operator_space(u: UnitaryOperator) -> list[np.ndarray]:
    """Hermitian basis of {A : U-dagger (A x I) U = A x I}."""
    if u.layout.n_factors != 2:
        raise UsageError("copiable-family analysis needs a two-factor layout")
    d1, d2 = u.layout.factor_dims
    i2 = np.eye(d2, dtype=complex)
    um = u.mat
    cols = []
    for i in range(d1):
        for j in range(d1):
            e = np.zeros((d1, d1), dtype=complex)
            e[i, j] = 1.0
            lifted = np.kron(e, i2)
            cols.append((dagger(um) @ lifted @ um - lifted).flatten())
    m = np.column_stack(cols)
    _, s, vh = np.linalg.svd(m)
    null_mask = np.zeros(d1 * d1, dtype=bool)
    null_mask[len(s):] = True
    null_mask[: len(s)] = s < 1e-10
    basis = [vh[k].conj().reshape(d1, d1) for k in range(d1 * d1) if null_mask[k]]
    # the fixed space is *-closed; split into Hermitian generators
    herm = []
    for a in basis:
        herm.append((a + dagger(a)) / 2)
        herm.append((a - dagger(a)) / 2j)
    # orthonormalize over the real vector space of Hermitian matrices
    out: list[np.ndarray] = []
    for h in herm:
        for g in out:
            h = h - np.trace(dagger(g) @ h).real * g
        nrm = np.sqrt(np.trace(dagger(h) @ h).real)
        if nrm > 1e-8:
            out.append(h / nrm)
    return out


def copiable_projector_families(u: UnitaryOperator) -> CopiableFamilies:
    """Finest S1 projector family with U-dagger (P x I) U = P x I per member.

    The invariant S1 operators form a *-algebra; the atoms of its center
    are the finest invariant projector family, and every coarse-graining of
    an invariant family is again invariant.
    """
    d1 = u.layout.factor_dims[0]
    fixed = _fixed_s1_operator_space(u)
    if len(fixed) >= d1 * d1:
        return CopiableFamilies((), only_trivial=False, degenerate_identity=True)
    # center of the fixed algebra: fixed elements commuting with all of it
    cols = []
    for idx, h in enumerate(fixed):
        comms = np.concatenate([(h @ g - g @ h).flatten() for g in fixed])
        cols.append(comms)
    m = np.column_stack([c for c in cols])
    # solve for real coefficient vectors x with sum_k x_k [H_k, G] = 0 for all G
    mr = np.vstack([m.real, m.imag])
    _, s, vh = np.linalg.svd(mr, full_matrices=True)
    nullity = sum(1 for k in range(len(fixed)) if k >= len(s) or s[k] < 1e-10)
    center = [
        sum(vh[len(fixed) - 1 - k][j] * fixed[j] for j in range(len(fixed)))
        for k in range(nullity)
    ]
    best: ProjectorSet | None = None
    for attempt in range(4):
        # deterministic generic element of the center
        coeffs = np.cos(np.arange(1, len(center) + 1) * (1.7 + attempt))
        g = sum(c * h for c, h in zip(coeffs, center))
        g = (g + dagger(g)) / 2
        evals, evecs = np.linalg.eigh(g)
        projs = []
        start = 0
        for k in range(1, d1 + 1):
            if k == d1 or evals[k] - evals[k - 1] > 1e-7:
                vecs = evecs[:, start:k]
                projs.append(vecs @ dagger(vecs))
                start = k
        try:
            family = ProjectorSet(tuple(projs))
        except Exception:
            continue
        i2 = np.eye(u.layout.factor_dims[1], dtype=complex)
        ok = all(
            max_abs(dagger(u.mat) @ np.kron(p, i2) @ u.mat - np.kron(p, i2)) <= 1e-9
            for p in family.projectors
        )
        if ok and (best is None or len(family) > len(best)):
            best = family
    if best is None:
        best = ProjectorSet((np.eye(d1, dtype=complex),))
    return CopiableFamilies(
        (best,), only_trivial=len(best) == 1, degenerate_identity=False
    )


# ---------------------------------------------------------------------------
# Demonstrations: no-cloning and branch decomposition


def no_cloning_demo(
    source_states, copier: CopyInteraction, blank: np.ndarray
) -> list[float]:
    """Fidelity of the copier output against an exact product clone.

    For source |psi> = sum_a c_a |a> the intended clone is
    |psi> x normalize(sum_a c_a |beta_a>) where |beta_a> is the pointer
    state the interaction writes on S2 for branch a.
    """
    if any(r != 1 for r in copier.proj1.ranks()):
        raise UsageError("no-cloning demo needs rank-1 projectors on S1")
    d2 = copier.proj2.dim
    blank = np.asarray(blank, dtype=complex).reshape(-1)
    blank = blank / np.linalg.norm(blank)
    basis1, _ = _block_basis(copier.proj1)
    # per-branch target pointer state: U_a |blank> with U_a = sum_b e^{i phi_ab} P_2b
    betas = []
    for a in range(len(copier.proj1)):
        ua = np.zeros((d2, d2), dtype=complex)
        for b, pb in enumerate(copier.proj2.projectors):
            ua += np.exp(1j * copier.phases[a, b]) * pb
        betas.append(ua @ blank)
    fidelities = []
    for psi in source_states:
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        out = copier.unitary.mat @ np.kron(psi, blank)
        amps = dagger(basis1) @ psi
        clone = sum(amps[a] * betas[a] for a in range(len(betas)))
        nrm = np.linalg.norm(clone)
        if nrm < 1e-12:
            raise AnalysisError("intended clone state has zero norm")
        target = np.kron(psi, clone / nrm)
        fidelities.append(float(np.abs(np.vdot(target, out)) ** 2))
    return fidelities


@dataclass(frozen=True)
class Branch:
    label: object
    weight: float
    state: DensityMatrix


@dataclass(frozen=True)
class BranchDecomposition:
    branches: tuple[Branch, ...]
    # largest cross-sector coherence visible to either subsystem alone
    cross_branch_norm_s1: float
    cross_branch_norm_s2: float
    evolved: DensityMatrix


def _merge_equivalent_labels(ci: CopyInteraction) -> list[tuple[tuple, np.ndarray]]:
    """Group S1 labels whose phase rows differ only by a constant.

    Such branches are never distinguished by the interaction, so they form
    a single sector; with all phases equal there is a single sector and no
    branching at all.
    """
    n1 = len(ci.proj1)
    groups: list[list[int]] = []
    for a in range(n1):
        placed = False
        for g in groups:
            ref = ci.phases[g[0], :] - ci.phases[a, :]
            if _phase_spread(ref) <= 1e-9 or max_abs(np.exp(1j * ref) - np.exp(1j * ref[0])) <= 1e-9:
                g.append(a)
                placed = True
                break
        if not placed:
            groups.append([a])
    out = []
    for g in groups:
        proj = sum(ci.proj1.projectors[a] for a in g)
        label = tuple(ci.proj1.labels[a] for a in g)
        out.append((label if len(label) > 1 else label[0], proj))
    return out


def branch_decomposition(
    rho_initial: DensityMatrix, ci: CopyInteraction
) -> BranchDecomposition:
    """Evolve, then split into non-interfering sectors of the copied labels."""
    rho_out = evolve_state(
        DensityMatrix(ci.layout, rho_initial.mat), ci.unitary
    )
    sectors = _merge_equivalent_labels(ci)
    d2 = ci.proj2.dim
    i2 = np.eye(d2, dtype=complex)
    lifted = [(label, np.kron(p, i2)) for label, p in sectors]
    branches = []
    for label, q in lifted:
        block = q @ rho_out.mat @ q
        w = float(np.trace(block).real)
        if w > 1e-12:
            branches.append(Branch(label, w, DensityMatrix(ci.layout, block / w)))
    # interference visible on S1 alone: trace out S2 from each cross block
    cross1 = 0.0
    dims = ci.layout.factor_dims
    for i in range(len(lifted)):
        for j in range(len(lifted)):
            if i == j:
                continue
            block = lifted[i][1] @ rho_out.mat @ lifted[j][1]
            reduced = np.einsum("ikjk->ij", block.reshape(dims + dims))
            cross1 = max(cross1, max_abs(reduced))
    # interference visible on S2 alone, blocks taken in the copied basis of S2
    report = analyze_copy(ci)
    cross2 = 0.0
    if report.copied_into_2:
        basis2, groups2 = _block_basis(ci.proj2)
        rho2 = partial_trace_matrix(rho_out.mat, dims, keep=(1,))
        rho2_blocks = dagger(basis2) @ rho2 @ basis2
        for c in range(len(groups2)):
            for d in range(len(groups2)):
                if c == d:
                    continue
                sub = rho2_blocks[np.ix_(groups2[c], groups2[d])]
                cross2 = max(cross2, max_abs(sub))
    return BranchDecomposition(tuple(branches), cross1, cross2, rho_out)


def partial_trace_matrix(mat: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    """Partial trace on a raw matrix, bypassing DensityMatrix validation."""
    n = len(dims)
    t = mat.reshape(dims + dims)
    row = [chr(ord("a") + i) for i in range(n)]
    col = [chr(ord("a") + n + i) if i in keep else row[i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = int(np.prod([dims[i] for i in keep]))
    return reduced.reshape(d, d)
