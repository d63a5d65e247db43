"""Entropy accounting for knowledge-bearing bipartite systems.

Covers von Neumann entropy (base 2), free energy, classically-correlated
knowledge states, projective decoherence and its entropy inequality, and
selection processes that rotate the knowledge basis into an orthonormal
theta-family, with the per-subsystem entropy change they induce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import UsageError, ValidationError
from .operator_core import (
    TAU_ORTH,
    TAU_PSD,
    DensityMatrix,
    ProjectorSet,
    SubsystemLayout,
    as_matrix,
    dagger,
    hermitian_eigendecomposition,
    max_abs,
    partial_trace,
)

EIGENVALUE_CLAMP = 1e-12


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S(rho) = -tr(rho log2 rho), in bits."""
    evals = np.linalg.eigvalsh(rho.mat)
    if evals.min() < -TAU_PSD:
        raise ValidationError(f"state has eigenvalue {evals.min()} < 0")
    evals = np.clip(evals, 0.0, None)
    nz = evals[evals > EIGENVALUE_CLAMP]
    return float(-np.sum(nz * np.log2(nz)))


@dataclass(frozen=True)
class FreeEnergyParams:
    energy: float
    temperature: float
    entropy: float

    def __post_init__(self):
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")


def free_energy(params: FreeEnergyParams) -> float:
    """F = E - T*S."""
    return params.energy - params.temperature * params.entropy


# ---------------------------------------------------------------------------
# Knowledge states


@dataclass(frozen=True)
class KnowledgeState:
    """Classically correlated bipartite state sum_ab p_ab |a><a| x |b><b|."""

    p_ab: np.ndarray
    basis1: np.ndarray  # columns: the |a> vectors
    basis2: np.ndarray  # columns: the |b> vectors
    layout: SubsystemLayout

    def __post_init__(self):
        p = np.asarray(self.p_ab, dtype=float)
        if p.ndim != 2 or np.any(p < -1e-12):
            raise ValidationError("weights must form a nonnegative matrix")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValidationError(f"weights sum to {p.sum()}, expected 1")
        d1, d2 = self.layout.factor_dims
        b1 = np.asarray(self.basis1, dtype=complex)
        b2 = np.asarray(self.basis2, dtype=complex)
        if b1.shape != (d1, p.shape[0]) or b2.shape != (d2, p.shape[1]):
            raise ValidationError("basis shapes do not match weights and layout")
        for b in (b1, b2):
            if max_abs(dagger(b) @ b - np.eye(b.shape[1])) > TAU_ORTH:
                raise ValidationError("knowledge basis is not orthonormal")
        object.__setattr__(self, "p_ab", p)

    def realized_density(self) -> DensityMatrix:
        d = self.layout.total_dim
        out = np.zeros((d, d), dtype=complex)
        for a in range(self.p_ab.shape[0]):
            for b in range(self.p_ab.shape[1]):
                ket = np.kron(self.basis1[:, a], self.basis2[:, b])
                out += self.p_ab[a, b] * np.outer(ket, ket.conj())
        return DensityMatrix(self.layout, out)


def build_knowledge_state(p_ab: np.ndarray, dims: tuple[int, int]) -> KnowledgeState:
    """Knowledge state over the computational bases of the two factors."""
    p = np.asarray(p_ab, dtype=float)
    d1, d2 = int(dims[0]), int(dims[1])
    if p.shape[0] > d1 or p.shape[1] > d2:
        raise ValidationError(f"weight shape {p.shape} exceeds dims {dims}")
    b1 = np.eye(d1, dtype=complex)[:, : p.shape[0]]
    b2 = np.eye(d2, dtype=complex)[:, : p.shape[1]]
    return KnowledgeState(p, b1, b2, SubsystemLayout((d1, d2)))


# ---------------------------------------------------------------------------
# Theta families and xi rotations


@dataclass(frozen=True)
class ThetaFamily:
    """Orthonormal family |theta_ab> = sum_cd lambda_abcd |c>|d| with real lambda."""

    lam: np.ndarray  # shape (na, nb, d1, d2)

    def __post_init__(self):
        lam = np.asarray(self.lam)
        if lam.ndim != 4:
            raise ValidationError("lambda must be a 4-index array")
        if np.iscomplexobj(lam) and max_abs(lam.imag) > 1e-12:
            raise ValidationError("lambda must be real")
        lam = np.asarray(lam.real if np.iscomplexobj(lam) else lam, dtype=float)
        na, nb, d1, d2 = lam.shape
        flat = lam.reshape(na * nb, d1 * d2)
        gram = flat @ flat.T
        if max_abs(gram - np.eye(na * nb)) > TAU_ORTH:
            raise ValidationError("theta family is not orthonormal")
        object.__setattr__(self, "lam", lam)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.lam.shape

    def vectors(self, basis1: np.ndarray, basis2: np.ndarray) -> np.ndarray:
        """theta vectors as columns, in (a, b) row-major order."""
        na, nb, d1, d2 = self.lam.shape
        cols = []
        for a in range(na):
            for b in range(nb):
                ket = np.einsum("cd,ic,jd->ij", self.lam[a, b], basis1, basis2)
                cols.append(ket.reshape(-1))
        return np.column_stack(cols)

    @staticmethod
    def ideal(dims: tuple[int, int]) -> "ThetaFamily":
        d1, d2 = dims
        lam = np.zeros((d1, d2, d1, d2))
        for a in range(d1):
            for b in range(d2):
                lam[a, b, a, b] = 1.0
        return ThetaFamily(lam)


@dataclass(frozen=True)
class XiRotation:
    """Real orthogonal xi_cd defining projectors |nu_c><nu_c|."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim != 2 or xi.shape[0] != xi.shape[1]:
            raise ValidationError("xi must be a square real matrix")
        if max_abs(xi @ xi.T - np.eye(xi.shape[0])) > TAU_ORTH:
            raise ValidationError("xi rows are not orthonormal")
        object.__setattr__(self, "xi", xi)

    def nu_projectors(self) -> ProjectorSet:
        projs = tuple(np.outer(row, row).astype(complex) for row in self.xi)
        return ProjectorSet(projs)


# ---------------------------------------------------------------------------
# Decoherence


def projective_decoherence(rho: DensityMatrix, ps: ProjectorSet) -> DensityMatrix:
    """sum_c P_c rho P_c: kills coherences between the blocks of ps."""
    if ps.dim != rho.dim:
        raise ValidationError(f"projector dim {ps.dim} != state dim {rho.dim}")
    out = np.zeros_like(np.asarray(rho.mat))
    for p in ps.projectors:
        out += p @ rho.mat @ p
    return DensityMatrix(rho.layout, out)


def entropy_after_decoherence_geq(
    rho: DensityMatrix, ps: ProjectorSet
) -> tuple[float, float, float]:
    """(S_before, S_after, margin); margin >= 0 up to rounding, always."""
    s_before = von_neumann_entropy(rho)
    s_after = von_neumann_entropy(projective_decoherence(rho, ps))
    return s_before, s_after, s_after - s_before


def _canonical_eigenbasis(
    m: np.ndarray, cluster_tol: float = 1e-9
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Eigenbasis with degenerate subspaces fixed by a reference observable.

    Inside each degenerate eigenspace the basis is rotated to diagonalize
    diag(0, 1, ..., d-1); returns (eigenvalues, basis columns, degenerate?).
    """
    evals, evecs = hermitian_eigendecomposition(m)
    d = m.shape[0]
    ref = np.diag(np.arange(d, dtype=float))
    degenerate = False
    start = 0
    vecs = np.array(evecs, dtype=complex)
    for k in range(1, d + 1):
        if k == d or evals[k] - evals[k - 1] > cluster_tol:
            if k - start > 1:
                degenerate = True
                w = vecs[:, start:k]
                _, rot = np.linalg.eigh(dagger(w) @ ref @ w)
                vecs[:, start:k] = w @ rot
            start = k
    return evals, vecs, degenerate


@dataclass(frozen=True)
class FormTestResult:
    is_knowledge_form: bool
    residual: float
    degenerate_marginals: bool
    basis1: np.ndarray
    basis2: np.ndarray


def knowledge_form_test(rho: DensityMatrix) -> FormTestResult:
    """Is rho invariant under dephasing in both marginal eigenbases?

    That invariance is the operational certificate that rho is a
    classically-correlated knowledge state.  Degenerate marginals leave
    the eigenbasis non-unique; the test then uses the canonical choice and
    flags the degeneracy in the result.
    """
    if rho.layout.n_factors != 2:
        raise UsageError("knowledge-form test needs a bipartite layout")
    rho1 = partial_trace(rho, (0,))
    rho2 = partial_trace(rho, (1,))
    _, b1, deg1 = _canonical_eigenbasis(rho1.mat)
    _, b2, deg2 = _canonical_eigenbasis(rho2.mat)
    # rank-1 product dephasing in the (canonical) marginal eigenbases
    product_basis = np.kron(b1, b2)
    coeffs = dagger(product_basis) @ rho.mat @ product_basis
    dephased = product_basis @ np.diag(np.diag(coeffs)) @ dagger(product_basis)
    residual = max_abs(rho.mat - dephased)
    return FormTestResult(residual <= 1e-9, residual, deg1 or deg2, b1, b2)


# ---------------------------------------------------------------------------
# Selection processes


@dataclass(frozen=True)
class SelectionReport:
    rho_t2: DensityMatrix
    rho1_t1: DensityMatrix
    rho2_t1: DensityMatrix
    rho1_t2: DensityMatrix
    rho2_t2: DensityMatrix
    s1_t1: float
    s2_t1: float
    s1_t2: float
    s2_t2: float
    ds1: float
    ds2: float
    s_global: float
    formula_residual: float  # index-formula marginals vs partial trace


def apply_selection_process(ks: KnowledgeState, theta: ThetaFamily) -> SelectionReport:
    """Run the selection rho(t2) = sum_ab p_ab |theta_ab><theta_ab|.

    Reduced states at t2 are computed both from the lambda index formula
    and by partial trace; the report carries the residual between the two.
    Global entropy is unchanged because the weights are carried onto an
    orthonormal family.
    """
    na, nb = ks.p_ab.shape
    tna, tnb, d1, d2 = theta.shape
    if (tna, tnb) != (na, nb) or (d1, d2) != ks.layout.factor_dims:
        raise ValidationError(
            f"theta shape {theta.shape} incompatible with weights {ks.p_ab.shape} "
            f"and layout {ks.layout.factor_dims}"
        )
    # theta vectors need full marginal bases; extend the knowledge bases
    b1 = _complete_basis(ks.basis1, d1)
    b2 = _complete_basis(ks.basis2, d2)
    vecs = theta.vectors(b1, b2)
    d = ks.layout.total_dim
    rho2_mat = np.zeros((d, d), dtype=complex)
    for a in range(na):
        for b in range(nb):
            v = vecs[:, a * nb + b]
            rho2_mat += ks.p_ab[a, b] * np.outer(v, v.conj())
    rho_t2 = DensityMatrix(ks.layout, rho2_mat)
    rho_t1 = ks.realized_density()
    rho1_t1 = partial_trace(rho_t1, (0,))
    rho2_t1 = partial_trace(rho_t1, (1,))
    rho1_t2 = partial_trace(rho_t2, (0,))
    rho2_t2 = partial_trace(rho_t2, (1,))
    # index-formula marginals, in the extended bases
    lam = theta.lam
    m1 = np.einsum("ab,abcd,abed->ce", ks.p_ab, lam, lam)
    m2 = np.einsum("ab,abcd,abcf->df", ks.p_ab, lam, lam)
    f1 = b1 @ m1 @ dagger(b1)
    f2 = b2 @ m2 @ dagger(b2)
    formula_residual = max(max_abs(f1 - rho1_t2.mat), max_abs(f2 - rho2_t2.mat))
    s1_t1 = von_neumann_entropy(rho1_t1)
    s2_t1 = von_neumann_entropy(rho2_t1)
    s1_t2 = von_neumann_entropy(rho1_t2)
    s2_t2 = von_neumann_entropy(rho2_t2)
    return SelectionReport(
        rho_t2=rho_t2,
        rho1_t1=rho1_t1,
        rho2_t1=rho2_t1,
        rho1_t2=rho1_t2,
        rho2_t2=rho2_t2,
        s1_t1=s1_t1,
        s2_t1=s2_t1,
        s1_t2=s1_t2,
        s2_t2=s2_t2,
        ds1=s1_t2 - s1_t1,
        ds2=s2_t2 - s2_t1,
        s_global=von_neumann_entropy(rho_t2),
        formula_residual=formula_residual,
    )


def _complete_basis(partial: np.ndarray, dim: int) -> np.ndarray:
    """Extend orthonormal columns to a full orthonormal basis of C^dim."""
    if partial.shape[1] == dim:
        return partial
    q, _ = np.linalg.qr(
        np.column_stack([partial, np.eye(dim, dtype=complex)])
    )
    # keep the original columns exactly, append the new directions
    extra = []
    proj = partial @ dagger(partial)
    for k in range(q.shape[1]):
        v = q[:, k] - proj @ q[:, k]
        for e in extra:
            v = v - np.vdot(e, v) * e
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            extra.append(v / nrm)
        if partial.shape[1] + len(extra) == dim:
            break
    return np.column_stack([partial] + extra)


def perturb_selection(
    dims: tuple[int, int], epsilon: float, rng: np.random.Generator
) -> ThetaFamily:
    """Imperfect selection: rotate the ideal family by exp(epsilon * G).

    G is a random real antisymmetric generator with unit spectral norm, so
    epsilon is a severity dial and epsilon = 0 recovers the ideal family.
    """
    if epsilon < 0:
        raise UsageError(f"epsilon must be >= 0, got {epsilon}")
    d1, d2 = int(dims[0]), int(dims[1])
    d = d1 * d2
    if epsilon == 0:
        return ThetaFamily.ideal((d1, d2))
    g = rng.standard_normal((d, d))
    g = g - g.T
    g = g / np.linalg.norm(g, 2)
    r = scipy.linalg.expm(epsilon * g)
    # column (a*d2 + b) of r is theta_ab in the computational product basis
    lam = r.T.reshape(d1, d2, d1, d2)
    return ThetaFamily(lam)


def relabeling_counterexample() -> tuple[KnowledgeState, ThetaFamily]:
    """Two-qubit fixture where a perfect relabeling lowers marginal entropy.

    Weights diag(1/2, 1/2) with |00> -> |00>, |11> -> |01| move one full
    bit out of subsystem 1, so the post-selection marginal entropy drops
    by exactly 1 bit: the concluding inequality is conditional, not
    universal over orthonormal theta-families.
    """
    ks = build_knowledge_state(np.diag([0.5, 0.5]), (2, 2))
    lam = np.zeros((2, 2, 2, 2))
    lam[0, 0, 0, 0] = 1.0  # |00> -> |00>
    lam[1, 1, 0, 1] = 1.0  # |11> -> |01>
    lam[0, 1, 1, 0] = 1.0  # filler branches with zero weight
    lam[1, 0, 1, 1] = 1.0
    return ks, ThetaFamily(lam)
