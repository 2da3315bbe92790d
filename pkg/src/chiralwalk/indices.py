"""Finite-dimensional index computations for chiral unitaries.

Every operation works on dense complex matrices.  Kernels are found by
SVD with a relative rank threshold; graded quantities are signatures of
the chiral symmetry compressed to a kernel, with eigenvalues required
to sit near +-1 (an eigenvalue inside (-1/2, 1/2) signals a rank
misclassification and raises instead of silently averaging).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import PreconditionError

DEFAULT_RANK_TOL = 1e-8
RELATION_TOL = 1e-10
SIGNATURE_GAP = 0.5


def _as_complex(m):
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise PreconditionError("expected a 2d matrix")
    if not np.all(np.isfinite(a)):
        raise PreconditionError("matrix entries must be finite")
    return a


def check_unitary(u, tol=RELATION_TOL, name="U"):
    u = _as_complex(u)
    dev = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() if u.size else 0.0
    if dev > tol:
        raise PreconditionError(f"{name} deviates from unitarity by {dev:.3e}")
    return u


def check_selfadjoint_unitary(g, tol=RELATION_TOL, name="Gamma0"):
    g = check_unitary(g, tol, name)
    dev = np.abs(g - g.conj().T).max() if g.size else 0.0
    if dev > tol:
        raise PreconditionError(f"{name} deviates from self-adjointness by {dev:.3e}")
    return g


def check_chiral_relation(u, gamma0, tol=RELATION_TOL):
    dev = np.abs(gamma0 @ u @ gamma0 - u.conj().T).max() if u.size else 0.0
    if dev > tol:
        raise PreconditionError(f"chiral relation G0 U G0 = U* fails by {dev:.3e}")


def check_projection(p, tol=RELATION_TOL, name="P"):
    p = _as_complex(p)
    dev = max(
        np.abs(p - p.conj().T).max() if p.size else 0.0,
        np.abs(p @ p - p).max() if p.size else 0.0,
    )
    if dev > tol:
        raise PreconditionError(f"{name} deviates from an orthogonal projection by {dev:.3e}")
    return p


@dataclass
class KernelSummary:
    """Orthonormal kernel basis with diagnostics and optional graded signature."""

    dimension: int
    basis: np.ndarray                    # columns orthonormal
    rank_tolerance_used: float
    singular_values_near_zero: list = field(default_factory=list)
    borderline_singular_values: list = field(default_factory=list)
    graded_signature: int | None = None
    site_window: tuple | None = None     # set by the lattice oracle only

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "graded_signature": self.graded_signature,
            "rank_tolerance_used": self.rank_tolerance_used,
            "singular_values_near_zero": [float(s) for s in self.singular_values_near_zero],
            "borderline_singular_values": [float(s) for s in self.borderline_singular_values],
        }


def kernel_basis(matrix, rank_tol=DEFAULT_RANK_TOL, gamma0=None):
    """Orthonormal basis of the numerical null space of ``matrix``.

    Singular values below rank_tol * sigma_max count as zero (absolute
    floor 1e-12 when sigma_max vanishes).  With ``gamma0`` supplied the
    graded signature of the kernel is attached.
    """
    m = _as_complex(matrix)
    rows, cols = m.shape
    if cols == 0 or rows == 0:
        summary = KernelSummary(cols, np.eye(cols, dtype=complex), float(rank_tol))
    else:
        _, svals, vh = np.linalg.svd(m, full_matrices=True)
        sigma_max = svals[0] if svals.size else 0.0
        # absolute floor keeps numerically-zero matrices fully in the kernel
        threshold = max(rank_tol * sigma_max, 1e-12)
        padded = np.concatenate([svals, np.zeros(cols - svals.size)])
        basis = vh.conj().T[:, padded < threshold]
        summary = KernelSummary(
            dimension=int(basis.shape[1]),
            basis=basis,
            rank_tolerance_used=float(rank_tol),
            singular_values_near_zero=[float(s) for s in padded if s < 10 * threshold],
            borderline_singular_values=[
                float(s) for s in padded if threshold <= s < 10 * threshold
            ],
        )
    if gamma0 is not None:
        summary.graded_signature = graded_signature(summary.basis, gamma0)
    return summary


def graded_signature(basis, gamma0):
    """Signature of gamma0 compressed to the span of the given orthonormal columns.

    The compression of a self-adjoint unitary to an invariant subspace has
    eigenvalues at +-1; anything inside (-1/2, 1/2) means the subspace is
    not gamma0-invariant at this tolerance.
    """
    if basis.shape[1] == 0:
        return 0
    g = _as_complex(gamma0)
    compressed = basis.conj().T @ g @ basis
    evals = np.linalg.eigvalsh(0.5 * (compressed + compressed.conj().T))
    if np.any(np.abs(evals) < SIGNATURE_GAP):
        raise PreconditionError(
            "kernel not Gamma0-invariant within tolerance: compressed eigenvalue "
            f"{evals[np.argmin(np.abs(evals))]:.3f} inside (-1/2, 1/2); "
            "rank tolerance likely misclassified a singular value"
        )
    return int(np.sum(evals > SIGNATURE_GAP) - np.sum(evals < -SIGNATURE_GAP))


def _grading_frames(gamma0, tol=RELATION_TOL):
    """Orthonormal bases (V_plus, V_minus) of the +-1 eigenspaces of gamma0."""
    g = check_selfadjoint_unitary(gamma0, tol)
    evals, vecs = np.linalg.eigh(g)
    return vecs[:, evals > 0], vecs[:, evals < 0]


def symmetry_index_pm(u, gamma0, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """(si_plus, si_minus): graded signatures of Ker(U -+ 1)."""
    u = check_unitary(u, tol)
    g = check_selfadjoint_unitary(gamma0, tol)
    check_chiral_relation(u, g, tol)
    eye = np.eye(u.shape[0])
    si_plus = kernel_basis(u - eye, rank_tol, g).graded_signature
    si_minus = kernel_basis(u + eye, rank_tol, g).graded_signature
    return si_plus, si_minus


def chiral_selfadjoint_index(q, gamma0, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """Graded signature of Ker(Q) for self-adjoint Q anticommuting with gamma0."""
    q = _as_complex(q)
    g = check_selfadjoint_unitary(gamma0, tol)
    if np.abs(q - q.conj().T).max() > tol:
        raise PreconditionError("Q must be self-adjoint")
    if np.abs(g @ q + q @ g).max() > tol:
        raise PreconditionError("Q must anticommute with Gamma0")
    return kernel_basis(q, rank_tol, g).graded_signature


def susy_index(u, gamma0, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """Fredholm index of the off-diagonal block of Im(U) = (U - U*)/2i."""
    u = check_unitary(u, tol)
    g = check_selfadjoint_unitary(gamma0, tol)
    check_chiral_relation(u, g, tol)
    q = (u - u.conj().T) / 2j
    v_plus, v_minus = _grading_frames(g, tol)
    q_plus = v_minus.conj().T @ q @ v_plus
    dim_ker = kernel_basis(q_plus, rank_tol).dimension
    dim_coker = kernel_basis(q_plus.conj().T, rank_tol).dimension
    return dim_ker - dim_coker


def tanaka_index_pm(u, gamma0, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """(ind_plus, ind_minus) from Re(U) restricted to the graded halves."""
    u = check_unitary(u, tol)
    g = check_selfadjoint_unitary(gamma0, tol)
    check_chiral_relation(u, g, tol)
    re_u = 0.5 * (u + u.conj().T)
    v_plus, v_minus = _grading_frames(g, tol)
    r1 = v_plus.conj().T @ re_u @ v_plus
    r2 = v_minus.conj().T @ re_u @ v_minus
    eye1 = np.eye(r1.shape[0])
    eye2 = np.eye(r2.shape[0])
    ind_plus = (
        kernel_basis(r1 - eye1, rank_tol).dimension
        - kernel_basis(r2 - eye2, rank_tol).dimension
    )
    ind_minus = (
        kernel_basis(r1 + eye1, rank_tol).dimension
        - kernel_basis(r2 + eye2, rank_tol).dimension
    )
    return ind_plus, ind_minus


def _intersection_dimension(constraints, rank_tol):
    """dim of the joint null space of the stacked constraint matrices."""
    stacked = np.vstack(constraints)
    return kernel_basis(stacked, rank_tol).dimension


def pair_index(p0, p1, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """dim(Ran P0 ^ Ker P1) - dim(Ker P0 ^ Ran P1)."""
    p0 = check_projection(p0, tol, "P0")
    p1 = check_projection(p1, tol, "P1")
    eye = np.eye(p0.shape[0])
    plus = _intersection_dimension([eye - p0, p1], rank_tol)
    minus = _intersection_dimension([p0, eye - p1], rank_tol)
    return plus - minus


def pair_index_trace(p0, p1, m=0):
    """Tr((P0 - P1)^(2m+1)); equals the pair index when both are projections."""
    p0 = _as_complex(p0)
    p1 = _as_complex(p1)
    power = np.linalg.matrix_power(p0 - p1, 2 * int(m) + 1)
    return float(np.trace(power).real)


@dataclass
class AdditivityReport:
    ind_01: int
    ind_12: int
    ind_02: int

    @property
    def holds(self):
        return self.ind_01 + self.ind_12 == self.ind_02


def pair_index_additivity_check(p0, p1, p2, rank_tol=DEFAULT_RANK_TOL):
    """Ind(P0,P1) + Ind(P1,P2) = Ind(P0,P2), unconditional in finite dimension."""
    return AdditivityReport(
        ind_01=pair_index(p0, p1, rank_tol),
        ind_12=pair_index(p1, p2, rank_tol),
        ind_02=pair_index(p0, p2, rank_tol),
    )


@dataclass
class KernelDecompositionReport:
    dim_ker_u_plus_one: int
    dim_ker_u_minus_one: int
    ranp0_kerp1: int
    kerp0_ranp1: int
    ranp0_ranp1: int
    kerp0_kerp1: int

    @property
    def holds(self):
        return (
            self.dim_ker_u_plus_one == self.ranp0_kerp1 + self.kerp0_ranp1
            and self.dim_ker_u_minus_one == self.ranp0_ranp1 + self.kerp0_kerp1
        )


def kernel_decomposition_check(u, gamma0, gamma1, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """Kernel dimensions of U -+ 1 against the four projection intersections."""
    u = check_unitary(u, tol)
    g0 = check_selfadjoint_unitary(gamma0, tol, "Gamma0")
    g1 = check_selfadjoint_unitary(gamma1, tol, "Gamma1")
    eye = np.eye(u.shape[0])
    p0 = 0.5 * (eye + g0)
    p1 = 0.5 * (eye + g1)
    return KernelDecompositionReport(
        dim_ker_u_plus_one=kernel_basis(u + eye, rank_tol).dimension,
        dim_ker_u_minus_one=kernel_basis(u - eye, rank_tol).dimension,
        ranp0_kerp1=_intersection_dimension([eye - p0, p1], rank_tol),
        kerp0_ranp1=_intersection_dimension([p0, eye - p1], rank_tol),
        ranp0_ranp1=_intersection_dimension([eye - p0, eye - p1], rank_tol),
        kerp0_kerp1=_intersection_dimension([p0, p1], rank_tol),
    )


@dataclass
class KernelBoundReport:
    dim_ker_u_plus_one: int
    dim_ker_u_minus_one: int
    pair_index_value: int
    pair_index_complement: int

    @property
    def holds(self):
        return (
            self.dim_ker_u_plus_one >= abs(self.pair_index_value)
            and self.dim_ker_u_minus_one >= abs(self.pair_index_complement)
        )


def kernel_bound_check(u, gamma0, gamma1, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """dim Ker(U + 1) >= |Ind(P0, P1)| and dim Ker(U - 1) >= |Ind(P0, 1 - P1)|."""
    u = check_unitary(u, tol)
    g0 = check_selfadjoint_unitary(gamma0, tol, "Gamma0")
    g1 = check_selfadjoint_unitary(gamma1, tol, "Gamma1")
    eye = np.eye(u.shape[0])
    p0 = 0.5 * (eye + g0)
    p1 = 0.5 * (eye + g1)
    return KernelBoundReport(
        dim_ker_u_plus_one=kernel_basis(u + eye, rank_tol).dimension,
        dim_ker_u_minus_one=kernel_basis(u - eye, rank_tol).dimension,
        pair_index_value=pair_index(p0, p1, rank_tol),
        pair_index_complement=pair_index(p0, eye - p1, rank_tol),
    )


def _cayley_signature(u, gamma0, rank_tol, tol):
    """Graded signature of Ker of the Cayley transform of u on Ran(1 - u)."""
    n = u.shape[0]
    if n == 0:
        return 0
    eye = np.eye(n)
    one_minus = eye - u
    w_full, svals, _ = np.linalg.svd(one_minus)
    sigma_max = svals[0] if svals.size else 0.0
    threshold = max(rank_tol * sigma_max, 1e-12)
    w = w_full[:, svals >= threshold]
    if w.shape[1] == 0:
        return 0
    a = w.conj().T @ one_minus @ w
    b = w.conj().T @ (1j * (eye + u)) @ w
    cayley = np.linalg.solve(a, b)
    cayley = 0.5 * (cayley + cayley.conj().T)
    g = w.conj().T @ gamma0 @ w
    dev_g = np.abs(g @ g - np.eye(w.shape[1])).max()
    if dev_g > 1e-8:
        raise PreconditionError(
            f"restriction not Gamma0-invariant within tolerance (deviation {dev_g:.3e})"
        )
    anti = np.abs(g @ cayley + cayley @ g).max()
    scale = max(1.0, np.abs(cayley).max())
    if anti > 1e-6 * scale:
        raise PreconditionError(
            f"Cayley transform fails to anticommute with Gamma0 (deviation {anti:.3e})"
        )
    return kernel_basis(cayley, rank_tol, g).graded_signature


def cayley_index(u, gamma0, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """(minus-class, plus-class) indices from the Cayley transforms of U and -U.

    The first entry is the graded signature of Ker C(U) (eigenvalue -1
    data of U), the second that of Ker C(-U) (eigenvalue +1 data).
    """
    u = check_unitary(u, tol)
    g = check_selfadjoint_unitary(gamma0, tol)
    check_chiral_relation(u, g, tol)
    minus_class = _cayley_signature(u, g, rank_tol, tol)
    plus_class = _cayley_signature(-u, g, rank_tol, tol)
    return minus_class, plus_class


def generator_index(hamiltonian, gamma0, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """Graded signature of Ker(H), cross-checked against si_plus(e^{i pi H}).

    H must be self-adjoint and anticommute with gamma0; ||H|| > 1 is
    flattened to H(1 + H^2)^(-1/2) first (same kernel).
    """
    h = _as_complex(hamiltonian)
    g = check_selfadjoint_unitary(gamma0, tol)
    if np.abs(h - h.conj().T).max() > tol:
        raise PreconditionError("generator must be self-adjoint")
    if np.abs(g @ h + h @ g).max() > tol:
        raise PreconditionError("generator must anticommute with Gamma0")
    evals, vecs = np.linalg.eigh(h)
    if evals.size and np.abs(evals).max() > 1.0 + 1e-12:
        evals = evals / np.sqrt(1.0 + evals**2)
        h = (vecs * evals) @ vecs.conj().T
    index = kernel_basis(h, rank_tol, g).graded_signature
    walk = (vecs * np.exp(1j * np.pi * evals)) @ vecs.conj().T
    si_plus, _ = symmetry_index_pm(walk, g, rank_tol, tol)
    if si_plus != index:
        raise PreconditionError(
            f"generator index {index} disagrees with si_plus(e^(i pi H)) = {si_plus}; "
            "rank tolerance likely misclassified an eigenvalue"
        )
    return index


@dataclass
class IndexReport:
    """All finite-dimensional indices of one chiral unitary, plus diagnostics."""

    si_plus: int | None = None
    si_minus: int | None = None
    si_total: int | None = None
    susy_index: int | None = None
    tanaka_plus: int | None = None
    tanaka_minus: int | None = None
    pair_index: int | None = None
    pair_index_complement: int | None = None
    cayley_minus: int | None = None
    cayley_plus: int | None = None
    trace_gamma0: int | None = None
    certifications: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def identity_chain_values(self):
        return {
            "si_total": self.si_total,
            "susy_index": self.susy_index,
            "tanaka_total": None
            if self.tanaka_plus is None
            else self.tanaka_plus + self.tanaka_minus,
            "pair_total": None
            if self.pair_index is None
            else self.pair_index + self.pair_index_complement,
            "trace_gamma0": self.trace_gamma0,
        }

    @property
    def consistent(self):
        chain = [v for v in self.identity_chain_values().values() if v is not None]
        comp_minus = {
            v
            for v in (self.si_minus, self.tanaka_minus, self.pair_index, self.cayley_minus)
            if v is not None
        }
        comp_plus = {
            v
            for v in (self.si_plus, self.tanaka_plus, self.pair_index_complement, self.cayley_plus)
            if v is not None
        }
        return len(set(chain)) <= 1 and len(comp_minus) <= 1 and len(comp_plus) <= 1

    def to_dict(self):
        return {
            "si_plus": self.si_plus,
            "si_minus": self.si_minus,
            "si_total": self.si_total,
            "susy_index": self.susy_index,
            "tanaka_plus": self.tanaka_plus,
            "tanaka_minus": self.tanaka_minus,
            "pair_index": self.pair_index,
            "pair_index_complement": self.pair_index_complement,
            "cayley_minus": self.cayley_minus,
            "cayley_plus": self.cayley_plus,
            "trace_gamma0": self.trace_gamma0,
            "consistent": self.consistent,
            "certifications": self.certifications,
            "tolerances": self.tolerances,
            "diagnostics": self.diagnostics,
        }


def full_index_report(u, gamma0, gamma1=None, rank_tol=DEFAULT_RANK_TOL, tol=RELATION_TOL):
    """Evaluate every index of the summary table for one finite chiral unitary."""
    u = check_unitary(u, tol)
    g0 = check_selfadjoint_unitary(gamma0, tol)
    check_chiral_relation(u, g0, tol)
    if gamma1 is None:
        gamma1 = g0 @ u
    g1 = check_selfadjoint_unitary(gamma1, tol, "Gamma1")
    eye = np.eye(u.shape[0])
    p0 = 0.5 * (eye + g0)
    p1 = 0.5 * (eye + g1)
    ker_plus = kernel_basis(u - eye, rank_tol, g0)
    ker_minus = kernel_basis(u + eye, rank_tol, g0)
    tanaka_plus, tanaka_minus = tanaka_index_pm(u, g0, rank_tol, tol)
    cayley_minus, cayley_plus = cayley_index(u, g0, rank_tol, tol)
    trace = float(np.trace(g0).real)
    if abs(trace - round(trace)) > 1e-6:
        raise PreconditionError(f"Tr(Gamma0) = {trace} is not near an integer")
    return IndexReport(
        si_plus=ker_plus.graded_signature,
        si_minus=ker_minus.graded_signature,
        si_total=ker_plus.graded_signature + ker_minus.graded_signature,
        susy_index=susy_index(u, g0, rank_tol, tol),
        tanaka_plus=tanaka_plus,
        tanaka_minus=tanaka_minus,
        pair_index=pair_index(p0, p1, rank_tol),
        pair_index_complement=pair_index(p0, eye - p1, rank_tol),
        cayley_minus=cayley_minus,
        cayley_plus=cayley_plus,
        trace_gamma0=int(round(trace)),
        certifications={"finite_dimensional": True},
        tolerances={"rank_tol": rank_tol, "relation_tol": tol},
        diagnostics={
            "borderline_singular_values": sorted(
                ker_plus.borderline_singular_values + ker_minus.borderline_singular_values
            ),
            "dim_ker_u_minus_one": ker_plus.dimension,
            "dim_ker_u_plus_one": ker_minus.dimension,
        },
    )
