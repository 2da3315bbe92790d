"""Winding numbers of symbol loops and the double-sided index check.

winding_det unwinds the phase of det F(z) around the circle with a
step-size guard; nc_winding integrates the normalized logarithmic
derivative and returns an exact rational with denominator equal to the
fiber dimension.  chiral_flat_band_symbol compresses the spectral
flattening of the Cayley transform of a chiral symbol to a unitary loop
between the graded halves, with compression frames propagated
continuously around the circle (closure holonomy recorded and folded
into the winding).

Orientation: throughout the package, kernel-count indices are oriented
so that an operator equal to 1 far to the left and to the forward shift
far to the right has index +1, which matches winding(right symbol)
minus winding(left symbol).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from . import operators as ops
from .exceptions import (
    FramePropagationError,
    NotFredholmError,
    PreconditionError,
    WindingUnresolvedError,
)
from .operators import circle_grid
from .transfer import exact_index, exact_kernel

MAX_GRID_N = 2**16
DET_FLOOR = 1e-10


@dataclass
class WindingResult:
    raw_phase: float        # accumulated argument of det / 2 pi
    rounded: int
    max_step_phase: float
    grid_n: int

    def to_dict(self):
        return {
            "raw_phase": self.raw_phase,
            "rounded": self.rounded,
            "max_step_phase": self.max_step_phase,
            "grid_n": self.grid_n,
        }


def _phase_unwind(dets):
    """Total unwound argument along a closed sample sequence (last = first)."""
    ratios = dets[1:] / dets[:-1]
    steps = np.angle(ratios)
    return float(np.sum(steps)), float(np.abs(steps).max()) if steps.size else 0.0


def winding_det(loop, grid_n=256):
    """Winding number of det(loop) by phase unwinding with automatic refinement."""
    n = int(grid_n)
    while True:
        zs = circle_grid(n)
        dets = np.linalg.det(loop(zs))
        if np.abs(dets).min() <= DET_FLOOR:
            raise NotFredholmError("loop not invertible: |det| dips below 1e-10 on the grid")
        closed = np.concatenate([dets, dets[:1]])
        total, max_step = _phase_unwind(closed)
        if max_step < np.pi / 2:
            break
        if n >= MAX_GRID_N:
            raise WindingUnresolvedError("winding unresolved: refinement cap reached")
        n *= 2
    raw = total / (2.0 * np.pi)
    rounded = int(round(raw))
    if abs(raw - rounded) >= 0.25:
        raise WindingUnresolvedError(
            f"winding unresolved: raw phase {raw:.6f} is not near an integer"
        )
    return WindingResult(raw_phase=raw, rounded=rounded, max_step_phase=max_step, grid_n=n)


def nc_winding(loop, grid_n=4096):
    """Normalized-trace winding (1/2 pi i) * integral of tau(F^-1 F') dz.

    tau is the matrix trace divided by the fiber dimension d; the exact
    Laurent derivative is used.  Returns a Fraction with denominator d
    after checking agreement with the determinant winding.
    """
    d = loop.fiber_dim
    det_result = winding_det(loop, min(grid_n, 4096))
    deriv = loop.derivative()
    n = int(grid_n)
    while True:
        zs = circle_grid(n)
        values = loop(zs)
        dvalues = deriv(zs)
        traces = np.trace(np.linalg.solve(values, dvalues), axis1=1, axis2=2) / d
        raw = complex(np.mean(traces * zs))
        target = det_result.rounded / d
        if abs(raw.real - target) < 1e-8 and abs(raw.imag) < 1e-8:
            break
        if n >= MAX_GRID_N:
            raise WindingUnresolvedError(
                f"nc winding {raw:.3e} did not converge to det winding / d = {target}"
            )
        n *= 2
    return Fraction(det_result.rounded, d)


# --- compressed chiral loops --------------------------------------------------


@dataclass
class SampledLoop:
    """Closed sampled loop of compressed blocks with frame holonomy data.

    samples[k] is the block at z_k for k = 0..N with z_N = z_0 in the
    frames obtained by continuity propagation; holonomy_plus/minus are
    the frame mismatches after one full cycle.
    """

    fiber_dim: int
    samples: np.ndarray
    holonomy_plus: np.ndarray
    holonomy_minus: np.ndarray
    side: str
    grid_n: int

    def winding(self):
        """Winding of det(samples) with the holonomy phases folded in."""
        dets = np.linalg.det(self.samples)
        if np.abs(dets).min() <= DET_FLOOR:
            raise NotFredholmError("compressed loop not invertible on the grid")
        total, max_step = _phase_unwind(dets)
        if max_step >= np.pi / 2:
            raise WindingUnresolvedError(
                "compressed loop too coarse: increase grid_n"
            )
        correction = float(
            np.angle(np.linalg.det(self.holonomy_minus))
            - np.angle(np.linalg.det(self.holonomy_plus))
        )
        raw = (total + correction) / (2.0 * np.pi)
        rounded = int(round(raw))
        if abs(raw - rounded) >= 0.25:
            raise WindingUnresolvedError(
                f"compressed winding {raw:.6f} is not near an integer"
            )
        return WindingResult(
            raw_phase=raw, rounded=rounded, max_step_phase=max_step, grid_n=self.grid_n
        )


def _spectral_flatten(u_mat, cayley_sign, tol=1e-8):
    """Sign of the Cayley transform of (cayley_sign * u) via the spectrum of u.

    Eigenvalues of the unitary u on the upper half circle map to -1, on
    the lower half to +1 (the limit of any normalizing function applied
    to i(1+u)(1-u)^-1).  Eigenvalues at +-1 abort: no gap, no loop.
    """
    t_mat, vecs = scipy.linalg.schur(np.asarray(u_mat, dtype=complex), output="complex")
    evals = np.diag(t_mat) * cayley_sign
    if np.abs(evals - 1.0).min() < tol or np.abs(evals + 1.0).min() < tol:
        raise PreconditionError(
            "symbol eigenvalue at +-1: spectral flattening undefined (gap violated)"
        )
    signs = np.where(evals.imag > 0, -1.0, 1.0)
    return (vecs * signs) @ vecs.conj().T


def _eigh_frames(g0_mat, tol=1e-8):
    """Orthonormal frames of the +-1 eigenspaces of a self-adjoint unitary."""
    evals, vecs = np.linalg.eigh(0.5 * (g0_mat + g0_mat.conj().T))
    plus = vecs[:, evals > 0.5]
    minus = vecs[:, evals < -0.5]
    if np.any(np.abs(np.abs(evals) - 1.0) > 1e-6):
        raise PreconditionError("grading symbol is not a self-adjoint unitary on the grid")
    return plus, minus


def _propagate_frame(projector, frame):
    """Closest isometry to projector @ frame (polar factor)."""
    candidate = projector @ frame
    u_mat, svals, vh = np.linalg.svd(candidate, full_matrices=False)
    if svals.min() < 0.1:
        raise FramePropagationError(
            "frame propagation degeneracy: projected frame nearly singular"
        )
    return u_mat @ vh


def chiral_flat_band_symbol(pair, side, grid_n=512, cayley_sign=1, gauge=None):
    """Compressed flat-band loop of one limit symbol of a chiral pair.

    cayley_sign +1 gives the loop built from the Cayley transform of u,
    -1 the one from the Cayley transform of -u (pointwise negatives of
    one another).  Requires an even fiber with half-rank grading at
    every grid point.  ``gauge`` optionally right-multiplies the two
    starting frames by fixed unitaries; the holonomy-corrected winding
    must not depend on it.
    """
    d = pair.u.fiber_dim
    if d % 2 != 0:
        raise PreconditionError("flat-band compression needs an even fiber dimension")
    half = d // 2
    u_loop = pair.u.symbol_at(side)
    g0_loop = pair.gamma0.symbol_at(side)
    n = int(grid_n)
    zs = circle_grid(n)
    u_vals = u_loop(zs)
    g0_vals = g0_loop(zs)

    frame_plus, frame_minus = _eigh_frames(g0_vals[0])
    if frame_plus.shape[1] != half or frame_minus.shape[1] != half:
        raise PreconditionError(
            f"grading symbol rank {frame_plus.shape[1]} differs from half the fiber {half}"
        )
    if gauge is not None:
        frame_plus = frame_plus @ np.asarray(gauge[0], dtype=complex)
        frame_minus = frame_minus @ np.asarray(gauge[1], dtype=complex)
    start_plus, start_minus = frame_plus, frame_minus
    samples = np.empty((n + 1, half, half), dtype=complex)
    for k in range(n + 1):
        idx = k % n
        if k > 0:
            p0 = 0.5 * (np.eye(d) + g0_vals[idx])
            p1 = np.eye(d) - p0
            frame_plus = _propagate_frame(p0, frame_plus)
            frame_minus = _propagate_frame(p1, frame_minus)
        flat = _spectral_flatten(u_vals[idx], cayley_sign)
        block = frame_minus.conj().T @ flat @ frame_plus
        dev = np.abs(block.conj().T @ block - np.eye(half)).max()
        if dev > 1e-8:
            raise PreconditionError(
                f"compressed block deviates from unitarity by {dev:.3e} "
                "(is the dual gap certified?)"
            )
        samples[k] = block
    holonomy_plus = start_plus.conj().T @ frame_plus
    holonomy_minus = start_minus.conj().T @ frame_minus
    return SampledLoop(
        fiber_dim=half,
        samples=samples,
        holonomy_plus=holonomy_plus,
        holonomy_minus=holonomy_minus,
        side=side,
        grid_n=n,
    )


def chiral_imaginary_block_symbol(pair, side, grid_n=512):
    """Compressed loop of Im(u) between the graded halves of one limit symbol.

    Invertible exactly when both essential gaps hold; its winding feeds
    the total-index comparison.
    """
    d = pair.u.fiber_dim
    if d % 2 != 0:
        raise PreconditionError("block compression needs an even fiber dimension")
    half = d // 2
    u_loop = pair.u.symbol_at(side)
    g0_loop = pair.gamma0.symbol_at(side)
    n = int(grid_n)
    zs = circle_grid(n)
    u_vals = u_loop(zs)
    g0_vals = g0_loop(zs)
    frame_plus, frame_minus = _eigh_frames(g0_vals[0])
    if frame_plus.shape[1] != half:
        raise PreconditionError("grading symbol rank differs from half the fiber")
    start_plus, start_minus = frame_plus, frame_minus
    samples = np.empty((n + 1, half, half), dtype=complex)
    for k in range(n + 1):
        idx = k % n
        if k > 0:
            p0 = 0.5 * (np.eye(d) + g0_vals[idx])
            frame_plus = _propagate_frame(p0, frame_plus)
            frame_minus = _propagate_frame(np.eye(d) - p0, frame_minus)
        q_mat = (u_vals[idx] - u_vals[idx].conj().T) / 2j
        samples[k] = frame_minus.conj().T @ q_mat @ frame_plus
    return SampledLoop(
        fiber_dim=half,
        samples=samples,
        holonomy_plus=start_plus.conj().T @ frame_plus,
        holonomy_minus=start_minus.conj().T @ frame_minus,
        side=side,
        grid_n=n,
    )


# --- the double-sided comparison ---------------------------------------------


@dataclass
class IndexTheoremBranch:
    name: str
    lhs_index: int               # kernel-count index, right-minus-left orientation
    winding_left: int
    winding_right: int
    fiber_dim: int

    @property
    def rhs_index(self):
        return self.winding_right - self.winding_left

    @property
    def holds(self):
        return self.lhs_index == self.rhs_index

    @property
    def lhs_tau_normalized(self):
        return Fraction(self.lhs_index, self.fiber_dim)

    @property
    def rhs_tau_normalized(self):
        return Fraction(self.rhs_index, self.fiber_dim)

    def to_dict(self):
        return {
            "name": self.name,
            "lhs_index": self.lhs_index,
            "winding_left": self.winding_left,
            "winding_right": self.winding_right,
            "rhs_index": self.rhs_index,
            "lhs_tau_normalized": str(self.lhs_tau_normalized),
            "rhs_tau_normalized": str(self.rhs_tau_normalized),
            "holds": self.holds,
        }


@dataclass
class IndexTheoremRecord:
    branches: list

    @property
    def holds(self):
        return all(b.holds for b in self.branches)

    def branch(self, name):
        for b in self.branches:
            if b.name == name:
                return b
        raise KeyError(name)

    def to_dict(self):
        return {"holds": self.holds, "branches": [b.to_dict() for b in self.branches]}


def verify_index_theorem_banded(f_op, grid_n=4096, rank_tol=1e-8):
    """Kernel-count index of a banded operator against its winding difference."""
    result = exact_index(f_op, rank_tol=rank_tol)
    wl = nc_winding(f_op.symbol_at(ops.LEFT), grid_n)
    wr = nc_winding(f_op.symbol_at(ops.RIGHT), grid_n)
    d = f_op.fiber_dim
    branch = IndexTheoremBranch(
        name="banded",
        lhs_index=result.index,
        winding_left=int(wl * d),
        winding_right=int(wr * d),
        fiber_dim=d,
    )
    return IndexTheoremRecord(branches=[branch])


def verify_index_theorem_chiral(pair, grid_n=512, rank_tol=1e-8):
    """Compare the total symmetry index of a chiral pair with symbol windings.

    The kernel side comes from the transfer oracle: the graded
    signatures of Ker(U -+ 1) sum to the total index.  The winding side
    is evaluated on three realizations of the same class: the spectral
    flattenings of the Cayley transforms of u and of -u, and the
    unflattened imaginary-part block.  The first two are pointwise
    negatives of one another and all three carry identical windings, so
    each branch compares against minus the total signature (the
    right-minus-left orientation).  The split of the total into si_plus
    and si_minus is carried by finite-dimensional +-1 eigenspaces that
    limit symbols cannot see, so only the sum admits a winding formula;
    both summands are still computed and attached to the record.
    """
    d = pair.u.fiber_dim
    one = ops.identity(d)
    ker_minus = exact_kernel(pair.u + one, gamma0=pair.gamma0, rank_tol=rank_tol)
    ker_plus = exact_kernel(pair.u - one, gamma0=pair.gamma0, rank_tol=rank_tol)
    si_minus = ker_minus.graded_signature
    si_plus = ker_plus.graded_signature
    lhs = -(si_plus + si_minus)

    branches = []
    for name, builder in (
        ("cayley_flat_band", lambda side: chiral_flat_band_symbol(pair, side, grid_n, 1)),
        ("cayley_flat_band_negated", lambda side: chiral_flat_band_symbol(pair, side, grid_n, -1)),
        ("imaginary_block", lambda side: chiral_imaginary_block_symbol(pair, side, grid_n)),
    ):
        branches.append(
            IndexTheoremBranch(
                name=name,
                lhs_index=lhs,
                winding_left=builder(ops.LEFT).winding().rounded,
                winding_right=builder(ops.RIGHT).winding().rounded,
                fiber_dim=d,
            )
        )
    record = IndexTheoremRecord(branches=branches)
    record.si_plus = si_plus
    record.si_minus = si_minus
    record.si_total = si_plus + si_minus
    record.dim_ker_u_plus_one = ker_minus.dimension
    record.dim_ker_u_minus_one = ker_plus.dimension
    return record


def verify_index_theorem(target, grid_n=None, rank_tol=1e-8):
    """Dispatch on ChiralPair vs plain banded operator."""
    if hasattr(target, "gamma0") and hasattr(target, "u"):
        return verify_index_theorem_chiral(target, grid_n or 512, rank_tol)
    return verify_index_theorem_banded(target, grid_n or 4096, rank_tol)
