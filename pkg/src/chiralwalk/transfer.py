"""Exact kernels and indices of banded eventually-constant lattice operators.

Square-summable solutions of A u = 0 are parameterized by decaying
germs of the two constant-coefficient recursions at the ends, glued by
the finitely many equations that see the bulk.  Germ spaces are
deflating subspaces of a block companion pencil (QZ with eigenvalue
reordering), which handles singular extreme bands (eigenvalues at 0 and
infinity encode tails of finite support).  Truncation is never used:
open boundaries would pollute the kernel with edge modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from . import operators as ops
from .exceptions import (
    DegenerateSymbolError,
    NotFredholmError,
    PreconditionError,
)
from .indices import SIGNATURE_GAP, KernelSummary, kernel_basis
from .operators import circle_grid

CIRCLE_MARGIN = 1e-6
TAIL_TOL = 1e-10
MODE_RESIDUAL_TOL = 1e-8
MAX_TAIL_STEPS = 20000
MAX_CHAIN_LENGTH = 4


# --- scalar determinant of a symbol loop ------------------------------------


def _det_laurent(loop, coeff_tol=1e-11):
    """Laurent coefficients of det(loop(z)) via FFT interpolation.

    Returns (lowest_power, coefficient array c with det = sum_k c[k] z^(low+k)).
    """
    offsets = loop.offsets()
    if not offsets:
        return 0, np.zeros(1, dtype=complex)
    d = loop.fiber_dim
    nmin, nmax = min(offsets), max(offsets)
    low, high = d * nmin, d * nmax
    m = high - low + 1
    zs = circle_grid(m)
    dets = np.linalg.det(loop(zs))
    # det(z) * z^(-low) is a polynomial of degree m-1; sample and invert
    samples = dets * zs ** (-low)
    coeffs = np.fft.ifft(samples)
    scale = np.abs(coeffs).max()
    if scale == 0:
        return 0, np.zeros(1, dtype=complex)
    coeffs[np.abs(coeffs) < coeff_tol * scale] = 0.0
    return low, coeffs


def _det_roots(loop):
    """(roots with multiplicity in C*, order of the root at z = 0).

    The order at zero is of det(loop) as a Laurent polynomial; negative
    values mean a pole at 0 (no root).
    """
    low, coeffs = _det_laurent(loop)
    nz = np.nonzero(coeffs)[0]
    if nz.size == 0:
        raise NotFredholmError("symbol determinant vanishes identically")
    first, last = nz[0], nz[-1]
    order_at_zero = low + first
    poly = coeffs[first : last + 1]
    if poly.size == 1:
        return np.zeros(0, dtype=complex), int(order_at_zero)
    roots = np.roots(poly[::-1])  # np.roots wants highest power first
    return roots, int(order_at_zero)


# --- public decaying-solution space ------------------------------------------


@dataclass
class DecayingMode:
    z: complex
    multiplicity: int
    jordan_chains: list        # list of chains, each a list of C^d vectors

    @property
    def head(self):
        return self.jordan_chains[0][0]


@dataclass
class DecayingSolutionSpace:
    side: str
    dimension: int
    modes: list
    modes_at_infinity: int = 0


def _null_vectors(mat, scale, tol=MODE_RESIDUAL_TOL):
    """Null vectors against an absolute threshold set by the loop scale."""
    mat = np.atleast_2d(np.asarray(mat, dtype=complex))
    _, svals, vh = np.linalg.svd(mat)
    threshold = tol * max(scale, 1.0)
    basis = vh.conj().T[:, np.concatenate([svals, np.zeros(mat.shape[1] - svals.size)]) < threshold]
    return [basis[:, j] for j in range(basis.shape[1])]


def _loop_scale(loop):
    return max((np.abs(m).max() for m in loop.coefficients.values()), default=1.0)


def _jordan_chains_at(loop, z0, multiplicity):
    """Jordan chains of the loop at a nonzero root, up to length 4."""
    d = loop.fiber_dim
    scale = _loop_scale(loop)
    derivs = [loop(z0)]
    current = loop
    for _ in range(MAX_CHAIN_LENGTH):
        current = current.derivative()
        derivs.append(current(z0))
    heads = _null_vectors(derivs[0], scale)
    if not heads:
        raise DegenerateSymbolError(f"no null vector at claimed root z={z0}")
    chains = [[h] for h in heads]
    remaining = multiplicity - len(heads)
    # extend chains one rung at a time while algebraic multiplicity remains
    rung = 1
    while remaining > 0:
        if rung >= MAX_CHAIN_LENGTH:
            raise DegenerateSymbolError(
                f"Jordan chain longer than {MAX_CHAIN_LENGTH} at root z={z0}"
            )
        extended = 0
        for chain in chains:
            if len(chain) != rung:
                continue
            if remaining - extended <= 0:
                break
            # solve F(z0) w = -sum_{j>=1} F^(j)(z0)/j! chain[-j]
            rhs = np.zeros(d, dtype=complex)
            fact = 1.0
            for j in range(1, len(chain) + 1):
                fact *= j
                rhs -= derivs[j] @ chain[len(chain) - j] / fact
            w, residual, _, _ = np.linalg.lstsq(derivs[0], rhs, rcond=None)
            check = np.linalg.norm(derivs[0] @ w - rhs)
            scale = max(1.0, np.linalg.norm(rhs))
            if check > MODE_RESIDUAL_TOL * scale:
                continue
            chain.append(w)
            extended += 1
        if extended == 0:
            raise DegenerateSymbolError(
                f"could not complete Jordan structure at root z={z0}"
            )
        remaining -= extended
        rung += 1
    return chains


def _group_roots(roots, tol=1e-7):
    """Cluster numerically coincident roots into (value, multiplicity) pairs."""
    groups = []
    for z in sorted(roots, key=lambda w: (round(w.real, 10), round(w.imag, 10))):
        for g in groups:
            if abs(z - g[0]) < tol * max(1.0, abs(g[0])):
                g[1] += 1
                g[0] = (g[0] * (g[1] - 1) + z) / g[1]
                break
        else:
            groups.append([z, 1])
    return [(complex(z), int(m)) for z, m in groups]


def decaying_space(loop, side, circle_margin=CIRCLE_MARGIN):
    """Solution modes of the loop's lattice recursion decaying on one side.

    Modes pair a root z of det(loop) with Jordan chain vectors whose
    head satisfies loop(z) . head = 0.  Right-decaying modes have
    |z| < 1, left-decaying ones |z| > 1; the dimension counts roots
    with multiplicity, including the structural ones at 0 (right) or
    infinity (left).  Roots within the margin of the unit circle abort:
    the operator is not of Fredholm type there.
    """
    ops._check_side(side)
    roots, order_at_zero = _det_roots(loop)
    on_circle = np.abs(np.abs(roots) - 1.0) <= circle_margin
    if np.any(on_circle):
        bad = roots[on_circle][0]
        raise NotFredholmError(
            f"unit-circle root of det(symbol) at z = {bad:.6f}; no finite kernel guarantee"
        )
    if side == ops.RIGHT:
        kept = roots[np.abs(roots) < 1.0]
        extra = max(order_at_zero, 0)
        zero_genuine = extra
        infinity_count = 0
    else:
        kept = roots[np.abs(roots) > 1.0]
        # roots at infinity: degree deficiency of the Laurent determinant
        low, coeffs = _det_laurent(loop)
        nz = np.nonzero(coeffs)[0]
        top_power = low + nz[-1]
        d = loop.fiber_dim
        nmax = max(loop.offsets()) if loop.offsets() else 0
        infinity_count = max(d * nmax - top_power, 0)
        zero_genuine = 0
    modes = []
    for z0, mult in _group_roots(kept):
        chains = _jordan_chains_at(loop, z0, mult)
        modes.append(DecayingMode(z=z0, multiplicity=mult, jordan_chains=chains))
    if zero_genuine:
        d = loop.fiber_dim
        if min(loop.offsets()) == 0:
            heads = _null_vectors(loop.coefficients[0], _loop_scale(loop))
        else:
            heads = [np.eye(d)[:, j] for j in range(min(zero_genuine, d))]
        modes.append(
            DecayingMode(z=0.0, multiplicity=zero_genuine, jordan_chains=[[h] for h in heads])
        )
    dimension = sum(m.multiplicity for m in modes) + infinity_count
    return DecayingSolutionSpace(
        side=side, dimension=dimension, modes=modes, modes_at_infinity=infinity_count
    )


# --- half-line germ spaces via the companion pencil --------------------------


@dataclass
class _GermSpace:
    """Deflating-subspace description of decaying half-line solutions."""

    dimension: int
    window_basis: np.ndarray    # (2 r d, k), orthonormal columns
    step: np.ndarray            # (k, k) coordinate map one site deeper into the tail
    radius: int


def _companion_pencil(coeffs, d, r):
    """Pencil (E, B) with E U_{x+1} = B U_x for windows of half-width 2r."""
    size = 2 * r * d
    e_mat = np.eye(size, dtype=complex)
    b_mat = np.zeros((size, size), dtype=complex)
    b_mat[: size - d, d:] = np.eye(size - d)
    e_mat[size - d :, size - d :] = coeffs.get(-r, np.zeros((d, d)))
    for j in range(2 * r):
        n = r - j  # coefficient of u(x + j) in the equation at x + r
        b_mat[size - d :, j * d : (j + 1) * d] = -coeffs.get(n, np.zeros((d, d)))
    return e_mat, b_mat


def _half_line_germs(coeffs, d, r, tail, circle_margin=CIRCLE_MARGIN):
    """Germ space of decaying solutions of the constant recursion.

    tail = 'right': solutions on [x, +inf) (cluster |lambda| < 1, 0 included);
    tail = 'left': solutions on (-inf, x] (cluster |lambda| > 1 and infinity).
    """
    e_mat, b_mat = _companion_pencil(coeffs, d, r)
    size = e_mat.shape[0]

    if tail == "right":
        def select(alpha, beta):
            return np.abs(alpha) < (1.0 - circle_margin) * np.abs(beta)
    else:
        def select(alpha, beta):
            return np.abs(alpha) > (1.0 + circle_margin) * np.abs(beta)

    aa, bb, alpha, beta, _, z = scipy.linalg.ordqz(
        b_mat, e_mat, sort=select, output="complex"
    )
    degenerate = (np.abs(alpha) < 1e-12) & (np.abs(beta) < 1e-12)
    if np.any(degenerate):
        raise NotFredholmError("companion pencil is singular; symbol determinant degenerates")
    inside = np.abs(alpha) < (1.0 - circle_margin) * np.abs(beta)
    outside = np.abs(alpha) > (1.0 + circle_margin) * np.abs(beta)
    if np.any(~inside & ~outside):
        lam = alpha[~inside & ~outside] / beta[~inside & ~outside]
        raise NotFredholmError(
            f"transfer eigenvalue within margin of the unit circle (|lambda| = {np.abs(lam[0]):.8f})"
        )
    k = int(np.sum(select(alpha, beta)))
    z1 = z[:, :k]
    s11 = aa[:k, :k]
    t11 = bb[:k, :k]
    if k == 0:
        step = np.zeros((0, 0), dtype=complex)
    elif tail == "right":
        step = np.linalg.solve(t11, s11)   # forward: c_{x+1} = step c_x
    else:
        step = np.linalg.solve(s11, t11)   # backward: c_{x-1} = step c_x
    return _GermSpace(dimension=k, window_basis=z1, step=step, radius=r)


# --- exact kernel on the doubly infinite lattice ------------------------------


def _check_symbols_fredholm(a, circle_margin):
    for side in (ops.LEFT, ops.RIGHT):
        loop = a.symbol_at(side)
        zs = circle_grid(256)
        dets = np.abs(np.linalg.det(loop(zs))) if loop.offsets() else np.zeros(1)
        if dets.max() < 1e-12:
            raise NotFredholmError(f"{side} symbol determinant vanishes identically")
        if dets.min() < 1e-12:
            raise NotFredholmError(
                f"{side} symbol determinant has a zero on the unit circle"
            )


def _multiplication_kernel(a, gamma0, rank_tol):
    """Kernel of a pure multiplication operator: sitewise null spaces."""
    f = a.coefficient(0)
    d = a.fiber_dim
    for side, mat in ((ops.LEFT, f.left), (ops.RIGHT, f.right)):
        if np.linalg.svd(mat, compute_uv=False)[-1] < 1e-12:
            raise NotFredholmError(f"{side} limit of the multiplication operator is singular")
    lo, hi = f.window_start, f.window_end
    vectors = []
    for x in range(lo, hi):
        null = kernel_basis(f.value_at(x), rank_tol)
        for j in range(null.dimension):
            vectors.append((x, null.basis[:, j]))
    if not vectors:
        return KernelSummary(0, np.zeros((d, 0), complex), float(rank_tol), site_window=(lo, hi))
    width = max(hi - lo, 1)
    mat = np.zeros((width * d, len(vectors)), dtype=complex)
    for col, (x, vec) in enumerate(vectors):
        mat[(x - lo) * d : (x - lo + 1) * d, col] = vec
    summary = KernelSummary(
        dimension=len(vectors),
        basis=np.linalg.qr(mat)[0][:, : len(vectors)],
        rank_tolerance_used=float(rank_tol),
        site_window=(lo, hi - 1),
    )
    if gamma0 is not None:
        summary.graded_signature = _window_graded_signature(
            gamma0, summary.basis, lo, hi - 1
        )
    return summary


def _apply_banded_window(op, values, lo):
    """Apply a banded operator to compactly supported window values.

    values has one row per site starting at ``lo``; the result window
    extends by the band radius on both sides.
    """
    r = op.band_radius
    n, d = values.shape[0], op.fiber_dim
    out_lo = lo - r
    out = np.zeros((n + 2 * r, d), dtype=complex)
    for offset, f in op.bands.items():
        for row in range(out.shape[0]):
            x = out_lo + row
            y = x - offset
            if lo <= y < lo + n:
                out[row] += f.value_at(x) @ values[y - lo]
    return out, out_lo


def _window_graded_signature(gamma0, basis, lo, hi):
    """Signature of gamma0 on kernel vectors given as stacked site blocks."""
    d = gamma0.fiber_dim
    k = basis.shape[1]
    if k == 0:
        return 0
    n_sites = hi - lo + 1
    cols = basis.reshape(n_sites, d, k)
    compressed = np.zeros((k, k), dtype=complex)
    for j in range(k):
        image, out_lo = _apply_banded_window(gamma0, cols[:, :, j], lo)
        # overlap of the image window with the original window
        shift = lo - out_lo
        image_aligned = image[shift : shift + n_sites]
        compressed[:, j] = (cols.reshape(n_sites * d, k).conj().T) @ image_aligned.reshape(-1)
    compressed = 0.5 * (compressed + compressed.conj().T)
    evals = np.linalg.eigvalsh(compressed)
    if np.any(np.abs(evals) < SIGNATURE_GAP):
        raise PreconditionError(
            "kernel not Gamma0-invariant within tolerance (lattice signature)"
        )
    return int(np.sum(evals > SIGNATURE_GAP) - np.sum(evals < -SIGNATURE_GAP))


def _tail_extension(germ, tail_tol):
    """Number of extra sites and stacked coordinate powers for tail reconstruction."""
    k = germ.dimension
    if k == 0:
        return 0, []
    powers = []
    current = np.eye(k, dtype=complex)
    norm0 = 1.0
    steps = 0
    while steps < MAX_TAIL_STEPS:
        current = germ.step @ current
        norm = np.linalg.norm(current, 2)
        powers.append(current.copy())
        steps += 1
        if norm < tail_tol * norm0:
            break
    else:
        raise PreconditionError(
            "tail decay too slow for reconstruction; operator is nearly gapless "
            "(consider re-centering the window)"
        )
    return steps, powers


def exact_kernel(
    a,
    gamma0=None,
    rank_tol=1e-8,
    circle_margin=CIRCLE_MARGIN,
    tail_tol=TAIL_TOL,
    extra_padding=0,
):
    """Kernel of a banded anisotropic operator on the doubly infinite lattice.

    Candidate solutions combine a left-decaying germ, explicit bulk
    values and a right-decaying germ; the returned dimension is the
    null-space dimension of the finite matching system.  With ``gamma0``
    given, the graded signature over the reconstructed kernel vectors is
    attached (tails below ``tail_tol`` are discarded).  ``extra_padding``
    widens the matching window; the result must not depend on it.
    """
    d = a.fiber_dim
    _check_symbols_fredholm(a, circle_margin)
    r = a.band_radius
    if r == 0:
        return _multiplication_kernel(a, gamma0, rank_tol)
    if a.is_translation_invariant():
        # invertible symbol on the circle means an invertible operator
        summary = KernelSummary(0, np.zeros((0, 0), complex), float(rank_tol))
        if gamma0 is not None:
            summary.graded_signature = 0
        return summary

    left_coeffs = {n: f.left for n, f in a.bands.items()}
    right_coeffs = {n: f.right for n, f in a.bands.items()}
    germ_left = _half_line_germs(left_coeffs, d, r, "left", circle_margin)
    germ_right = _half_line_germs(right_coeffs, d, r, "right", circle_margin)

    starts = [f.window_start for f in a.bands.values() if not f.is_constant()]
    ends = [f.window_end for f in a.bands.values() if not f.is_constant()]
    first_mixed = min(starts) if starts else 0
    last_mixed = (max(ends) - 1) if ends else -1
    eq_lo = first_mixed - int(extra_padding)
    eq_hi = max(last_mixed, eq_lo + 2 * r) + int(extra_padding)

    y0 = eq_lo - r                   # leftmost site entering an imposed equation
    y1 = eq_hi + r                   # rightmost
    anchor_left_end = y0 + 2 * r - 1
    anchor_right_start = y1 - 2 * r + 1
    mid_sites = list(range(anchor_left_end + 1, anchor_right_start))

    k_l, k_r = germ_left.dimension, germ_right.dimension
    n_cols = k_l + len(mid_sites) * d + k_r
    n_rows = (eq_hi - eq_lo + 1) * d
    matching = np.zeros((n_rows, n_cols), dtype=complex)

    def column_block(y):
        """Return (kind, data) describing u(y) as a linear map of the unknowns."""
        if y <= anchor_left_end:
            p = y - y0
            return ("left", germ_left.window_basis[p * d : (p + 1) * d, :])
        if y >= anchor_right_start:
            p = y - anchor_right_start
            return ("right", germ_right.window_basis[p * d : (p + 1) * d, :])
        i = mid_sites.index(y)
        return ("mid", i)

    mid_offset = k_l
    right_offset = k_l + len(mid_sites) * d
    for s in range(eq_lo, eq_hi + 1):
        row = (s - eq_lo) * d
        for offset, f in a.bands.items():
            y = s - offset
            if y < y0 or y > y1:
                continue
            coeff = f.value_at(s)
            kind, data = column_block(y)
            if kind == "left":
                matching[row : row + d, :k_l] += coeff @ data
            elif kind == "right":
                matching[row : row + d, right_offset:] += coeff @ data
            else:
                j = mid_offset + data * d
                matching[row : row + d, j : j + d] += coeff

    null = kernel_basis(matching, rank_tol)
    dim = null.dimension
    if dim == 0:
        summary = KernelSummary(
            0,
            np.zeros((0, 0), complex),
            float(rank_tol),
            singular_values_near_zero=null.singular_values_near_zero,
            borderline_singular_values=null.borderline_singular_values,
            site_window=(y0, y1),
        )
        if gamma0 is not None:
            summary.graded_signature = 0
        return summary

    # reconstruct kernel vectors with geometric tails on both sides
    steps_l, powers_l = _tail_extension(germ_left, tail_tol)
    steps_r, powers_r = _tail_extension(germ_right, tail_tol)
    lo = y0 - steps_l
    hi = y1 + steps_r
    n_sites = hi - lo + 1
    vectors = np.zeros((n_sites * d, dim), dtype=complex)
    for col in range(dim):
        alpha = null.basis[:k_l, col]
        mids = null.basis[mid_offset:right_offset, col]
        beta = null.basis[right_offset:, col]
        vals = np.zeros((n_sites, d), dtype=complex)
        # anchor windows and middle
        for p in range(2 * r):
            vals[y0 + p - lo] = germ_left.window_basis[p * d : (p + 1) * d, :] @ alpha
            vals[anchor_right_start + p - lo] = (
                germ_right.window_basis[p * d : (p + 1) * d, :] @ beta
            )
        for i, y in enumerate(mid_sites):
            vals[y - lo] = mids[i * d : (i + 1) * d]
        # left tail: window start moves one site left per step
        for j in range(1, steps_l + 1):
            c = powers_l[j - 1] @ alpha
            vals[y0 - j - lo] = germ_left.window_basis[:d, :] @ c
        # right tail: new values appear at the trailing edge of the window
        for j in range(1, steps_r + 1):
            c = powers_r[j - 1] @ beta
            vals[y1 + j - lo] = germ_right.window_basis[(2 * r - 1) * d :, :] @ c
        vectors[:, col] = vals.reshape(-1)

    q, _ = np.linalg.qr(vectors)
    basis = q[:, :dim]
    summary = KernelSummary(
        dimension=dim,
        basis=basis,
        rank_tolerance_used=float(rank_tol),
        singular_values_near_zero=null.singular_values_near_zero,
        borderline_singular_values=null.borderline_singular_values,
        site_window=(lo, hi),
    )
    if gamma0 is not None:
        summary.graded_signature = _window_graded_signature(gamma0, basis, lo, hi)
    return summary


@dataclass
class ExactIndexResult:
    dim_ker: int
    dim_ker_adjoint: int
    fiber_dim: int

    @property
    def index(self):
        """Signed kernel imbalance, oriented so that an operator equal to 1
        far to the left and to the forward shift far to the right has
        index +1 (the orientation matched by right-minus-left windings)."""
        return self.dim_ker_adjoint - self.dim_ker

    @property
    def tau_normalized(self):
        return Fraction(self.index, self.fiber_dim)

    def to_dict(self):
        return {
            "dim_ker": self.dim_ker,
            "dim_ker_adjoint": self.dim_ker_adjoint,
            "index": self.index,
            "tau_normalized": str(self.tau_normalized),
        }


def exact_index(a, rank_tol=1e-8, circle_margin=CIRCLE_MARGIN):
    """Kernel-counting index of a Fredholm banded operator, tau-normalized by d."""
    ker = exact_kernel(a, rank_tol=rank_tol, circle_margin=circle_margin)
    coker = exact_kernel(a.adjoint(), rank_tol=rank_tol, circle_margin=circle_margin)
    return ExactIndexResult(
        dim_ker=ker.dimension, dim_ker_adjoint=coker.dimension, fiber_dim=a.fiber_dim
    )
