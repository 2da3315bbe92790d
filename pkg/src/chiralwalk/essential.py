"""Symbol-level certification of essential-spectrum conditions.

For operators in this class the image in the Calkin quotient is exactly
the pair of limit symbols, so the essential norm is the larger of the
two symbol sup-norms over the circle.  Certifications are tri-state
(certified / refuted / inconclusive) to avoid silently miscertifying at
a phase transition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .exceptions import ChiralwalkError
from .operators import circle_grid

DEFAULT_GRID_N = 4096
MAX_GRID_N = 2**16
DEFAULT_MARGIN = 1e-6
REFINE_TOL = 1e-6

CERTIFIED = "certified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"


@dataclass
class EssentialNorm:
    value: float
    grid_n: int

    def __float__(self):
        return self.value


def _sup_opnorm(loop, zs):
    """max over the grid of the largest singular value of loop(z)."""
    vals = loop(zs)
    if vals.size == 0:
        return 0.0
    return float(np.linalg.svd(vals, compute_uv=False)[:, 0].max())


def _min_singular(loop, zs):
    vals = loop(zs)
    if vals.size == 0:
        return np.inf
    return float(np.linalg.svd(vals, compute_uv=False)[:, -1].min())


def essential_norm(a, grid_n=DEFAULT_GRID_N, refine=True):
    """Calkin-quotient norm of a banded anisotropic operator.

    Evaluated as the max over both limit symbols and the circle grid;
    monotone non-decreasing under grid doubling.  The grid doubles until
    the value moves by less than 1e-6, capped at 2^16.
    """
    grid_n = int(grid_n)
    if grid_n < 16:
        raise ChiralwalkError("grid_n must be at least 16")
    loops = [a.symbol_at(ops.LEFT), a.symbol_at(ops.RIGHT)]

    def value_at(n):
        zs = circle_grid(n)
        return max(_sup_opnorm(loop, zs) for loop in loops)

    n = grid_n
    value = value_at(n)
    while refine and n < MAX_GRID_N:
        nxt = value_at(2 * n)
        if abs(nxt - value) < REFINE_TOL:
            value = max(value, nxt)
            n *= 2
            break
        value = nxt
        n *= 2
    return EssentialNorm(value=value, grid_n=n)


@dataclass
class Certification:
    status: str           # certified / refuted / inconclusive
    value: float          # the measured norm or gap
    threshold: float
    margin: float
    grid_n: int

    @property
    def certified(self):
        return self.status == CERTIFIED

    def to_dict(self):
        return {
            "status": self.status,
            "value": self.value,
            "threshold": self.threshold,
            "margin": self.margin,
            "grid_n": self.grid_n,
        }


@dataclass
class FredholmTypeCertification:
    minus: Certification   # || 1 - U || < 2, gates the Cayley transform of U
    plus: Certification    # || 1 + U || < 2, gates the Cayley transform of -U

    def to_dict(self):
        return {"one_minus_u": self.minus.to_dict(), "one_plus_u": self.plus.to_dict()}


def is_fredholm_type(u, grid_n=DEFAULT_GRID_N, margin=DEFAULT_MARGIN):
    """Certify || 1 -+ U ||_ess < 2 for a unitary lattice operator."""
    one = ops.identity(u.fiber_dim)
    certs = []
    for sign in (-1.0, +1.0):
        norm = essential_norm(one + u.scaled(sign), grid_n)
        slack = 2.0 - norm.value
        if slack > margin:
            status = CERTIFIED
        elif slack <= margin * 1e-3:
            status = REFUTED
        else:
            status = INCONCLUSIVE
        certs.append(
            Certification(
                status=status,
                value=norm.value,
                threshold=2.0,
                margin=margin,
                grid_n=norm.grid_n,
            )
        )
    return FredholmTypeCertification(minus=certs[0], plus=certs[1])


def gap_at(u, target, grid_n=DEFAULT_GRID_N, margin=DEFAULT_MARGIN):
    """Distance of the essential spectrum of U from target (+1 or -1).

    Measured as the smallest singular value of symbol(U)(z) - target
    over both sides and the grid.  A gap above the margin certifies;
    one below margin/1000 refutes; in between is inconclusive.
    """
    if target not in (1, -1, 1.0, -1.0):
        raise ChiralwalkError("target must be +1 or -1")
    grid_n = int(grid_n)
    if grid_n < 16:
        raise ChiralwalkError("grid_n must be at least 16")
    shifted = u - ops.identity(u.fiber_dim).scaled(target)
    loops = [shifted.symbol_at(ops.LEFT), shifted.symbol_at(ops.RIGHT)]

    def gap_value(n):
        zs = circle_grid(n)
        return min(_min_singular(loop, zs) for loop in loops)

    n = grid_n
    gap = gap_value(n)
    while n < MAX_GRID_N:
        nxt = gap_value(2 * n)
        n *= 2
        if abs(nxt - gap) < REFINE_TOL:
            gap = min(gap, nxt)
            break
        gap = nxt
    if gap > margin:
        status = CERTIFIED
    elif gap <= margin * 1e-3:
        status = REFUTED
    else:
        status = INCONCLUSIVE
    return Certification(status=status, value=gap, threshold=0.0, margin=margin, grid_n=n)


@dataclass
class DichotomyReport:
    norm_difference: float    # || Gamma0 - Gamma1 ||_ess
    norm_sum: float           # || Gamma0 + Gamma1 ||_ess
    margin: float

    @property
    def holds(self):
        return max(self.norm_difference, self.norm_sum) >= 1.0 - self.margin

    def to_dict(self):
        return {
            "norm_difference": self.norm_difference,
            "norm_sum": self.norm_sum,
            "margin": self.margin,
            "holds": self.holds,
        }


def dichotomy_check(pair, grid_n=DEFAULT_GRID_N, margin=DEFAULT_MARGIN):
    """On the infinite lattice one of || G0 -+ G1 ||_ess must reach 1."""
    diff = essential_norm(pair.gamma0 - pair.gamma1, grid_n)
    total = essential_norm(pair.gamma0 + pair.gamma1, grid_n)
    return DichotomyReport(
        norm_difference=diff.value, norm_sum=total.value, margin=margin
    )


def symbol_eigenvalues(u, grid_n=DEFAULT_GRID_N):
    """Sampled eigenvalues of both limit symbols.

    Yields (side, theta, eigenvalue) tuples in deterministic order.
    """
    thetas = 2.0 * np.pi * np.arange(int(grid_n)) / int(grid_n)
    zs = np.exp(1j * thetas)
    out = []
    for side in (ops.LEFT, ops.RIGHT):
        vals = u.symbol_at(side)(zs)
        for theta, mat in zip(thetas, vals):
            for ev in sorted(np.linalg.eigvals(mat), key=lambda w: (w.real, w.imag)):
                out.append((side, float(theta), complex(ev)))
    return out
