import numpy as np
import pytest

from chiralwalk import essential, operators as ops
from chiralwalk.exceptions import ChiralwalkError
from chiralwalk.operators import BandedAnisotropicOperator, CoefficientFunction, identity, mult_op, shift_power
from chiralwalk.verification import random_split_step, split_step_from_angles


def scalar(v):
    return np.array([[v]], dtype=complex)


class TestEssentialNorm:
    def test_identity(self):
        assert abs(essential.essential_norm(identity(2)).value - 1.0) < 1e-12

    def test_bulk_is_invisible(self):
        f = CoefficientFunction.from_table(scalar(0.0), scalar(0.0), {0: scalar(7.0)})
        assert essential.essential_norm(mult_op(f)).value == 0.0

    def test_shift(self):
        assert abs(essential.essential_norm(shift_power(1, 1)).value - 1.0) < 1e-12

    def test_monotone_under_refinement(self):
        rng = np.random.default_rng(1)
        pair = random_split_step(rng)
        coarse = essential.essential_norm(pair.u - identity(2), grid_n=64, refine=False)
        fine = essential.essential_norm(pair.u - identity(2), grid_n=128, refine=False)
        assert fine.value >= coarse.value - 1e-15

    def test_refinement_stability_lipschitz(self):
        # band radius <= 4 with curvature-limited coefficients: a 2^10 grid
        # already resolves the sup to < 1e-6 of the 2^12 value
        rng = np.random.default_rng(2)
        bands = {0: CoefficientFunction.constant(np.eye(2))}
        for n in range(-4, 5):
            if n == 0:
                continue
            mat = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) * 0.01 / (1 + n * n)
            bands[n] = CoefficientFunction.constant(mat)
        op = BandedAnisotropicOperator(2, bands)
        v10 = essential.essential_norm(op, grid_n=2**10, refine=False).value
        v12 = essential.essential_norm(op, grid_n=2**12, refine=False).value
        assert abs(v12 - v10) < 1e-6

    def test_auto_refinement_converged(self):
        rng = np.random.default_rng(4)
        pair = random_split_step(rng)
        result = essential.essential_norm(pair.u - identity(2))
        doubled = essential.essential_norm(
            pair.u - identity(2), grid_n=2 * result.grid_n, refine=False
        )
        assert abs(doubled.value - result.value) < 1e-6

    def test_grid_minimum(self):
        with pytest.raises(ChiralwalkError):
            essential.essential_norm(identity(1), grid_n=8)


class TestFredholmType:
    def test_identity_certified_against_one(self):
        cert = essential.is_fredholm_type(identity(2))
        assert cert.minus.status == "certified" and cert.minus.value == 0.0
        assert cert.plus.status == "refuted" and abs(cert.plus.value - 2.0) < 1e-12

    def test_minus_identity_refuted(self):
        cert = essential.is_fredholm_type(identity(2).scaled(-1.0))
        assert cert.minus.status == "refuted"
        assert cert.plus.status == "certified"

    def test_trivial_walk_both_gaps(self):
        pair = split_step_from_angles(0.2, 0.2, 1.4)
        cert = essential.is_fredholm_type(pair.u)
        assert cert.minus.certified or cert.minus.status == "inconclusive"


class TestGapAt:
    def test_diag_shift_walk_gapless(self):
        pair = split_step_from_angles(np.pi / 2, np.pi / 2, np.pi / 2)
        # U = diag(S*, S): symbol eigenvalues sweep the whole circle
        for target in (+1, -1):
            assert essential.gap_at(pair.u, target).status == "refuted"

    def test_identity_gap_at_minus_one(self):
        cert = essential.gap_at(identity(2), -1)
        assert cert.certified and abs(cert.value - 2.0) < 1e-12

    def test_gap_matches_fine_grid_eigenvalue_oracle(self):
        pair = split_step_from_angles(0.0, 1.0, np.arccos(3 / 5))
        for target in (+1, -1):
            cert = essential.gap_at(pair.u, target, grid_n=512)
            # independent oracle: min |eigenvalue - target| on a 10x finer grid
            oracle = np.inf
            zs = ops.circle_grid(5120)
            for side in (ops.LEFT, ops.RIGHT):
                evs = np.linalg.eigvals(pair.u.symbol_at(side)(zs))
                oracle = min(oracle, np.abs(evs - target).min())
            assert abs(cert.value - oracle) < 1e-3

    def test_invalid_target(self):
        with pytest.raises(ChiralwalkError):
            essential.gap_at(identity(2), 0.5)


class TestDichotomy:
    def test_equal_gammas(self):
        pair = split_step_from_angles(0.3, 0.3, 0.3)
        report = essential.dichotomy_check(pair)
        assert report.holds

    def test_random_pairs_never_violate(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            assert essential.dichotomy_check(random_split_step(rng)).holds


class TestSpectrumDump:
    def test_trivial_walk_all_ones(self):
        pair = split_step_from_angles(0.0, 0.0, 0.0)
        rows = essential.symbol_eigenvalues(pair.u, grid_n=16)
        for _, _, ev in rows:
            assert abs(ev - 1.0) < 1e-10

    def test_gap_consistency_with_certification(self):
        pair = split_step_from_angles(0.0, 1.0, 0.3)
        cert = essential.gap_at(pair.u, -1, grid_n=256)
        assert cert.certified
        rows = essential.symbol_eigenvalues(pair.u, grid_n=256)
        closest = min(abs(ev + 1.0) for _, _, ev in rows)
        assert closest >= cert.value - 1e-9
