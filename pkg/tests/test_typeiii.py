"""Step densities, the piecewise-linear coordinate map, and its pushforward."""
import math

import numpy as np
import pytest
from scipy import stats

from shiftlab import (HMapSpec, SeedStream, TypeIIISpec, erase_negative_side,
                      f_density, f_family, g_closed_form, h_apply,
                      lift_lambda_on_negative, mix_disjoint,
                      pushforward_density, ratio_profile, safe_zone,
                      sample_density_iid, sample_density_window, shift_family)
from shiftlab.sampling import Window
from shiftlab.typeiii import g_pieces, generation_log_ratios

LAM, LAMP = 0.25, 0.5  # p = (lam' - lam)/(1 - lam') = 1/2


@pytest.fixture(scope="module")
def spec():
    return TypeIIISpec(LAM)


@pytest.fixture(scope="module")
def hspec():
    return HMapSpec(LAM, LAMP)


class TestBaseFamily:
    def test_interval_conditions(self, spec):
        # (a) disjoint  (b) nested  (c) |A_n| = a_n = |B_n| / lam
        prev_a = prev_b = None
        for n in range(2, 60):
            (alo, ahi), (blo, bhi) = spec.intervals(n)
            assert ahi <= blo  # disjoint
            assert (ahi - alo) == pytest.approx(spec.a_n(n), abs=0)
            assert (bhi - blo) == pytest.approx(LAM * spec.a_n(n), rel=1e-15)
            if prev_a is not None:
                assert ahi <= prev_a[1] and blo >= prev_b[0]  # nested
            prev_a, prev_b = (alo, ahi), (blo, bhi)

    def test_density_values(self, spec):
        a5 = spec.a_n(5)
        assert f_density(spec, 5, 0.5 * a5) == LAM
        assert f_density(spec, 5, 1.0 - 0.5 * LAM * a5) == 1 / LAM
        assert f_density(spec, 5, 0.5) == 1.0

    def test_flat_generations(self, spec):
        for n in (-3, 0, 1):
            u = np.linspace(0.001, 0.999, 11)
            assert np.all(f_density(spec, n, u) == 1.0)

    def test_exact_normalization(self, spec):
        fam = f_family(spec)
        for n in (-1, 1, 2, 5, 50):
            assert fam.integral(n) == pytest.approx(1.0, abs=1e-12)
            fam.validate(n)

    def test_lambda_domain(self):
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                TypeIIISpec(bad)


class TestHMap:
    def test_identity_outside_slanted_pieces(self, hspec):
        a1, p, lam = hspec.a1, hspec.p, hspec.lam
        for x in (0.0, 0.5 * a1, a1 + p * a1 + 1e-6, 0.5,
                  1.0 - lam * a1 - p * a1 - 1e-6, 1.0):
            assert h_apply(hspec, x) == x

    def test_branch_one_endpoint_limit(self, hspec):
        a1, p = hspec.a1, hspec.p
        x = a1 + p * a1 - 1e-12
        assert float(h_apply(hspec, x)) == pytest.approx(a1, abs=1e-11)

    def test_branch_one_midpoint(self, hspec):
        a1, p = hspec.a1, hspec.p
        x = a1 + p * a1 / 2
        assert float(h_apply(hspec, x)) == pytest.approx(a1 / 2, rel=1e-12)

    def test_branch_two_reverses_orientation(self, hspec):
        a1, p, lam = hspec.a1, hspec.p, hspec.lam
        hi = 1.0 - lam * a1
        lo = hi - p * a1
        eps = 1e-9
        assert float(h_apply(hspec, lo + eps)) > float(h_apply(hspec, hi - eps))

    def test_head_condition(self, hspec):
        assert hspec.a1 * (1.0 + hspec.p) < 0.5
        assert hspec.a(0) == 0.0 and hspec.a(-3) == 0.0

    def test_ratio_calibration(self, hspec):
        assert (hspec.lam + hspec.p) / (1.0 + hspec.p) == pytest.approx(
            LAMP, abs=1e-12)


class TestPushforward:
    @pytest.mark.parametrize("n", [-2, 0, 1, 2, 5, 20])
    def test_matches_closed_form_everywhere(self, spec, hspec, n):
        edges, _ = g_pieces(hspec, n)
        probes = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo > 1e-12:  # skip degenerate pieces (n = 1 has two)
                probes.extend([lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)])
        got = pushforward_density(spec, hspec, n, np.array(probes))
        want = g_closed_form(hspec, n, np.array(probes))
        assert np.max(np.abs(got - want)) < 1e-12

    def test_a_piece_value(self, spec, hspec):
        an = hspec.a(5)
        v = 0.5 * an
        assert float(pushforward_density(spec, hspec, 5, v)) == pytest.approx(
            LAM + hspec.p, abs=1e-15)

    def test_vanishing_piece(self, spec, hspec):
        a1, p = hspec.a1, hspec.p
        v = a1 + 0.5 * p * a1
        assert float(pushforward_density(spec, hspec, 5, v)) == 0.0

    @pytest.mark.parametrize("n", [0, 2, 5])
    def test_exact_unit_mass(self, hspec, n):
        edges, vals = g_pieces(hspec, n)
        assert float(np.dot(vals, np.diff(edges))) == pytest.approx(1.0, abs=1e-12)

    def test_monte_carlo_histogram(self, spec, hspec):
        # draws from the base density pushed through the map land in each
        # closed-form piece at its predicted rate
        n, N = 5, 10 ** 5
        fam = f_family(hspec.family())
        u = sample_density_iid(fam, n, N, SeedStream(7))
        v = h_apply(hspec, u)
        edges, vals = g_pieces(hspec, n)
        counts, _ = np.histogram(v, bins=edges)
        probs = vals * np.diff(edges)
        for c, pr in zip(counts, probs):
            se = math.sqrt(N * pr * (1 - pr))
            assert abs(c - N * pr) <= 3 * se + 1e-9


class TestRatioProfile:
    def test_three_cases(self, spec, hspec):
        n = 5
        an, an1 = hspec.a(n), hspec.a(n - 1)
        a1, lam = hspec.a1, hspec.lam
        assert ratio_profile(spec, hspec, n, 0.5 * an) == pytest.approx(1.0, rel=1e-12)
        assert ratio_profile(spec, hspec, n, 0.5 * (an + an1)) == pytest.approx(
            LAMP, rel=1e-12)
        v = 1.0 - 0.5 * lam * (an + an1)
        assert ratio_profile(spec, hspec, n, v) == pytest.approx(1 / LAMP, rel=1e-12)

    def test_membership_random(self, spec, hspec):
        rng = np.random.default_rng(42)
        targets = np.array([LAMP, 1.0, 1.0 / LAMP])
        pieces = hspec.support_pieces()
        checked = 0
        while checked < 10 ** 4:
            n = int(rng.integers(-3, 60))
            lo, hi = pieces[int(rng.integers(0, len(pieces)))]
            v = float(rng.uniform(lo, hi))
            try:
                r = ratio_profile(spec, hspec, n, v)
            except ValueError:
                continue
            assert np.min(np.abs(targets - r)) < 1e-9
            checked += 1

    def test_outside_support_raises(self, spec, hspec):
        a1, p = hspec.a1, hspec.p
        with pytest.raises(ValueError, match="outside the support"):
            ratio_profile(spec, hspec, 4, a1 + 0.5 * p * a1)

    def test_breakpoint_raises(self, spec, hspec):
        with pytest.raises(ValueError, match="breakpoint"):
            ratio_profile(spec, hspec, 4, hspec.a(4))


class TestMixDisjoint:
    def make_mix(self, lam=LAM, ell=0.4):
        rho = f_family(TypeIIISpec(lam))
        nu = shift_family(f_family(TypeIIISpec(ell)), -1.0)
        return mix_disjoint(rho, nu)

    def test_half_mass_per_side(self):
        mixed = self.make_mix()
        for n in (0, 2, 7):
            edges = mixed.piece_edges(n)
            vals = mixed.piece_values(n)
            neg = edges[:-1] < 0
            lens = np.diff(edges)
            assert float((vals * lens)[neg].sum()) == pytest.approx(0.5, abs=1e-12)
            assert mixed.integral(n) == pytest.approx(1.0, abs=1e-12)

    def test_overlap_rejected(self):
        rho = f_family(TypeIIISpec(0.3))
        with pytest.raises(ValueError, match="overlap"):
            mix_disjoint(rho, rho)

    def test_log_ratio_lattice(self):
        lam, ell = LAM, 0.4
        mixed = self.make_mix(lam, ell)
        grid = {round(j * math.log(lam) + jj * math.log(ell), 12)
                for j in (-1, 0, 1) for jj in (-1, 0, 1)}
        for n in (3, 4, 10):
            for r in generation_log_ratios(mixed, n):
                assert min(abs(r - g) for g in grid) < 1e-9


class TestEraseNegativeSide:
    def setup_window(self, n_coords=5 * 10 ** 4, ell=0.4, seed=7):
        ell_spec = TypeIIISpec(ell)
        rho = f_family(TypeIIISpec(LAM))
        nu = shift_family(f_family(ell_spec), -1.0)
        mixed = mix_disjoint(rho, nu)
        zone_lo, zone_hi = safe_zone(ell_spec)
        zone = (zone_lo - 1.0, zone_hi - 1.0)
        w = sample_density_window(mixed, (2, 2 + n_coords - 1), SeedStream(seed))
        return w, zone

    def test_nonnegative_coordinates_untouched(self):
        w, zone = self.setup_window(2000)
        out, _ = erase_negative_side(w, zone)
        keep = np.asarray(w.values) >= 0
        assert np.array_equal(np.asarray(out.values)[keep],
                              np.asarray(w.values)[keep])

    def test_replaced_values_uniform(self):
        w, zone = self.setup_window()
        out, info = erase_negative_side(w, zone)
        vals = np.asarray(out.values)
        replaced = vals[(np.asarray(w.values) < 0) & ~np.isnan(vals)]
        assert info["censored"] < 0.05 * info["nu_indices"]
        u = (replaced + 1.0)
        _, p = stats.kstest(u, "uniform")
        assert p > 0.001

    def test_no_negative_coordinates_noop(self):
        w = Window(0, np.linspace(0.1, 0.9, 50))
        out, info = erase_negative_side(w, (-0.9, -0.1))
        assert np.array_equal(out.values, w.values)
        assert info["nu_indices"] == 0

    def test_no_safe_hits_fully_censored(self):
        w = Window(0, np.array([-0.05, 0.3, -0.02, 0.8]))
        out, info = erase_negative_side(w, (-0.9, -0.5))
        vals = np.asarray(out.values)
        assert np.isnan(vals[0]) and np.isnan(vals[2])
        assert info["censored"] == 2

    def test_translation_equivariance(self):
        w, zone = self.setup_window(3000)
        out0, _ = erase_negative_side(w, zone)
        out1, _ = erase_negative_side(w.shifted(11), zone)
        assert np.array_equal(out0.values, out1.values, equal_nan=True)


class TestLiftLambdaOnNegative:
    def make_window(self, n_coords=4000):
        fam = f_family(TypeIIISpec(LAM))
        mixed = mix_disjoint(fam, shift_family(fam, -1.0))
        return sample_density_window(mixed, (2, 2 + n_coords - 1), SeedStream(9))

    def test_positive_side_unchanged(self, hspec):
        w = self.make_window()
        out = lift_lambda_on_negative(w, hspec)
        keep = np.asarray(w.values) >= 0
        assert np.array_equal(np.asarray(out.values)[keep],
                              np.asarray(w.values)[keep])

    def test_negative_side_is_shifted_map(self, hspec):
        w = self.make_window()
        out = lift_lambda_on_negative(w, hspec)
        neg = np.asarray(w.values) < 0
        want = h_apply(hspec, np.asarray(w.values)[neg] + 1.0) - 1.0
        assert np.array_equal(np.asarray(out.values)[neg], want)

    def test_output_log_ratio_lattice(self, hspec):
        # after the lift the negative side follows the pushforward listing,
        # so generation ratios live on the joint (lam, lam') lattice
        from shiftlab import g_family
        lifted = mix_disjoint(f_family(TypeIIISpec(LAM)),
                              shift_family(g_family(hspec), -1.0))
        grid = {round(j * math.log(LAM) + jj * math.log(LAMP), 12)
                for j in (-2, -1, 0, 1, 2) for jj in (-2, -1, 0, 1, 2)}
        for n in (3, 8):
            for r in generation_log_ratios(lifted, n):
                assert min(abs(r - g) for g in grid) < 1e-9


class TestSafeZone:
    def test_density_flat_on_zone(self):
        ell_spec = TypeIIISpec(0.4)
        lo, hi = safe_zone(ell_spec)
        probes = np.linspace(lo + 1e-9, hi - 1e-9, 25)
        for n in range(-2, 40):
            assert np.all(f_density(ell_spec, n, probes) == 1.0)
