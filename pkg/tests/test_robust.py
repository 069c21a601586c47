"""Least-favorable density construction and ratio-window solving."""

import numpy as np
import pytest

from cascadeshare.models import ConditionalPmf, likelihood_ratios, posterior_update
from cascadeshare.robust import (
    Breakpoints,
    DegenerateUncertaintyError,
    StageModel,
    UncertaintyParams,
    posterior_bounds,
    robustify,
    robustify_app_stages,
    robustify_stage,
    solve_breakpoints,
)

from conftest import random_pmf, random_uncertainty


def grid_search_breakpoints(model, u, rounds=6, width=160):
    """Independent oracle: iterative dense 2-D grid search on (l_lo, l_hi).

    Re-implements the three-branch transform from scratch and minimizes the
    sum of absolute normalization residuals over a (l_lo, l_hi) grid; each
    round zooms into the best cell of the previous one.
    """
    sup = model.support()
    p0, p1 = model.p0[sup], model.p1[sup]
    with np.errstate(divide="ignore"):
        r = np.where(p0 > 0, p1 / p0, np.inf)
    v_lo = (u.eps1 + u.nu1) / (1 - u.eps1)
    w_lo = u.nu0 / (1 - u.eps0)
    v_hi = (u.eps0 + u.nu0) / (1 - u.eps0)
    w_hi = u.nu1 / (1 - u.eps1)

    def residual_grid(los, his):
        # shapes: bins x |los| x |his|
        llo = los[None, :, None]
        lhi = his[None, None, :]
        pb0 = p0[:, None, None]
        pb1 = p1[:, None, None]
        rb = r[:, None, None]
        low = rb < llo
        high = rb > lhi
        blend_lo = (v_lo * pb0 + w_lo * pb1) / (v_lo + w_lo * llo)
        blend_hi = (w_hi * pb0 + v_hi * pb1) / (w_hi + v_hi * lhi)
        q0 = np.where(low, (1 - u.eps0) * blend_lo,
                      np.where(high, (1 - u.eps0) * blend_hi, (1 - u.eps0) * pb0))
        q1 = np.where(low, (1 - u.eps1) * llo * blend_lo,
                      np.where(high, (1 - u.eps1) * lhi * blend_hi, (1 - u.eps1) * pb1))
        res = np.abs(q0.sum(axis=0) - 1.0) + np.abs(q1.sum(axis=0) - 1.0)
        return np.where(llo[0] <= lhi[0], res, np.inf)

    lo_range = (max(r.min() * 0.5, 1e-6), float(np.max(r[np.isfinite(r)])))
    hi_range = (float(r.min()), float(np.max(r[np.isfinite(r)])) * 2.0)
    best = None
    for _ in range(rounds):
        los = np.linspace(*lo_range, width)
        his = np.linspace(*hi_range, width)
        res = residual_grid(los, his)
        i, j = np.unravel_index(np.argmin(res), res.shape)
        best = (float(los[i]), float(his[j]))
        span_lo = (lo_range[1] - lo_range[0]) / width * 3
        span_hi = (hi_range[1] - hi_range[0]) / width * 3
        lo_range = (best[0] - span_lo, best[0] + span_lo)
        hi_range = (best[1] - span_hi, best[1] + span_hi)
    return best


class TestZeroUncertainty:
    def test_breakpoints_are_ratio_range(self, rng):
        m = random_pmf(rng, 5)
        b = solve_breakpoints(m, UncertaintyParams())
        r = likelihood_ratios(m)
        assert b.l_lo == float(np.nanmin(r))
        assert b.l_hi == float(np.nanmax(r))

    def test_identity_transform(self, rng):
        m = random_pmf(rng, 6)
        u = UncertaintyParams()
        out = robustify(m, u, solve_breakpoints(m, u))
        np.testing.assert_allclose(out.p0, m.p0, atol=1e-12)
        np.testing.assert_allclose(out.p1, m.p1, atol=1e-12)


class TestSymmetricBinary:
    def test_window_is_reciprocal_pair(self):
        """Mirror-symmetric binary model with pure eps-contamination.

        Both normalizations decouple and have closed forms; the window
        endpoints are reciprocal by the hypothesis-swap symmetry.
        """
        eps = 0.1
        m = ConditionalPmf(p0=[0.8, 0.2], p1=[0.2, 0.8])
        b = solve_breakpoints(m, UncertaintyParams(eps0=eps, eps1=eps))
        l_lo_expected = (0.2 + 0.8 * eps) / (0.8 * (1 - eps))
        l_hi_expected = (0.8 * (1 - eps)) / (0.2 + 0.8 * eps)
        assert b.l_lo == pytest.approx(l_lo_expected, abs=1e-10)
        assert b.l_hi == pytest.approx(l_hi_expected, abs=1e-10)
        assert b.l_lo * b.l_hi == pytest.approx(1.0, abs=1e-9)


class TestGridSearchOracle:
    def test_three_bin_example(self):
        m = ConditionalPmf(p0=[0.7, 0.2, 0.1], p1=[0.1, 0.2, 0.7])
        u = UncertaintyParams(0.1, 0.1, 0.1, 0.1)
        b = solve_breakpoints(m, u)
        lo, hi = grid_search_breakpoints(m, u)
        assert b.l_lo == pytest.approx(lo, abs=1e-6)
        assert b.l_hi == pytest.approx(hi, abs=1e-6)

    def test_three_bin_transform_matches_direct_evaluation(self):
        """Robustified PMFs recomputed branch-by-branch at oracle breakpoints."""
        m = ConditionalPmf(p0=[0.7, 0.2, 0.1], p1=[0.1, 0.2, 0.7])
        u = UncertaintyParams(0.1, 0.1, 0.1, 0.1)
        b = solve_breakpoints(m, u)
        out = robustify(m, u, b)

        v_lo = (u.eps1 + u.nu1) / (1 - u.eps1)
        w_lo = u.nu0 / (1 - u.eps0)
        v_hi = (u.eps0 + u.nu0) / (1 - u.eps0)
        w_hi = u.nu1 / (1 - u.eps1)
        for y in range(3):
            l = m.p1[y] / m.p0[y]
            if l < b.l_lo:
                blend = v_lo * m.p0[y] + w_lo * m.p1[y]
                q0 = (1 - u.eps0) * blend / (v_lo + w_lo * b.l_lo)
                q1 = (1 - u.eps1) * b.l_lo * blend / (v_lo + w_lo * b.l_lo)
            elif l > b.l_hi:
                blend = w_hi * m.p0[y] + v_hi * m.p1[y]
                q0 = (1 - u.eps0) * blend / (w_hi + v_hi * b.l_hi)
                q1 = (1 - u.eps1) * b.l_hi * blend / (w_hi + v_hi * b.l_hi)
            else:
                q0 = (1 - u.eps0) * m.p0[y]
                q1 = (1 - u.eps1) * m.p1[y]
            assert out.p0[y] == pytest.approx(q0, abs=1e-12)
            assert out.p1[y] == pytest.approx(q1, abs=1e-12)

    def test_random_models_agree_with_grid_search(self, rng):
        done = 0
        while done < 8:
            m = random_pmf(rng, int(rng.integers(2, 5)))
            u = random_uncertainty(rng, scale=0.08)
            try:
                b = solve_breakpoints(m, u)
            except DegenerateUncertaintyError:
                continue
            lo, hi = grid_search_breakpoints(m, u)
            assert b.l_lo == pytest.approx(lo, abs=1e-6)
            assert b.l_hi == pytest.approx(hi, abs=1e-6)
            done += 1


class TestInvariants:
    def test_normalization(self, rng):
        done = 0
        while done < 25:
            m = random_pmf(rng, int(rng.integers(2, 9)))
            u = random_uncertainty(rng, scale=0.08)
            try:
                out = robustify(m, u, solve_breakpoints(m, u))
            except DegenerateUncertaintyError:
                continue
            assert abs(out.p0.sum() - 1.0) < 1e-9
            assert abs(out.p1.sum() - 1.0) < 1e-9
            done += 1

    def test_ratio_clipped_for_symmetric_eps(self, rng):
        """With eps0 == eps1 the transformed ratio lies exactly in the window."""
        done = 0
        while done < 25:
            m = random_pmf(rng, int(rng.integers(2, 9)))
            e = float(rng.random() * 0.08)
            u = UncertaintyParams(e, e, float(rng.random() * 0.08), float(rng.random() * 0.08))
            try:
                b = solve_breakpoints(m, u)
                out = robustify(m, u, b)
            except DegenerateUncertaintyError:
                continue
            r = likelihood_ratios(out)
            r = r[~np.isnan(r)]
            assert np.all(r >= b.l_lo - 1e-9)
            assert np.all(r <= b.l_hi + 1e-9)
            done += 1

    def test_asymmetric_eps_scales_the_clip(self):
        """Unequal contamination levels rescale the clipped ratio by
        (1-eps1)/(1-eps0); the window then bounds ratio/(scale)."""
        m = ConditionalPmf(p0=[0.6, 0.3, 0.1], p1=[0.1, 0.3, 0.6])
        u = UncertaintyParams(eps0=0.12, eps1=0.03, nu0=0.05, nu1=0.05)
        b = solve_breakpoints(m, u)
        out = robustify(m, u, b)
        scale = (1 - u.eps1) / (1 - u.eps0)
        nominal = likelihood_ratios(m)
        expected = scale * np.clip(nominal, b.l_lo, b.l_hi)
        np.testing.assert_allclose(likelihood_ratios(out), expected, rtol=1e-9)

    def test_monotone_degradation(self):
        """Enlarging any uncertainty parameter weakly shrinks the window."""
        m = ConditionalPmf(p0=[0.7, 0.2, 0.1], p1=[0.1, 0.2, 0.7])
        base_vals = (0.02, 0.05, 0.08)
        for axis in range(4):
            prev = None
            for v in base_vals:
                params = [0.02] * 4
                params[axis] = v
                b = solve_breakpoints(m, UncertaintyParams(*params))
                if prev is not None:
                    assert b.l_lo >= prev.l_lo - 1e-9
                    assert b.l_hi <= prev.l_hi + 1e-9
                prev = b

    def test_robust_posteriors_stay_inside_bounds(self, rng):
        done = 0
        while done < 20:
            m = random_pmf(rng, int(rng.integers(2, 7)))
            e = float(rng.random() * 0.08)
            u = UncertaintyParams(e, e, float(rng.random() * 0.08), float(rng.random() * 0.08))
            try:
                b = solve_breakpoints(m, u)
                out = robustify(m, u, b)
            except DegenerateUncertaintyError:
                continue
            pi = float(rng.uniform(0.05, 0.95))
            lo, hi = posterior_bounds(pi, b)
            ratios = likelihood_ratios(out)
            for r in ratios[~np.isnan(ratios)]:
                p = posterior_update(pi, r)
                assert lo - 1e-9 <= p <= hi + 1e-9
            done += 1


class TestPosteriorBounds:
    def test_direct_arithmetic(self):
        lo, hi = posterior_bounds(0.5, Breakpoints(1 / 3, 3.0))
        assert lo == pytest.approx(0.25, abs=1e-12)
        assert hi == pytest.approx(0.75, abs=1e-12)

    def test_collapsed_window(self):
        lo, hi = posterior_bounds(0.3, Breakpoints(1.0, 1.0))
        assert lo == hi == pytest.approx(0.3, abs=1e-15)

    def test_composition_with_solver(self):
        m = ConditionalPmf(p0=[0.7, 0.2, 0.1], p1=[0.1, 0.2, 0.7])
        u = UncertaintyParams(0.1, 0.1, 0.1, 0.1)
        lo_o, hi_o = grid_search_breakpoints(m, u)
        lo, hi = posterior_bounds(0.1, solve_breakpoints(m, u))
        assert lo == pytest.approx(posterior_update(0.1, lo_o), abs=1e-7)
        assert hi == pytest.approx(posterior_update(0.1, hi_o), abs=1e-7)


class TestDegenerate:
    def test_large_uncertainty_rejected(self):
        # weakly informative model: 10% contamination makes the classes overlap
        m = ConditionalPmf(
            p0=[0.33136064, 0.18618434, 0.40601912, 0.0764359],
            p1=[0.31661612, 0.24591873, 0.29152748, 0.14593767],
        )
        with pytest.raises(DegenerateUncertaintyError, match="degenerate"):
            solve_breakpoints(m, UncertaintyParams(0.1, 0.1, 0.08, 0.02))

    def test_symmetric_binary_degeneracy_threshold(self):
        # closed form: solvable iff eps <= 0.375 for this model
        m = ConditionalPmf(p0=[0.8, 0.2], p1=[0.2, 0.8])
        solve_breakpoints(m, UncertaintyParams(eps0=0.37, eps1=0.37))
        with pytest.raises(DegenerateUncertaintyError):
            solve_breakpoints(m, UncertaintyParams(eps0=0.39, eps1=0.39))


class TestStagePipeline:
    def test_final_stage_never_robustified(self, rng):
        stages = (
            StageModel(nominal=random_pmf(rng, 4), uncertainty=UncertaintyParams(0.05, 0.05, 0.0, 0.0)),
            StageModel(nominal=random_pmf(rng, 4), uncertainty=UncertaintyParams(0.2, 0.2, 0.2, 0.2)),
        )
        out = robustify_app_stages(stages)
        assert out[-1].uncertainty.is_zero
        np.testing.assert_array_equal(out[-1].robust.p0, out[-1].nominal.p0)
        np.testing.assert_array_equal(out[-1].robust.p1, out[-1].nominal.p1)
        # intermediate stage did get transformed
        assert not np.allclose(out[0].robust.p0, out[0].nominal.p0)

    def test_stage_json_roundtrip(self, rng):
        from cascadeshare.robust import stage_model_from_json, stage_model_to_json

        stage = robustify_stage(
            StageModel(nominal=random_pmf(rng, 3), uncertainty=UncertaintyParams(0.05, 0.05, 0.02, 0.02), cost_mj=1.5)
        )
        doc = stage_model_to_json(stage)
        back = stage_model_from_json(doc)
        np.testing.assert_array_equal(back.robust.p0, stage.robust.p0)
        assert back.breakpoints == stage.breakpoints
        assert back.cost_mj == stage.cost_mj
