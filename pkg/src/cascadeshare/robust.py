"""Huber least-favorable robustification of stage feature models.

Early cascade stages use cheap, deliberately crude features, so their
conditional PMFs are trusted only up to a contamination neighborhood
described by four parameters (eps0, eps1, nu0, nu1).  The least-favorable
pair replaces the nominal conditionals with a three-branch piecewise
transform that clips the likelihood ratio to a window [l_lo, l_hi].  The
window endpoints are pinned by requiring both transformed PMFs to remain
properly normalized; this module solves that pair of equations by nested
bisection and applies the transform.

With eps0 == eps1 the transformed ratio lies exactly in [l_lo, l_hi]; for
asymmetric eps the ratio is the clipped nominal ratio scaled by
(1-eps1)/(1-eps0), which is what the branch algebra produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .models import Belief, ConditionalPmf, likelihood_ratios, posterior_update

_RESIDUAL_TOL = 1e-12
_RATIO_CAP = 1e30


class DegenerateUncertaintyError(ValueError):
    """Uncertainty too large for the nominal pair: no valid ratio window."""


@dataclass(frozen=True)
class UncertaintyParams:
    """Contamination levels (eps) and strengths (nu) per hypothesis."""

    eps0: float = 0.0
    eps1: float = 0.0
    nu0: float = 0.0
    nu1: float = 0.0

    def __post_init__(self):
        for name in ("eps0", "eps1", "nu0", "nu1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if self.eps0 >= 1.0 or self.eps1 >= 1.0:
            raise ValueError("eps0 and eps1 must be < 1")

    @property
    def is_zero(self) -> bool:
        return self.eps0 == self.eps1 == self.nu0 == self.nu1 == 0.0


@dataclass(frozen=True)
class Breakpoints:
    """Likelihood-ratio clipping window; l_hi may be +inf."""

    l_lo: float
    l_hi: float

    def __post_init__(self):
        if not 0.0 <= self.l_lo <= self.l_hi:
            raise ValueError(f"need 0 <= l_lo <= l_hi, got ({self.l_lo}, {self.l_hi})")


@dataclass(frozen=True)
class StageModel:
    """One stage of one application: nominal model, uncertainty, cost.

    `robust` and `breakpoints` are populated by `robustify_stage`; until
    then the stage carries only its nominal model.  `cost_mj` is the
    feature-extraction cost in millijoules per frame.
    """

    nominal: ConditionalPmf
    uncertainty: UncertaintyParams = UncertaintyParams()
    cost_mj: float = 0.0
    robust: Optional[ConditionalPmf] = None
    breakpoints: Optional[Breakpoints] = None

    def __post_init__(self):
        if self.cost_mj < 0:
            raise ValueError("cost_mj must be nonnegative")

    @property
    def effective(self) -> ConditionalPmf:
        """Robustified model when available, else the nominal one."""
        return self.nominal if self.robust is None else self.robust


def _transform_coeffs(u: UncertaintyParams) -> tuple[float, float, float, float]:
    # (mix_lo, cross_lo, mix_hi, cross_hi): mixing weights of the piecewise
    # transform; mix_lo drives the target-present lift on the low branch and
    # mix_hi the target-absent lift on the high branch.
    mix_lo = (u.eps1 + u.nu1) / (1.0 - u.eps1)
    cross_lo = u.nu0 / (1.0 - u.eps0)
    mix_hi = (u.eps0 + u.nu0) / (1.0 - u.eps0)
    cross_hi = u.nu1 / (1.0 - u.eps1)
    return mix_lo, cross_lo, mix_hi, cross_hi


def _lfd_pair(p0, p1, ratios, u: UncertaintyParams, l_lo: float, l_hi: float):
    """Apply the three-branch transform on the support arrays."""
    mix_lo, cross_lo, mix_hi, cross_hi = _transform_coeffs(u)
    low = ratios < l_lo
    high = ratios > l_hi

    q0 = (1.0 - u.eps0) * p0
    q1 = (1.0 - u.eps1) * p1
    if np.any(low):
        blend = mix_lo * p0[low] + cross_lo * p1[low]
        denom = mix_lo + cross_lo * l_lo
        q0[low] = (1.0 - u.eps0) * blend / denom
        q1[low] = (1.0 - u.eps1) * l_lo * blend / denom
    if np.any(high):
        blend = cross_hi * p0[high] + mix_hi * p1[high]
        if math.isinf(l_hi):
            # empty-window limit: only reachable when the high set is empty
            raise AssertionError("high branch with infinite l_hi")
        denom = cross_hi + mix_hi * l_hi
        q0[high] = (1.0 - u.eps0) * blend / denom
        q1[high] = (1.0 - u.eps1) * l_hi * blend / denom
    return q0, q1


def _bisect(residual, a: float, b: float, tol: float, max_iter: int = 200) -> float:
    """Find a sign change of `residual` on [a, b] (residual(a) and (b) straddle 0)."""
    ra, rb = residual(a), residual(b)
    if ra == 0.0:
        return a
    if rb == 0.0:
        return b
    if (ra > 0) == (rb > 0):
        raise DegenerateUncertaintyError("degenerate uncertainty: residual does not bracket a root")
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        rm = residual(mid)
        if abs(rm) <= tol or (b - a) <= 1e-15 * max(1.0, abs(mid)):
            return mid
        if (rm > 0) == (ra > 0):
            a, ra = mid, rm
        else:
            b, rb = mid, rm
    return 0.5 * (a + b)


def solve_breakpoints(nominal: ConditionalPmf, u: UncertaintyParams) -> Breakpoints:
    """Ratio-window endpoints making both least-favorable PMFs sum to one.

    The target-present normalization is monotone increasing in l_lo and the
    target-absent normalization is monotone decreasing in l_hi, so the pair
    is solved by an outer bisection on l_hi with an inner bisection on l_lo.
    Zero uncertainty returns the nominal ratio range (empty clip regions).
    Raises DegenerateUncertaintyError when no valid window exists.
    """
    support = nominal.support()
    p0 = nominal.p0[support].copy()
    p1 = nominal.p1[support].copy()
    ratios = likelihood_ratios(nominal)[support]
    finite = ratios[np.isfinite(ratios)]
    if finite.size == 0:
        raise DegenerateUncertaintyError("no finite likelihood ratios on support")
    lmin = float(ratios.min())
    lmax = float(ratios.max())  # may be +inf when p0 has empty bins

    if u.is_zero:
        return Breakpoints(lmin, lmax)

    mix_lo, _, mix_hi, _ = _transform_coeffs(u)

    def sums(l_lo, l_hi):
        q0, q1 = _lfd_pair(p0, p1, ratios, u, l_lo, l_hi)
        return q0.sum(), q1.sum()

    def solve_l_lo(l_hi):
        """Inner solve of the target-present normalization; None if infeasible."""
        if mix_lo == 0.0:
            return lmin  # q1 is untouched by the transform; empty low region
        def r1(l_lo):
            return sums(l_lo, l_hi)[1] - 1.0
        a = lmin
        if r1(a) >= 0.0:
            return a
        b = min(l_hi, max(2.0 * lmin, 1.0))
        while r1(b) < 0.0:
            if b >= l_hi or b >= _RATIO_CAP:
                return None
            b = min(l_hi, 10.0 * b)
        return _bisect(r1, a, b, _RESIDUAL_TOL)

    def outer_residual(l_hi):
        l_lo = solve_l_lo(l_hi)
        if l_lo is None:
            return None, 1.0  # q1 cannot normalize: window too low
        return l_lo, sums(l_lo, l_hi)[0] - 1.0

    if mix_hi == 0.0:
        # q0 is untouched by the transform: pin l_hi at the top of the range
        l_hi = lmax
        l_lo = solve_l_lo(l_hi)
        if l_lo is None:
            raise DegenerateUncertaintyError("degenerate uncertainty: target-present PMF cannot renormalize")
    else:
        # residual at the empty-high-region limit decides whether l_hi is finite
        if math.isinf(lmax):
            _, r_limit = outer_residual(math.inf)
            if r_limit is not None and abs(r_limit) <= 1e-9:
                l_lo = solve_l_lo(math.inf)
                return Breakpoints(float(l_lo), math.inf)
            b = 2.0 * float(finite.max())
        else:
            b = lmax
        l_lo_b, rb = outer_residual(b)
        while rb is None or rb > 0.0:
            if b >= _RATIO_CAP:
                raise DegenerateUncertaintyError("degenerate uncertainty: no finite l_hi normalizes the pair")
            b *= 10.0
            l_lo_b, rb = outer_residual(b)
        a = min(lmin, b)
        _, ra = outer_residual(a)
        while ra is not None and ra < 0.0:
            if a <= 1e-300:
                raise DegenerateUncertaintyError("degenerate uncertainty: too large for the nominal pair")
            a *= 0.1
            _, ra = outer_residual(a)

        def r0(l_hi):
            _, r = outer_residual(l_hi)
            return 1.0 if r is None else r

        l_hi = _bisect(r0, a, b, _RESIDUAL_TOL)
        l_lo = solve_l_lo(l_hi)
        if l_lo is None:
            raise DegenerateUncertaintyError("degenerate uncertainty: ratio window infeasible")

    s0, s1 = sums(l_lo, l_hi)
    if abs(s0 - 1.0) > 1e-9 or abs(s1 - 1.0) > 1e-9:
        raise DegenerateUncertaintyError(
            f"degenerate uncertainty: normalization failed (residuals {s0 - 1.0:.3g}, {s1 - 1.0:.3g})"
        )
    if l_lo > l_hi:
        raise DegenerateUncertaintyError("ratio window collapsed (l_lo > l_hi)")
    return Breakpoints(float(l_lo), float(l_hi))


def robustify(nominal: ConditionalPmf, u: UncertaintyParams, b: Breakpoints) -> ConditionalPmf:
    """Least-favorable PMF pair for the given window.

    Applies the three-branch transform bin-wise by nominal ratio; ties at
    exactly l_lo or l_hi fall in the middle (unclipped) branch.  The output
    is validated to stay normalized within 1e-9.
    """
    support = nominal.support()
    ratios = likelihood_ratios(nominal)[support]
    q0 = np.zeros(nominal.bins)
    q1 = np.zeros(nominal.bins)
    q0[support], q1[support] = _lfd_pair(
        nominal.p0[support].copy(), nominal.p1[support].copy(), ratios, u, b.l_lo, b.l_hi
    )
    if abs(q0.sum() - 1.0) > 1e-9 or abs(q1.sum() - 1.0) > 1e-9:
        raise DegenerateUncertaintyError("robustified PMFs are not normalized")
    return ConditionalPmf(p0=q0, p1=q1)


def robustify_stage(stage: StageModel) -> StageModel:
    """Stage with `robust` and `breakpoints` populated from its uncertainty."""
    b = solve_breakpoints(stage.nominal, stage.uncertainty)
    return replace(stage, robust=robustify(stage.nominal, stage.uncertainty, b), breakpoints=b)


def robustify_app_stages(stages) -> tuple[StageModel, ...]:
    """Robustify all intermediate stages; the final stage is trusted as-is.

    The last stage's uncertainty is forced to zero (its model is assumed
    adequate), so its robust model equals the nominal one and its window is
    the full nominal ratio range.
    """
    out = []
    for i, stage in enumerate(stages):
        if i == len(stages) - 1:
            stage = replace(stage, uncertainty=UncertaintyParams())
        out.append(robustify_stage(stage))
    return tuple(out)


def robustify_app(app) -> "AppConfig":
    """Copy of an application config with all stages robustified."""
    from dataclasses import replace as dc_replace

    return dc_replace(app, stages=robustify_app_stages(app.stages))


def posterior_bounds(pi_prev: Belief, b: Breakpoints) -> tuple[Belief, Belief]:
    """Reachable posterior interval after one update with a clipped ratio."""
    return (posterior_update(pi_prev, b.l_lo), posterior_update(pi_prev, b.l_hi))


def stage_model_to_json(stage: StageModel) -> dict:
    from .models import pmf_to_json

    doc = {
        "nominal": pmf_to_json(stage.nominal),
        "uncertainty": {
            "eps0": stage.uncertainty.eps0,
            "eps1": stage.uncertainty.eps1,
            "nu0": stage.uncertainty.nu0,
            "nu1": stage.uncertainty.nu1,
        },
        "cost_mJ": stage.cost_mj,
    }
    if stage.robust is not None:
        doc["robust"] = pmf_to_json(stage.robust)
    if stage.breakpoints is not None:
        doc["breakpoints"] = {"l_lo": stage.breakpoints.l_lo, "l_hi": stage.breakpoints.l_hi}
    return doc


def stage_model_from_json(doc: dict) -> StageModel:
    from .models import pmf_from_json

    nominal, _ = pmf_from_json(doc["nominal"])
    u = UncertaintyParams(**doc.get("uncertainty", {}))
    robust = None
    breakpoints = None
    if doc.get("robust") is not None:
        robust, _ = pmf_from_json(doc["robust"])
    if doc.get("breakpoints") is not None:
        breakpoints = Breakpoints(float(doc["breakpoints"]["l_lo"]), float(doc["breakpoints"]["l_hi"]))
    return StageModel(
        nominal=nominal,
        uncertainty=u,
        cost_mj=float(doc.get("cost_mJ", 0.0)),
        robust=robust,
        breakpoints=breakpoints,
    )
