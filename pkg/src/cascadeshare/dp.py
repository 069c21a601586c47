"""Backward threshold optimization over quantized belief grids.

Both applications are solved by finite-horizon value iteration on a belief
grid.  Stage values are piecewise-linear and concave in the belief, so
off-grid belief updates are handled by linear interpolation, which
preserves concavity.  The primary application is a plain optimal-stopping
cascade; the secondary application is solved on a product grid
(own belief x primary belief) with an availability flag: once the primary
is modeled as stopped, the free shared feature is gone for good and the
secondary falls back to its own feature chain.

Within a single stage transition the primary-belief coordinate of the
secondary tables is carried as a fixed parameter (per-column recursion);
the executed policy re-reads the live primary belief at every stage.  This
keeps the shared-feature and own-feature continuations exactly comparable
column by column, which is what makes the feature-sharing optimality
condition checkable per grid point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .models import AppConfig, Belief, ConditionalPmf, likelihood_ratios, posterior_update_array
from .robust import StageModel


@dataclass(frozen=True)
class Grid:
    """Sorted belief grid covering [0, 1]."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] != 0.0 or pts[-1] != 1.0:
            raise ValueError("grid must span [0, 1] exactly")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.size

    @classmethod
    def uniform(cls, m: int) -> "Grid":
        if m < 2:
            raise ValueError("need M >= 2")
        return cls(np.linspace(0.0, 1.0, m))

    @classmethod
    def from_points(cls, points) -> "Grid":
        """Grid from arbitrary belief values (0 and 1 are added if missing)."""
        pts = np.unique(np.concatenate([[0.0, 1.0], np.asarray(points, float).ravel()]))
        return cls(pts)


@dataclass(frozen=True)
class RiskBreakdown:
    """Additive decomposition of one application's system risk."""

    miss: float
    false_alarm: float
    weighted_resource: float

    @property
    def total(self) -> float:
        return self.miss + self.false_alarm + self.weighted_resource

    @property
    def detection(self) -> float:
        return self.miss + self.false_alarm


class _Transition:
    """Precomputed belief-transition tables for one feature on one grid.

    For every grid point and support bin: the evidence weight, the updated
    belief, and its linear-interpolation position on the target grid.
    """

    def __init__(self, grid: Grid, model: ConditionalPmf):
        support = model.support()
        ratios = likelihood_ratios(model)[support]
        g = grid.points
        self.grid = grid
        self.support = support
        self.p0 = model.p0[support]
        self.p1 = model.p1[support]
        # evidence weights e[m, y] and updated beliefs pi_next[m, y]
        self.evidence = g[:, None] * self.p1[None, :] + (1.0 - g)[:, None] * self.p0[None, :]
        pi_next = posterior_update_array(g[:, None], ratios[None, :])
        idx = np.searchsorted(g, pi_next, side="right") - 1
        idx = np.clip(idx, 0, grid.m - 2)
        span = g[idx + 1] - g[idx]
        self.pi_next = pi_next
        self.idx = idx
        self.w_hi = (pi_next - g[idx]) / span

    def expect(self, values: np.ndarray) -> np.ndarray:
        """E[V(pi_next)] per grid point for a 1-D value vector."""
        interp = values[self.idx] * (1.0 - self.w_hi) + values[self.idx + 1] * self.w_hi
        return np.einsum("my,my->m", self.evidence, interp)

    def expect_columns(self, table: np.ndarray) -> np.ndarray:
        """Column-wise E[V(pi_next, col)] for a (rows x cols) value table."""
        out = np.zeros_like(table)
        for y in range(self.support.size):
            lo = table[self.idx[:, y], :]
            hi = table[self.idx[:, y] + 1, :]
            mix = lo * (1.0 - self.w_hi[:, y])[:, None] + hi * self.w_hi[:, y][:, None]
            out += self.evidence[:, y][:, None] * mix
        return out

    def push(self, mass: np.ndarray) -> np.ndarray:
        """Adjoint of `expect`: propagate a belief mass vector one stage."""
        m = self.grid.m
        contrib = mass[:, None] * self.evidence
        lo = np.bincount(self.idx.ravel(), weights=(contrib * (1.0 - self.w_hi)).ravel(), minlength=m)
        hi = np.bincount((self.idx + 1).ravel(), weights=(contrib * self.w_hi).ravel(), minlength=m)
        return lo + hi

    def push_columns(self, mass2d: np.ndarray) -> np.ndarray:
        """Adjoint of `expect_columns`: propagate per-column mass tables."""
        out = np.zeros_like(mass2d)
        for y in range(self.support.size):
            contrib = mass2d * self.evidence[:, y][:, None]
            np.add.at(out, self.idx[:, y], contrib * (1.0 - self.w_hi[:, y])[:, None])
            np.add.at(out, self.idx[:, y] + 1, contrib * self.w_hi[:, y][:, None])
        return out


def _require_robustified(stages: Sequence[StageModel]):
    for i, stage in enumerate(stages):
        if stage.breakpoints is None or stage.robust is None:
            raise ValueError(f"stage {i + 1} has not been robustified")


def stage_belief_bounds(stages: Sequence[StageModel], prior: Belief) -> list[tuple[float, float]]:
    """Reachable-belief envelope per stage, from the clipped ratio windows.

    Entry i (i = 0..K) bounds the belief after i features; entry 0 is the
    prior itself.  The final stage is not robustified, so its window is the
    nominal ratio range and the last envelope may reach 0 or 1.
    """
    bounds = [(float(prior), float(prior))]
    lo, hi = float(prior), float(prior)
    for stage in stages:
        b = stage.breakpoints
        lo = float(posterior_update_array(lo, b.l_lo))
        hi = float(posterior_update_array(hi, b.l_hi))
        bounds.append((lo, hi))
    return bounds


def _clamp(value: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, value))


def _stop_threshold(grid: Grid, stop_vals: np.ndarray, cont_vals: np.ndarray) -> float:
    """Smallest grid point where continuing strictly beats stopping (+inf if none)."""
    better = cont_vals < stop_vals
    if not better.any():
        return np.inf
    return float(grid.points[int(np.argmax(better))])


@dataclass
class PrimaryResult:
    """Value tables and policy of the primary application."""

    grid: Grid
    lam: float
    values: np.ndarray        # (K+1, M): stage i value on the grid
    cont_values: np.ndarray   # (K-1, M): continuation branch at stages 1..K-1
    thresholds: np.ndarray    # (K,): stop thresholds tau_1..tau_K (clamped)
    continue_mask: np.ndarray  # (K-1, M) bool: optimal action is to keep going
    declare_mask: np.ndarray  # (M,) bool: final-stage positive declaration
    bounds: list              # (K+1) reachable-belief envelope

    @property
    def k(self) -> int:
        return self.values.shape[0] - 1

    def value_at(self, pi: Belief) -> float:
        return float(np.interp(pi, self.grid.points, self.values[0]))


def optimize_primary(app: AppConfig, lam: float, grid: Grid) -> PrimaryResult:
    """Backward value iteration for the primary cascade.

    The final stage value is the Bayes envelope min(C_M*pi, C_A*(1-pi));
    intermediate stages compare stopping against the resource-priced
    expected next-stage value.  Thresholds are the smallest grid points
    where continuing strictly wins, clamped to the stage envelope.  Exact
    ties prefer the continue/positive branch.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    _require_robustified(app.stages)
    k = app.k
    b = grid.points
    cm, ca = app.miss_cost, app.fa_cost
    bounds = stage_belief_bounds(app.stages, app.prior)

    values = np.zeros((k + 1, grid.m))
    values[k] = np.minimum(cm * b, ca * (1.0 - b))
    declare_mask = ca * (1.0 - b) <= cm * b
    thresholds = np.zeros(k)
    thresholds[k - 1] = app.fa_cost / (app.fa_cost + app.miss_cost)
    cont_values = np.zeros((max(k - 1, 0), grid.m))
    continue_mask = np.zeros((max(k - 1, 0), grid.m), dtype=bool)

    for i in range(k - 1, 0, -1):
        stage = app.stages[i]  # feature consumed when continuing from stage i
        trans = _Transition(grid, stage.effective)
        cont = lam * stage.cost_mj + trans.expect(values[i + 1])
        stop = cm * b
        values[i] = np.minimum(stop, cont)
        cont_values[i - 1] = cont
        continue_mask[i - 1] = cont <= stop
        lo, hi = bounds[i]
        thresholds[i - 1] = _clamp(_stop_threshold(grid, stop, cont), lo, hi)

    first = _Transition(grid, app.stages[0].effective)
    values[0] = lam * app.stages[0].cost_mj + first.expect(values[1])
    return PrimaryResult(grid, lam, values, cont_values, thresholds, continue_mask, declare_mask, bounds)


# secondary action codes in the with-branch tables
STOP, USE_SHARED, USE_OWN = 0, 1, 2


@dataclass
class SecondaryResult:
    """Value tables and policy of the secondary application.

    `with_values[i]` is the (own-belief x primary-belief) table while the
    primary is still running; columns where the primary stops at stage i
    hold the fallback (without) values.  `without_values` is the solo chain
    once the primary is gone; its stage-0 entry is the no-sharing value
    (first own feature forced).
    """

    grid2: Grid
    grid1: Grid
    lam: float
    with_values: np.ndarray      # (K+1, M2, M1)
    without_values: np.ndarray   # (K+1, M2)
    shared_cont: np.ndarray      # (K, M2, M1): E[V(next) | shared feature], no cost
    own_cont: np.ndarray         # (K, M2, M1): E[V(next) | own feature], cost excluded
    actions_with: np.ndarray     # (K-1, M2, M1) int8 in {STOP, USE_SHARED, USE_OWN}
    actions_without: np.ndarray  # (K-1, M2) bool: continue with own feature
    declare_mask: np.ndarray     # (M2,) final positive declaration
    delta0: np.ndarray           # (M2, M1) int8 in {USE_SHARED, USE_OWN}
    final_threshold: float
    eta: np.ndarray              # (K-1, M1): with-branch stop thresholds per column
    tau_without: np.ndarray      # (K-1,)
    bounds2: list
    primary_continue: np.ndarray  # (K-1, M1) bool, copied from the primary policy

    @property
    def k(self) -> int:
        return self.without_values.shape[0] - 1

    def value_at(self, pi2: Belief, pi1: Belief) -> float:
        b1 = self.grid1.points
        j = min(int(np.searchsorted(b1, pi1, side="right")) - 1, self.grid1.m - 2)
        j = max(j, 0)
        t = (pi1 - b1[j]) / (b1[j + 1] - b1[j])
        v0 = np.interp(pi2, self.grid2.points, self.with_values[0][:, j])
        v1 = np.interp(pi2, self.grid2.points, self.with_values[0][:, j + 1])
        return float((1.0 - t) * v0 + t * v1)

    def ablation_value_at(self, pi2: Belief) -> float:
        """No-sharing value: the secondary never touches the shared feature."""
        return float(np.interp(pi2, self.grid2.points, self.without_values[0]))


def optimize_secondary(
    app2: AppConfig,
    shared_stages: Sequence[StageModel],
    primary: PrimaryResult,
    lam: float,
    grid2: Optional[Grid] = None,
) -> SecondaryResult:
    """Backward value iteration for the secondary application.

    `shared_stages` holds, per stage, the secondary's likelihood model for
    the primary feature (robustified like any other intermediate-stage
    model).  While the primary keeps running, the secondary may consume the
    already-extracted primary feature at zero marginal cost or pay for its
    own feature; once the primary stops, only the own-feature chain is left.
    """
    if len(shared_stages) != app2.k:
        raise ValueError("need one shared-feature model per stage")
    if primary.k != app2.k:
        raise ValueError("both applications must have the same number of stages")
    _require_robustified(app2.stages)
    _require_robustified(shared_stages)

    grid2 = primary.grid if grid2 is None else grid2
    grid1 = primary.grid
    k = app2.k
    b2 = grid2.points
    cm, ca = app2.miss_cost, app2.fa_cost
    m2, m1 = grid2.m, grid1.m

    # pi2 envelope: each stage may use either feature, so take the union window
    bounds2 = [(float(app2.prior), float(app2.prior))]
    lo, hi = bounds2[0]
    for own, sh in zip(app2.stages, shared_stages):
        l_lo = min(own.breakpoints.l_lo, sh.breakpoints.l_lo)
        l_hi = max(own.breakpoints.l_hi, sh.breakpoints.l_hi)
        lo = float(posterior_update_array(lo, l_lo))
        hi = float(posterior_update_array(hi, l_hi))
        bounds2.append((lo, hi))

    with_values = np.zeros((k + 1, m2, m1))
    without_values = np.zeros((k + 1, m2))
    shared_cont = np.zeros((k, m2, m1))
    own_cont = np.zeros((k, m2, m1))
    actions_with = np.zeros((max(k - 1, 0), m2, m1), dtype=np.int8)
    actions_without = np.zeros((max(k - 1, 0), m2), dtype=bool)
    eta = np.zeros((max(k - 1, 0), m1))
    tau_without = np.zeros(max(k - 1, 0))

    final = np.minimum(cm * b2, ca * (1.0 - b2))
    without_values[k] = final
    with_values[k] = final[:, None]
    declare_mask = ca * (1.0 - b2) <= cm * b2
    final_threshold = app2.fa_cost / (app2.fa_cost + app2.miss_cost)

    for i in range(k - 1, -1, -1):
        own = app2.stages[i]
        sh = shared_stages[i]
        t_own = _Transition(grid2, own.effective)
        t_shared = _Transition(grid2, sh.effective)

        cont_wo = lam * own.cost_mj + t_own.expect(without_values[i + 1])
        f1 = t_shared.expect_columns(with_values[i + 1])
        f2 = t_own.expect_columns(with_values[i + 1])
        shared_cont[i] = f1
        own_cont[i] = f2

        if i == 0:
            # no stop action before the first observation
            without_values[0] = cont_wo
            with_values[0] = np.minimum(f1, lam * own.cost_mj + f2)
            continue

        stop = cm * b2
        without_values[i] = np.minimum(stop, cont_wo)
        actions_without[i - 1] = cont_wo <= stop
        lo, hi = bounds2[i]
        tau_without[i - 1] = _clamp(_stop_threshold(grid2, stop, cont_wo), lo, hi)

        avail = primary.continue_mask[i - 1]
        best_cont = np.minimum(f1, lam * own.cost_mj + f2)
        table = np.minimum(stop[:, None], best_cont)
        table[:, ~avail] = without_values[i][:, None]
        with_values[i] = table

        act = np.where(
            best_cont <= stop[:, None],
            np.where(f1 <= lam * own.cost_mj + f2, USE_SHARED, USE_OWN),
            STOP,
        ).astype(np.int8)
        fallback = np.where(actions_without[i - 1], USE_OWN, STOP).astype(np.int8)
        act[:, ~avail] = fallback[:, None]
        actions_with[i - 1] = act

        for j in range(m1):
            if avail[j]:
                eta[i - 1, j] = _clamp(_stop_threshold(grid2, stop, best_cont[:, j]), lo, hi)
            else:
                eta[i - 1, j] = tau_without[i - 1]

    delta0 = np.where(shared_cont[0] <= lam * app2.stages[0].cost_mj + own_cont[0], USE_SHARED, USE_OWN).astype(np.int8)
    return SecondaryResult(
        grid2, grid1, lam, with_values, without_values, shared_cont, own_cont,
        actions_with, actions_without, declare_mask, delta0, final_threshold,
        eta, tau_without, bounds2, primary.continue_mask.copy(),
    )


@dataclass(frozen=True)
class SharingCheck:
    """Per-stage feature-sharing optimality check (decision at stage-1 index)."""

    stage: int            # feature index i = 1..K (decision taken at stage i-1)
    passes: bool
    worst_margin: float   # max over grid of E[V|shared] - E[V|own] - lam*D; <= 0 passes
    reference_margin: float  # miss-cost-weighted posterior-difference form (report only)


def check_sharing_condition(result: SecondaryResult, app2: AppConfig, shared_stages, tol: float = 0.0):
    """Evaluate, per stage, whether taking the shared feature is always optimal.

    The operative inequality compares the two continuation expectations
    directly against the priced own-feature cost at every grid cell where
    the shared feature is actually on offer; with the default zero
    tolerance a pass guarantees the optimizer never selects the own
    feature there (ties prefer sharing).  The miss-cost-weighted
    posterior-difference bound is reported alongside for reference; under
    each feature's own evidence measure both expectations are martingales,
    so that form is ~0 and carries no information.
    """
    checks = []
    lam = result.lam
    for i in range(result.k):
        diff = result.shared_cont[i] - result.own_cont[i]
        if i == 0:
            worst = float(diff.max())
        else:
            avail = result.primary_continue[i - 1]
            worst = float(diff[:, avail].max()) if avail.any() else float("-inf")
        worst -= lam * app2.stages[i].cost_mj

        t_own = _Transition(result.grid2, app2.stages[i].effective)
        t_shared = _Transition(result.grid2, shared_stages[i].effective)
        e_shared = np.einsum("my,my->m", t_shared.evidence, t_shared.pi_next)
        e_own = np.einsum("my,my->m", t_own.evidence, t_own.pi_next)
        ref = float((app2.miss_cost * (e_shared - e_own)).max()) - lam * app2.stages[i].cost_mj

        checks.append(SharingCheck(i + 1, bool(worst <= tol), worst, ref))
    return checks


def check_cascade_optimality(values: np.ndarray, grid: Grid, fa_cost: float, bounds) -> list[bool]:
    """Would an added early-positive action ever fire?  True means never.

    For each intermediate stage, finds the largest grid belief where the
    stage value still beats an immediate positive declaration; the cascade
    form is optimal at that stage iff this point exceeds the stage's
    reachable upper belief bound.
    """
    k = values.shape[0] - 1
    b = grid.points
    out = []
    for i in range(1, k):
        no_positive = values[i] - fa_cost * (1.0 - b) < 0
        if not no_positive.any():
            out.append(False)
            continue
        largest = float(b[np.flatnonzero(no_positive).max()])
        out.append(bool(largest > bounds[i][1]))
    return out


def cascade_optimality_primary(result: PrimaryResult, app: AppConfig) -> list[bool]:
    return check_cascade_optimality(result.values, result.grid, app.fa_cost, result.bounds)


def cascade_optimality_secondary(result: SecondaryResult, app2: AppConfig) -> list[bool]:
    """Worst case over the solo chain and every primary-belief column."""
    k = result.k
    solo = check_cascade_optimality(result.without_values, result.grid2, app2.fa_cost, result.bounds2)
    out = list(solo)
    b = result.grid2.points
    for i in range(1, k):
        no_positive = result.with_values[i] - app2.fa_cost * (1.0 - b)[:, None] < 0
        ok = True
        for j in range(result.grid1.m):
            col = no_positive[:, j]
            if not col.any():
                ok = False
                break
            if float(b[np.flatnonzero(col).max()]) <= result.bounds2[i][1]:
                ok = False
                break
        out[i - 1] = bool(out[i - 1] and ok)
    return out


def forward_primary(result: PrimaryResult, app: AppConfig):
    """Exact forward propagation of the primary policy on the grid.

    Mirrors the backward pass (same transition tables, adjoint scatter), so
    the accumulated total reproduces the stage-0 value up to roundoff.
    Returns the risk breakdown, the expected extraction energy in mJ, and
    the per-stage continuation probabilities.
    """
    grid = result.grid
    b = grid.points
    k = result.k
    cm, ca = app.miss_cost, app.fa_cost

    mass = np.zeros(grid.m)
    idx = min(np.searchsorted(b, app.prior, side="right") - 1, grid.m - 2)
    w = (app.prior - b[idx]) / (b[idx + 1] - b[idx])
    mass[idx] += 1.0 - w
    mass[idx + 1] += w

    energy = app.stages[0].cost_mj  # first feature is always extracted
    cont_probs = []
    miss = 0.0
    mass = _Transition(grid, app.stages[0].effective).push(mass)
    for i in range(1, k):
        go = result.continue_mask[i - 1]
        stopped = mass * ~go
        miss += cm * float(stopped @ b)
        moving = mass * go
        p_cont = float(moving.sum())
        cont_probs.append(p_cont)
        energy += app.stages[i].cost_mj * p_cont
        mass = _Transition(grid, app.stages[i].effective).push(moving)
    pos = result.declare_mask
    miss += cm * float((mass * ~pos) @ b)
    fa = ca * float((mass * pos) @ (1.0 - b))
    breakdown = RiskBreakdown(miss, fa, result.lam * energy)
    return breakdown, energy, np.asarray(cont_probs)


def forward_secondary(result: SecondaryResult, app2: AppConfig, shared_stages, prior1: Belief):
    """Forward propagation of the secondary policy, mirroring its DP kernels.

    Carries a joint (own-belief x primary-column) mass for the with-branch
    and a marginal mass for the without-branch; columns where the primary
    policy stops hand their mass to the without-branch.  Returns the risk
    breakdown, the expected own-feature energy, and the per-decision-stage
    probabilities of paying for the own feature.
    """
    g2, g1 = result.grid2, result.grid1
    b2, b1 = g2.points, g1.points
    k = result.k
    cm, ca = app2.miss_cost, app2.fa_cost
    lam = result.lam

    mass = np.zeros((g2.m, g1.m))
    i2 = min(np.searchsorted(b2, app2.prior, side="right") - 1, g2.m - 2)
    w2 = (app2.prior - b2[i2]) / (b2[i2 + 1] - b2[i2])
    j1 = min(np.searchsorted(b1, prior1, side="right") - 1, g1.m - 2)
    w1 = (prior1 - b1[j1]) / (b1[j1 + 1] - b1[j1])
    for di, wi in ((0, 1.0 - w2), (1, w2)):
        for dj, wj in ((0, 1.0 - w1), (1, w1)):
            mass[i2 + di, j1 + dj] += wi * wj

    energy = 0.0
    own_probs = []
    miss = 0.0

    t_own0 = _Transition(g2, app2.stages[0].effective)
    t_sh0 = _Transition(g2, shared_stages[0].effective)
    f2_mass = mass * (result.delta0 == USE_OWN)
    f1_mass = mass * (result.delta0 == USE_SHARED)
    p_own = float(f2_mass.sum())
    own_probs.append(p_own)
    energy += app2.stages[0].cost_mj * p_own
    mass = t_sh0.push_columns(f1_mass) + t_own0.push_columns(f2_mass)
    mass_without = np.zeros(g2.m)

    for i in range(1, k):
        avail = result.primary_continue[i - 1]
        mass_without = mass_without + mass[:, ~avail].sum(axis=1)
        mass[:, ~avail] = 0.0

        go_wo = result.actions_without[i - 1]
        miss += cm * float((mass_without * ~go_wo) @ b2)
        moving_wo = mass_without * go_wo

        act = result.actions_with[i - 1]
        stop_mass = mass * (act == STOP)
        miss += cm * float(stop_mass.sum(axis=1) @ b2)
        f1_mass = mass * (act == USE_SHARED)
        f2_mass = mass * (act == USE_OWN)

        p_own = float(f2_mass.sum() + moving_wo.sum())
        own_probs.append(p_own)
        energy += app2.stages[i].cost_mj * p_own

        t_own = _Transition(g2, app2.stages[i].effective)
        t_sh = _Transition(g2, shared_stages[i].effective)
        mass = t_sh.push_columns(f1_mass) + t_own.push_columns(f2_mass)
        mass_without = t_own.push(moving_wo)

    pos = result.declare_mask
    total2 = mass.sum(axis=1) + mass_without
    miss += cm * float((total2 * ~pos) @ b2)
    fa = ca * float((total2 * pos) @ (1.0 - b2))
    breakdown = RiskBreakdown(miss, fa, lam * energy)
    return breakdown, energy, np.asarray(own_probs)


def eval_policy_risk(
    primary_result: PrimaryResult,
    app: AppConfig,
    secondary_result: Optional[SecondaryResult] = None,
    app2: Optional[AppConfig] = None,
    shared_stages=None,
) -> dict:
    """Risk breakdowns per application under the design measure.

    The forward pass uses the same transition tables and tie rules as the
    backward optimization, so each total matches the corresponding stage-0
    value up to floating-point roundoff.
    """
    out = {}
    breakdown, energy, cont = forward_primary(primary_result, app)
    out["primary"] = breakdown
    out["primary_energy_mJ"] = energy
    out["primary_continue_probs"] = cont
    if secondary_result is not None:
        if app2 is None or shared_stages is None:
            raise ValueError("secondary evaluation needs app2 and shared_stages")
        b2, e2, own = forward_secondary(secondary_result, app2, shared_stages, app.prior)
        out["secondary"] = b2
        out["secondary_energy_mJ"] = e2
        out["secondary_own_probs"] = own
    return out
