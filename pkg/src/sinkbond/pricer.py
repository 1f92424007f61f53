"""Bond valuations on the intensity lattice.

Zero-coupon and vanilla coupon bonds run as plain backward recursions;
sinking bonds run through the decision engine, which also evaluates forced
redemption schedules.  The z-spread and the worst-case callable quote are the
deterministic-intensity special cases: a single-chain lattice with constant
intensity z and zero recovery reproduces discounting at r + z, so the same
machinery solves both.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from . import mdp
from .instruments import (
    SinkingBondSpec,
    action_provider,
    action_table,
    coupons_on_grid,
    redemption_stages,
)
from .market_data import DiscountCurve, TimeGrid, rate_integrals, step_discounts
from .mdp import MDPSolution, StageProblem, backward_induction, evaluate_policy
from .tree import IntensityTree, augment_default, deterministic_tree


class UnattainablePriceError(ValueError):
    """The target price lies outside the range the spread bracket can reach."""


ScheduleLike = Union[str, Mapping[float, float], mdp.PolicyLike]


def _require_augmented(tree: IntensityTree) -> None:
    if not tree.augmented:
        raise ValueError("pricing requires a default-augmented tree")


def _check_same_horizon(tree: IntensityTree, spec: SinkingBondSpec) -> None:
    if abs(tree.grid.maturity - spec.maturity) > 1e-9:
        raise ValueError(
            f"tree horizon {tree.grid.maturity!r} does not match the bond maturity {spec.maturity!r}"
        )


def price_zcb(tree: IntensityTree, curve: DiscountCurve, recovery: float) -> float:
    """Zero-coupon bond per unit notional, by backward recursion.

    Each step discounts the survival-weighted continuation plus the recovery
    paid on the one-step default probability.
    """
    _require_augmented(tree)
    if not 0.0 <= recovery <= 1.0:
        raise ValueError("recovery must lie in [0, 1]")
    disc = step_discounts(curve, tree.grid)
    values = np.ones(tree.layers[-1].size)
    for n in range(tree.n_steps - 1, -1, -1):
        tr = tree.transitions[n]
        cont = (
            tr.probs[0] * values[tr.succ[0]]
            + tr.probs[1] * values[tr.succ[1]]
            + tr.probs[2] * values[tr.succ[2]]
        )
        values = disc[n] * (tr.default_prob * recovery + cont)
    return float(values[0])


def price_vanilla_bond(
    tree: IntensityTree,
    curve: DiscountCurve,
    coupons: Sequence[float],
    recovery: float,
) -> float:
    """Coupon bond without redemption options, one backward pass.

    ``coupons[n]`` is paid at t_n on survival (index 0 is ignored); the
    principal is repaid at maturity.
    """
    _require_augmented(tree)
    coupons = np.asarray(coupons, dtype=float)
    if coupons.shape != (tree.n_steps + 1,):
        raise ValueError("need one coupon entry per grid date")
    disc = step_discounts(curve, tree.grid)
    values = np.zeros(tree.layers[-1].size)
    for n in range(tree.n_steps - 1, -1, -1):
        tr = tree.transitions[n]
        cash = coupons[n + 1] + (1.0 if n + 1 == tree.n_steps else 0.0)
        cont = (
            tr.probs[0] * values[tr.succ[0]]
            + tr.probs[1] * values[tr.succ[1]]
            + tr.probs[2] * values[tr.succ[2]]
        )
        values = disc[n] * (cash * tr.survival + tr.default_prob * recovery + cont)
    return float(values[0])


def build_stage_problems(
    tree: IntensityTree, curve: DiscountCurve, spec: SinkingBondSpec
) -> list[StageProblem]:
    """Assemble one decision stage per grid step from tree, curve and contract."""
    _require_augmented(tree)
    _check_same_horizon(tree, spec)
    grid = tree.grid
    coupons = coupons_on_grid(spec, grid)
    rates = curve.forward_rates(grid.times_array[:-1])
    stages = []
    for n in range(grid.n_steps):
        tr = tree.transitions[n]
        stages.append(
            StageProblem(
                actions=action_provider(spec, grid, n),
                succ=tr.succ,
                probs=tr.probs,
                survival=tr.survival,
                default_prob=tr.default_prob,
                coupon=float(coupons[n + 1]),
                recovery=spec.recovery,
                rate=float(rates[n]),
                dt=float(grid.steps[n]),
                next_size=tree.layers[n + 1].size,
            )
        )
    return stages


@dataclass(frozen=True)
class SinkingBondPrice:
    price: float
    solution: MDPSolution


def price_sinking_bond(
    tree: IntensityTree, curve: DiscountCurve, spec: SinkingBondSpec
) -> SinkingBondPrice:
    """Fair value under the issuer's optimal redemption behaviour."""
    stages = build_stage_problems(tree, curve, spec)
    solution = backward_induction(stages, spec.nominal_steps)
    return SinkingBondPrice(price=solution.root_value, solution=solution)


def schedule_policy(spec: SinkingBondSpec, grid: TimeGrid, schedule: ScheduleLike):
    """Normalize a redemption schedule into a policy function.

    Accepts the extreme rules "max"/"min", a mapping from redemption date to
    the installment fraction chosen there (every redemption date must be
    listed), an engine solution, or any policy callable/table.
    """
    if isinstance(schedule, str):
        rule = schedule.lower()
        if rule not in ("max", "min"):
            raise ValueError(f"unknown schedule rule {schedule!r}")
        pick = max if rule == "max" else min
        actions = action_table(spec, grid)

        def extreme(n: int, s_index: int) -> int:
            return pick(actions(n, s_index))

        return extreme

    if isinstance(schedule, Mapping):
        stage_actions: dict[int, int] = {}
        for date, fraction in schedule.items():
            stage_actions[grid.index_of(float(date))] = spec.fraction_to_index(float(fraction))
        missing = redemption_stages(spec, grid) - set(stage_actions)
        if missing:
            raise ValueError(
                f"schedule does not cover the redemption dates at stages {sorted(missing)}"
            )

        def scheduled(n: int, s_index: int) -> int:
            if n == grid.n_steps - 1:
                return s_index
            return stage_actions.get(n, 0)

        return scheduled

    return mdp.as_policy_fn(schedule)


def price_fixed_schedule(
    tree: IntensityTree, curve: DiscountCurve, spec: SinkingBondSpec, schedule: ScheduleLike
) -> float:
    """Value of a fixed redemption schedule (no optimization)."""
    stages = build_stage_problems(tree, curve, spec)
    policy = schedule_policy(spec, tree.grid, schedule)
    return evaluate_policy(stages, spec.nominal_steps, policy).root_value


def deterministic_spread_price(
    spec: SinkingBondSpec, curve: DiscountCurve, grid: TimeGrid, spread: float
) -> float:
    """Optimal-schedule price when the intensity is the constant ``spread``.

    Zero recovery turns the survival factor into pure extra discounting, so
    this is the bond priced on the curve r + spread.
    """
    chain = augment_default(deterministic_tree(grid, spread))
    riskless = dataclasses.replace(spec, recovery=0.0)
    return price_sinking_bond(chain, curve, riskless).price


def z_spread(
    spec: SinkingBondSpec,
    curve: DiscountCurve,
    grid: TimeGrid,
    market_price: float,
    *,
    bracket: tuple[float, float] = (-0.05, 5.0),
    tol: float = 1e-10,
) -> float:
    """Constant spread over the curve that reproduces a market price.

    The price is evaluated by the deterministic program above (so bonds with
    optional sinking features are re-optimized at each trial spread) and is
    strictly decreasing in the spread; plain bisection on the bracket is
    therefore safe.
    """
    lo, hi = bracket
    if not lo < hi:
        raise ValueError("bracket must be increasing")
    price_lo = deterministic_spread_price(spec, curve, grid, lo)
    price_hi = deterministic_spread_price(spec, curve, grid, hi)
    if not (price_hi <= market_price <= price_lo):
        raise UnattainablePriceError(
            f"market price {market_price!r} outside the attainable range "
            f"[{price_hi!r}, {price_lo!r}] for spreads in [{lo!r}, {hi!r}]"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if deterministic_spread_price(spec, curve, grid, mid) >= market_price:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def worst_ansatz(
    spec: SinkingBondSpec, curve: DiscountCurve, grid: TimeGrid, spread: float
) -> float:
    """Callable-bond shortcut: minimum over call dates of the deterministic PV.

    For each admissible call stage (and maturity) the bond's cashflows up to
    the redemption are discounted at r + spread; the quote is the smallest of
    these values.  Payment timing matches the decision engine: the amount
    chosen at t_n lands at t_{n+1}.
    """
    if not spec.full_call:
        raise ValueError("the worst-case quote needs a callable-style bond (full_call)")
    coupons = coupons_on_grid(spec, grid)
    cum_dt = np.concatenate(([0.0], np.cumsum(grid.steps)))
    dfz = np.exp(-(rate_integrals(curve, grid) + spread * cum_dt))
    coupon_pv = np.cumsum(coupons * dfz)

    call_stages = sorted(set(redemption_stages(spec, grid)) | {grid.n_steps - 1})
    candidates = [coupon_pv[n + 1] + dfz[n + 1] for n in call_stages]
    return float(min(candidates))


def price_report(
    tree: IntensityTree, curve: DiscountCurve, spec: SinkingBondSpec
) -> dict:
    """Headline price plus forced-schedule comparison and policy summary.

    option_value is what the freedom to deviate from the always-redeem-max
    schedule is worth to the issuer.
    """
    stages = build_stage_problems(tree, curve, spec)
    solution = backward_induction(stages, spec.nominal_steps)
    price = solution.root_value
    forced_max = evaluate_policy(
        stages, spec.nominal_steps, schedule_policy(spec, tree.grid, "max")
    ).root_value
    forced_min = evaluate_policy(
        stages, spec.nominal_steps, schedule_policy(spec, tree.grid, "min")
    ).root_value

    summary = []
    for n in sorted(redemption_stages(spec, tree.grid)):
        for s_index in sorted(solution.policy[n]):
            chosen = solution.policy[n][s_index]
            summary.append(
                {
                    "time": tree.grid.times[n],
                    "nominal": s_index / spec.nominal_steps,
                    "action_min": int(chosen.min()) / spec.nominal_steps,
                    "action_max": int(chosen.max()) / spec.nominal_steps,
                }
            )
    return {
        "price": price,
        "forced_max": forced_max,
        "forced_min": forced_min,
        "option_value": forced_max - price,
        "policy_summary": summary,
    }
