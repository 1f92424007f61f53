"""Monte Carlo cross-check for fixed redemption schedules.

Paths are Euler steps in the unit-diffusion coordinate (the lattice's own
coordinate, so no state-dependent-volatility bias separates the two), and
default is decided exactly as on the lattice: the running sum of
left-endpoint intensities times step widths is compared against an
independent unit-mean exponential draw per path.  Randomness is counter
based -- path i draws from a generator keyed by (seed, i) -- so path i is
bitwise identical no matter how many paths are requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .instruments import SinkingBondSpec, action_table, coupons_on_grid
from .jdcev import JDCEVParams, bessel_drift, intensity, inverse_transform, transform
from .market_data import DiscountCurve, TimeGrid, discount_factors
from .pricer import schedule_policy

_CHUNK = 4096


@dataclass(frozen=True)
class PathSet:
    """Simulated intensity paths plus each path's default step.

    intensities[i, n] is the (capped) intensity of path i at t_n;
    default_step[i] is the step index m in 1..N when the default lands in
    (t_{m-1}, t_m], or -1 if the path survives to maturity.
    """

    grid: TimeGrid
    intensities: np.ndarray
    default_step: np.ndarray
    seed: int

    @property
    def n_paths(self) -> int:
        return self.intensities.shape[0]


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    std_error: float
    n_paths: int


def _path_generator(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _intensity_from_x(params: JDCEVParams, x: np.ndarray) -> np.ndarray:
    """Capped intensity at a coordinate; x <= 0 takes the boundary value."""
    boundary = params.lambda_cap if params.lambda0 > 0.0 else 0.0
    lam = np.full_like(x, boundary)
    pos = x > 0.0
    if pos.any():
        lam[pos] = intensity(params, inverse_transform(params, x[pos]))
    return lam


def _drift_from_x(params: JDCEVParams, x: np.ndarray) -> np.ndarray:
    drift = np.zeros_like(x)
    pos = x > 0.0
    if pos.any():
        drift[pos] = bessel_drift(params, x[pos])
    return drift


def simulate_paths(
    params: JDCEVParams,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    *,
    zero_diffusion: bool = False,
) -> PathSet:
    """Simulate intensity paths and default steps on the given grid.

    ``zero_diffusion`` drops the Brownian increments (the draws still happen,
    preserving the substream layout), collapsing every path onto the
    deterministic mean chain -- handy for exact-survival sanity checks.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if int(seed) != seed or seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    seed = int(seed)

    n_steps = grid.n_steps
    steps = grid.steps
    sqrt_steps = np.sqrt(steps)
    x0 = float(transform(params, params.z0))

    intensities = np.empty((n_paths, n_steps + 1))
    default_step = np.full(n_paths, -1, dtype=np.intp)

    for start in range(0, n_paths, _CHUNK):
        stop = min(start + _CHUNK, n_paths)
        size = stop - start
        shocks = np.empty((size, n_steps))
        thresholds = np.empty(size)
        for i in range(size):
            gen = _path_generator(seed, start + i)
            thresholds[i] = gen.standard_exponential()
            shocks[i] = gen.standard_normal(n_steps)
        if zero_diffusion:
            shocks[:] = 0.0

        x = np.full(size, x0)
        lam = _intensity_from_x(params, x)
        intensities[start:stop, 0] = lam
        hazard_sum = np.zeros(size)
        defaulted = np.zeros(size, dtype=bool)
        for n in range(n_steps):
            hazard_sum += lam * steps[n]
            newly = (~defaulted) & (hazard_sum > thresholds)
            default_step[start:stop][newly] = n + 1
            defaulted |= newly
            x = x + _drift_from_x(params, x) * steps[n] + sqrt_steps[n] * shocks[:, n]
            lam = _intensity_from_x(params, x)
            intensities[start:stop, n + 1] = lam

    return PathSet(grid=grid, intensities=intensities, default_step=default_step, seed=seed)


def mc_price_fixed_policy(
    paths: PathSet,
    spec: SinkingBondSpec,
    schedule: Union[str, Mapping[float, float]],
    curve: DiscountCurve,
) -> MCEstimate:
    """Average discounted cashflows of a fixed schedule over the paths.

    The schedule fixes the nominal trajectory, so a path's payout depends
    only on its default step: coupons and redemptions while alive, then the
    recovery fraction of the remaining nominal at the end of the default
    step.
    """
    grid = paths.grid
    if abs(grid.maturity - spec.maturity) > 1e-9:
        raise ValueError("paths and bond do not share a horizon")
    policy = schedule_policy(spec, grid, schedule)
    actions = action_table(spec, grid)
    steps_total = grid.n_steps
    nominal = spec.nominal_steps
    coupons = coupons_on_grid(spec, grid)

    s_index = nominal
    cash = np.zeros(steps_total + 1)
    remaining = np.zeros(steps_total + 1)
    remaining[0] = s_index
    for n in range(steps_total):
        chosen = np.unique(np.asarray(policy(n, s_index)))
        if chosen.size != 1:
            raise ValueError("Monte Carlo valuation needs a path-independent schedule")
        action = int(chosen[0])
        if action not in set(actions(n, s_index)):
            raise ValueError(f"stage {n}, nominal index {s_index}: action {action} not admissible")
        cash[n + 1] = (action + coupons[n + 1] * s_index) / nominal
        s_index -= action
        remaining[n + 1] = s_index

    dfv = discount_factors(curve, grid)
    cum_cash = np.cumsum(cash * dfv)
    # payout if the default lands in step m: cashflows through t_{m-1} plus
    # the discounted recovery on the nominal held entering the step
    payout_by_step = np.zeros(steps_total + 1)
    payout_by_step[1:] = cum_cash[:-1] + dfv[1:] * spec.recovery * remaining[:-1] / nominal
    survive_payout = cum_cash[-1]

    d = paths.default_step
    payouts = np.where(d > 0, payout_by_step[np.maximum(d, 0)], survive_payout)
    estimate = float(np.mean(payouts))
    if paths.n_paths > 1:
        std_error = float(np.std(payouts, ddof=1) / math.sqrt(paths.n_paths))
    else:
        std_error = float("nan")
    return MCEstimate(estimate=estimate, std_error=std_error, n_paths=paths.n_paths)
