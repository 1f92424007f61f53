"""Recombining trinomial lattice for the default intensity.

The lattice lives in the unit-diffusion coordinate of :mod:`sinkbond.jdcev`,
where a per-layer node spacing of sqrt(3 * dt) together with nearest-node
centering guarantees branch probabilities inside [0, 1].  Each node carries
the back-transformed stock level and the (capped) intensity it implies.
Augmentation attaches the jump to the absorbing default state: every node
gets a one-step default probability 1 - exp(-intensity * dt) and its
diffusion branches are scaled by the matching survival factor, so the four
outgoing probabilities sum to one.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .jdcev import JDCEVParams, bessel_drift, intensity, inverse_transform, transform
from .market_data import TimeGrid

_PROB_TOL = 1e-12


class TreeConstructionError(RuntimeError):
    """A branch probability left [0, 1]; the offending node is reported."""


@dataclass(frozen=True)
class TreeLayer:
    """Nodes of one time slice, sorted by increasing coordinate."""

    x: np.ndarray
    z_level: np.ndarray
    intensity: np.ndarray

    @property
    def size(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class LayerTransition:
    """Branching data for one step t_n -> t_{n+1}.

    succ: (3, m) indices into the next layer, rows ordered down/mid/up.
    branch_probs: (3, m) diffusion probabilities; columns sum to 1.
    survival: (m,) one-step survival exp(-intensity * dt).
    default_prob: (m,) one-step default probability 1 - survival.
    probs: survival-scaled branch probabilities, present on augmented trees.
    """

    succ: np.ndarray
    branch_probs: np.ndarray
    survival: np.ndarray
    default_prob: np.ndarray
    probs: np.ndarray | None = None


@dataclass(frozen=True)
class TreeNode:
    """Read-only view of a single lattice node."""

    x: float
    z_level: float
    intensity: float
    successors: tuple[tuple[int, float], ...]
    default_prob: float


@dataclass(frozen=True)
class IntensityTree:
    grid: TimeGrid
    layers: tuple[TreeLayer, ...]
    transitions: tuple[LayerTransition, ...]
    augmented: bool
    stochastic: bool
    params: JDCEVParams | None = None

    @property
    def n_steps(self) -> int:
        return len(self.transitions)

    @property
    def root_intensity(self) -> float:
        return float(self.layers[0].intensity[0])

    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(layer.size for layer in self.layers)

    def node(self, layer: int, index: int) -> TreeNode:
        lay = self.layers[layer]
        if layer < self.n_steps:
            tr = self.transitions[layer]
            probs = tr.probs if self.augmented else tr.branch_probs
            successors = tuple(
                (int(tr.succ[row, index]), float(probs[row, index])) for row in range(3)
            )
            default_prob = float(tr.default_prob[index]) if self.augmented else 0.0
        else:
            successors = ()
            default_prob = 0.0
        return TreeNode(
            x=float(lay.x[index]),
            z_level=float(lay.z_level[index]),
            intensity=float(lay.intensity[index]),
            successors=successors,
            default_prob=default_prob,
        )

    def iter_nodes(self, layer: int) -> Iterator[TreeNode]:
        for i in range(self.layers[layer].size):
            yield self.node(layer, i)

    def to_dict(self) -> dict:
        """JSON-safe dump: layers -> nodes with coordinates and branches."""

        def scrub(v: float):
            return None if math.isnan(v) else v

        layers = []
        for n, lay in enumerate(self.layers):
            nodes = []
            for node in self.iter_nodes(n):
                nodes.append(
                    {
                        "x": scrub(node.x),
                        "z_level": scrub(node.z_level),
                        "intensity": node.intensity,
                        "default_prob": node.default_prob,
                        "successors": [list(s) for s in node.successors],
                    }
                )
            layers.append({"time": self.grid.times[n], "nodes": nodes})
        return {"augmented": self.augmented, "stochastic": self.stochastic, "layers": layers}


def _layer_from_x(params: JDCEVParams, x: np.ndarray) -> TreeLayer:
    z = np.zeros_like(x)
    pos = x > 0.0
    if pos.any():
        z[pos] = inverse_transform(params, x[pos])
    lam = np.asarray(intensity(params, z), dtype=float)
    for arr in (x, z, lam):
        arr.flags.writeable = False
    return TreeLayer(x=x, z_level=z, intensity=lam)


def _successor_drift(params: JDCEVParams | None, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Drift used to center successors.

    Capped nodes (including the x <= 0 boundary) are centered straight: they
    are numerically certain defaulters, and following the diverging boundary
    drift would only stretch the layers for mass of size exp(-cap * dt).
    """
    drift = np.zeros_like(x)
    if params is None:
        return drift
    live = (x > 0.0) & (lam < params.lambda_cap)
    if live.any():
        drift[live] = bessel_drift(params, x[live])
    return drift


def _check_branch_probs(probs: np.ndarray, layer: int) -> None:
    bad = np.argwhere((probs < -_PROB_TOL) | (probs > 1.0 + _PROB_TOL))
    if bad.size:
        row, node = bad[0]
        raise TreeConstructionError(
            f"layer {layer} node {int(node)}: branch probability "
            f"{probs[row, node]!r} outside [0, 1]"
        )
    sums = probs.sum(axis=0)
    off = np.argmax(np.abs(sums - 1.0))
    if abs(sums[off] - 1.0) > 1e-9:
        raise TreeConstructionError(
            f"layer {layer} node {int(off)}: branch probabilities sum to {sums[off]!r}"
        )


def build_trinomial(
    params: JDCEVParams, grid: TimeGrid, *, degenerate: bool = False
) -> IntensityTree:
    """Build the pre-default lattice (no default branch yet).

    From each node the central successor is the next-layer node nearest to
    the one-step conditional mean x + nu(x) * dt; the three probabilities
    match that mean exactly and the conditional variance dt.  With
    ``degenerate=True`` the diffusion is switched off and every layer holds
    the single node at the conditional mean -- the zero-volatility limit used
    as a deterministic oracle.
    """
    x0 = float(transform(params, params.z0))
    layers = [_layer_from_x(params, np.array([x0]))]
    transitions: list[LayerTransition] = []

    for n in range(grid.n_steps):
        dt = float(grid.steps[n])
        current = layers[n]
        drift = _successor_drift(params, current.x, current.intensity)
        mean = current.x + drift * dt

        if degenerate:
            next_x = mean.copy()
            succ = np.zeros((3, 1), dtype=np.intp)
            branch = np.array([[0.0], [1.0], [0.0]])
        else:
            dx = math.sqrt(3.0 * dt)
            center = np.rint((mean - x0) / dx).astype(np.intp)
            lo = int(center.min()) - 1
            hi = int(center.max()) + 1
            next_x = x0 + np.arange(lo, hi + 1, dtype=float) * dx
            offset = (mean - (x0 + center * dx)) / dx
            up = 1.0 / 6.0 + 0.5 * (offset**2 + offset)
            mid = 2.0 / 3.0 - offset**2
            down = 1.0 / 6.0 + 0.5 * (offset**2 - offset)
            branch = np.stack([down, mid, up])
            _check_branch_probs(branch, n)
            ci = center - lo
            succ = np.stack([ci - 1, ci, ci + 1])

        survival = np.exp(-current.intensity * dt)
        default_prob = -np.expm1(-current.intensity * dt)
        for arr in (succ, branch, survival, default_prob):
            arr.flags.writeable = False
        transitions.append(
            LayerTransition(
                succ=succ, branch_probs=branch, survival=survival, default_prob=default_prob
            )
        )
        layers.append(_layer_from_x(params, next_x))

    return IntensityTree(
        grid=grid,
        layers=tuple(layers),
        transitions=tuple(transitions),
        augmented=False,
        stochastic=not degenerate,
        params=params,
    )


def deterministic_tree(grid: TimeGrid, intensities: Union[float, Sequence[float]]) -> IntensityTree:
    """Single-chain lattice carrying a fixed intensity path.

    ``intensities`` is a scalar or one value per grid date; the value at t_n
    drives the step (t_n, t_{n+1}].  Negative values are accepted so that
    spread-style discounting (the z-spread's deterministic program) can reuse
    the same machinery; the probabilistic reading holds only for nonnegative
    intensities.  Nodes have no stock-level interpretation here.
    """
    n_dates = grid.n_steps + 1
    path = np.asarray(intensities, dtype=float)
    if path.ndim == 0:
        path = np.full(n_dates, float(path))
    if path.shape != (n_dates,):
        raise ValueError(f"need one intensity per grid date ({n_dates}), got shape {path.shape}")

    layers = []
    transitions = []
    for n in range(n_dates):
        lam = np.array([path[n]])
        x = np.zeros(1)
        z = np.full(1, np.nan)
        for arr in (x, z, lam):
            arr.flags.writeable = False
        layers.append(TreeLayer(x=x, z_level=z, intensity=lam))
    for n in range(grid.n_steps):
        dt = float(grid.steps[n])
        succ = np.zeros((3, 1), dtype=np.intp)
        branch = np.array([[0.0], [1.0], [0.0]])
        survival = np.exp(-layers[n].intensity * dt)
        default_prob = -np.expm1(-layers[n].intensity * dt)
        for arr in (succ, branch, survival, default_prob):
            arr.flags.writeable = False
        transitions.append(
            LayerTransition(
                succ=succ, branch_probs=branch, survival=survival, default_prob=default_prob
            )
        )
    return IntensityTree(
        grid=grid,
        layers=tuple(layers),
        transitions=tuple(transitions),
        augmented=False,
        stochastic=False,
        params=None,
    )


def augment_default(tree: IntensityTree) -> IntensityTree:
    """Attach the default branch: scale diffusion probabilities by survival."""
    if tree.augmented:
        raise ValueError("tree is already default-augmented")
    new_transitions = []
    for n, tr in enumerate(tree.transitions):
        sums = tr.branch_probs.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > 1e-9:
            raise ValueError(f"layer {n}: pre-default branch probabilities do not sum to 1")
        probs = tr.branch_probs * tr.survival
        probs.flags.writeable = False
        new_transitions.append(dataclasses.replace(tr, probs=probs))
    return dataclasses.replace(tree, transitions=tuple(new_transitions), augmented=True)


@dataclass(frozen=True)
class LayerReport:
    layer: int
    size: int
    prob_sum_error: float
    min_branch_prob: float
    max_branch_prob: float
    mean_error: float
    variance_error: float | None


@dataclass(frozen=True)
class TreeDiagnostics:
    """Read-only health report produced by :func:`validate_tree`."""

    layer_reports: tuple[LayerReport, ...]
    violations: tuple[str, ...]
    layer_sizes: tuple[int, ...]
    max_prob_sum_error: float
    max_mean_error: float
    max_variance_error: float | None
    second_moment_constant: float | None

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": list(self.violations),
            "layer_sizes": list(self.layer_sizes),
            "max_prob_sum_error": self.max_prob_sum_error,
            "max_mean_error": self.max_mean_error,
            "max_variance_error": self.max_variance_error,
            "second_moment_constant": self.second_moment_constant,
            "layers": [
                {
                    "layer": r.layer,
                    "size": r.size,
                    "prob_sum_error": r.prob_sum_error,
                    "min_branch_prob": r.min_branch_prob,
                    "max_branch_prob": r.max_branch_prob,
                    "mean_error": r.mean_error,
                    "variance_error": r.variance_error,
                }
                for r in self.layer_reports
            ],
        }


def validate_tree(tree: IntensityTree) -> TreeDiagnostics:
    """Re-check probability normalization and moment matching, node by node.

    Moment errors are measured on the pre-default branch probabilities
    against the drift target and the step variance; the variance check is
    skipped for single-chain trees whose variance is zero by design.
    """
    reports = []
    violations: list[str] = []
    max_sum_err = 0.0
    max_mean_err = 0.0
    max_var_err: float | None = None
    c_var: float | None = None

    for n, tr in enumerate(tree.transitions):
        dt = float(tree.grid.steps[n])
        layer = tree.layers[n]
        next_layer = tree.layers[n + 1]

        effective = tr.probs if tree.augmented else tr.branch_probs
        if tree.augmented:
            sums = effective.sum(axis=0) + tr.default_prob
            all_probs = np.vstack([effective, tr.default_prob])
        else:
            sums = effective.sum(axis=0)
            all_probs = effective
        sum_err = float(np.max(np.abs(sums - 1.0)))
        max_sum_err = max(max_sum_err, sum_err)
        if sum_err > _PROB_TOL:
            worst = int(np.argmax(np.abs(sums - 1.0)))
            violations.append(f"layer {n} node {worst}: probabilities sum to {sums[worst]!r}")
        bad = np.argwhere((all_probs < -_PROB_TOL) | (all_probs > 1.0 + _PROB_TOL))
        for row, node_idx in bad:
            violations.append(
                f"layer {n} node {int(node_idx)}: probability "
                f"{all_probs[row, node_idx]!r} outside [0, 1]"
            )
        if tr.succ.min() < 0 or tr.succ.max() >= next_layer.size:
            violations.append(f"layer {n}: successor index outside the next layer")
            succ = np.clip(tr.succ, 0, next_layer.size - 1)
        else:
            succ = tr.succ

        drift = _successor_drift(tree.params, layer.x, layer.intensity)
        target = layer.x + drift * dt
        succ_x = next_layer.x[succ]
        mean_hat = (tr.branch_probs * succ_x).sum(axis=0)
        mean_err = float(np.max(np.abs(mean_hat - target)))
        max_mean_err = max(max_mean_err, mean_err)

        var_err: float | None = None
        if tree.stochastic:
            var_hat = (tr.branch_probs * (succ_x - target) ** 2).sum(axis=0)
            var_err = float(np.max(np.abs(var_hat - dt)))
            max_var_err = var_err if max_var_err is None else max(max_var_err, var_err)
            ratio = var_err / dt**2
            c_var = ratio if c_var is None else max(c_var, ratio)

        reports.append(
            LayerReport(
                layer=n,
                size=layer.size,
                prob_sum_error=sum_err,
                min_branch_prob=float(effective.min()),
                max_branch_prob=float(effective.max()),
                mean_error=mean_err,
                variance_error=var_err,
            )
        )

    return TreeDiagnostics(
        layer_reports=tuple(reports),
        violations=tuple(violations),
        layer_sizes=tree.layer_sizes(),
        max_prob_sum_error=max_sum_err,
        max_mean_error=max_mean_err,
        max_variance_error=max_var_err,
        second_moment_constant=c_var,
    )


def survival_probabilities(tree: IntensityTree) -> np.ndarray:
    """P(no default by t_n) for every grid date, by a forward layer pass."""
    if not tree.augmented:
        raise ValueError("survival probabilities need a default-augmented tree")
    alive = np.array([1.0])
    out = [1.0]
    for n, tr in enumerate(tree.transitions):
        nxt = np.zeros(tree.layers[n + 1].size)
        for row in range(3):
            np.add.at(nxt, tr.succ[row], tr.probs[row] * alive)
        out.append(float(nxt.sum()))
        alive = nxt
    return np.asarray(out)
