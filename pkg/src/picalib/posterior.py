"""Parameter densities on grids.

``assign`` turns (family, weight function, data) into a normalized
density by the weight-times-likelihood construction; everything
downstream (updating, reparameterization, marginalization,
conditioning, equal-tail intervals) is deterministic quadrature on the
resulting grid.

The interpolation convention is piecewise-linear in the density, which
makes the cumulative piecewise-quadratic; quantiles invert it exactly
segment by segment.  Values are renormalized after every operation so
the unit-mass invariant never drifts.

Improper products are a first-class failure mode: when the adaptive
grid cannot push the integrand's edge mass below tolerance even after
two span doublings, :class:`ImproperPosteriorError` is raised instead
of silently normalizing a truncation artifact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (DomainError, EmptyLikelihoodError, ImproperPosteriorError,
                     SingularityError)
from .factors import ConsistencyFactor
from .families import Sample, SamplingFamily, validate_sample
from .grids import (Axis, GridSpec, ParameterGrid, adaptive_axis, axis_kind_for_role,
                    trapezoid_weights)
from .maps import MonotoneMap

_OUTER_SPAN_FRAC = 0.05       # width of the edge band, as a fraction of the u-span
_OUTER_MASS_TOL = 1e-6        # band mass above this flags an unnormalizable tail
_EDGE_VALUE_TOL = 1e-6        # edge density above this (rel. to peak) means the
                              # probe capped out before the integrand decayed
_MAX_EXPANSIONS = 2


@dataclass(frozen=True)
class CredibleInterval:
    """Equal-tail interval with posterior content ``level``."""

    lo: float
    hi: float
    level: float


@dataclass(frozen=True)
class PosteriorDensity:
    """A normalized density over a 1- or 2-d parameter grid."""

    grid: ParameterGrid
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise DomainError("values shape does not match grid shape")

    @property
    def dims(self) -> int:
        return self.grid.dims

    @property
    def nodes(self) -> np.ndarray:
        if self.dims != 1:
            raise DomainError("nodes is a 1-d accessor; use grid.axes for 2-d")
        return self.grid.axes[0].nodes

    # -- scalar summaries (1-d) ----------------------------------------------

    def interpolate(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.nodes, self.values,
                         left=0.0, right=0.0)

    def mean(self) -> float:
        self._require_1d()
        w = self.grid.axes[0].weights
        return float(np.sum(w * self.nodes * self.values))

    def sd(self) -> float:
        m = self.mean()
        w = self.grid.axes[0].weights
        var = float(np.sum(w * (self.nodes - m) ** 2 * self.values))
        return math.sqrt(max(var, 0.0))

    def mode(self) -> float:
        self._require_1d()
        n, v = self.nodes, self.values
        i = int(np.argmax(v))
        if 0 < i < v.size - 1 and v[i - 1] > 0 and v[i + 1] > 0:
            # parabolic refinement of log density on the (non-uniform) triple
            x0, x1, x2 = n[i - 1], n[i], n[i + 1]
            y0, y1, y2 = np.log(v[i - 1: i + 2])
            d1, d2 = x1 - x0, x2 - x1
            denom = d1 * d2 * (d1 + d2)
            a = (y2 * d1 - y1 * (d1 + d2) + y0 * d2) / denom
            if a < 0:
                b = (y2 * d1**2 + y1 * (d2**2 - d1**2) - y0 * d2**2) / denom
                x_star = x1 - b / (2 * a)
                if x0 <= x_star <= x2:
                    return float(x_star)
        return float(n[i])

    # -- cumulative machinery --------------------------------------------------

    def _require_1d(self):
        if self.dims != 1:
            raise DomainError("operation defined for 1-d posteriors only")

    def _cumulative(self):
        n, v = self.nodes, self.values
        seg = 0.5 * (v[:-1] + v[1:]) * np.diff(n)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        return cum

    def cdf(self, x) -> float:
        """Exact cumulative of the piecewise-linear interpolant at x."""
        self._require_1d()
        n, v = self.nodes, self.values
        cum = self._cumulative()
        total = cum[-1]
        x = float(x)
        if x <= n[0]:
            return 0.0
        if x >= n[-1]:
            return 1.0
        i = int(np.searchsorted(n, x) - 1)
        d = n[i + 1] - n[i]
        s = x - n[i]
        slope = (v[i + 1] - v[i]) / d
        part = v[i] * s + 0.5 * slope * s * s
        return float((cum[i] + part) / total)

    def prob_between(self, a: float, b: float) -> float:
        return max(self.cdf(b) - self.cdf(a), 0.0)

    def quantile(self, p) -> float | np.ndarray:
        """Inverse cumulative via exact piecewise-quadratic inversion."""
        self._require_1d()
        scalar = np.isscalar(p)
        ps = np.atleast_1d(np.asarray(p, dtype=float))
        if np.any((ps <= 0.0) | (ps >= 1.0)):
            raise DomainError("quantile levels must lie strictly inside (0, 1)")
        n, v = self.nodes, self.values
        cum = self._cumulative()
        total = cum[-1]
        out = np.empty_like(ps)
        for j, p_j in enumerate(ps):
            m = p_j * total
            i = int(np.searchsorted(cum, m, side="right") - 1)
            i = min(max(i, 0), n.size - 2)
            rem = m - cum[i]
            d = n[i + 1] - n[i]
            slope = (v[i + 1] - v[i]) / d
            if abs(slope) * d < 1e-14 * max(v[i], 1e-300):
                s = rem / v[i] if v[i] > 0 else 0.0
            else:
                disc = max(v[i] ** 2 + 2.0 * slope * rem, 0.0)
                s = (math.sqrt(disc) - v[i]) / slope
            out[j] = n[i] + min(max(s, 0.0), d)
        return float(out[0]) if scalar else out

    def equal_tail(self, delta: float) -> tuple[float, float]:
        a = (1.0 - delta) / 2.0
        q = self.quantile(np.array([a, 1.0 - a]))
        return float(q[0]), float(q[1])


def l1_distance(p: PosteriorDensity, q: PosteriorDensity) -> float:
    """Integral of |p - q| over the union of the two grids (densities are
    zero outside their own span)."""
    nodes = np.union1d(p.nodes, q.nodes)
    diff = np.abs(p.interpolate(nodes) - q.interpolate(nodes))
    return float(np.sum(trapezoid_weights(nodes) * diff))


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------

def _loglik_1d(family: SamplingFamily, xs: np.ndarray):
    if xs.size == 1:
        x0 = float(xs[0])
        return lambda th: family.log_density(x0, th)
    return lambda th: family.log_density(xs.reshape((-1,) + (1,) * np.ndim(th)), th).sum(axis=0)


def _loglik_2d(family: SamplingFamily, xs: np.ndarray):
    def lp(t0, t1):
        out = family.log_density(float(xs[0]), t0, t1)
        for x in xs[1:]:
            out = out + family.log_density(float(x), t0, t1)
        return out
    return lp


def _normalize(grid: ParameterGrid, log_post: np.ndarray):
    vmax = np.max(log_post)
    if not np.isfinite(vmax):
        if vmax == -np.inf:
            raise EmptyLikelihoodError("likelihood vanishes on the whole grid")
        raise ImproperPosteriorError("non-finite weight-likelihood product on the grid")
    vals = np.exp(log_post - vmax)
    z = grid.integrate(vals)
    if not np.isfinite(z) or z <= 0.0:
        raise ImproperPosteriorError("grid normalization is zero or non-finite")
    return vals / z


def _axis_u(axis: Axis) -> np.ndarray:
    return np.log(axis.nodes) if axis.kind == "log" else axis.nodes


def _tail_checks_1d(axis: Axis, values: np.ndarray, bounded_lo: bool) -> dict:
    """Edge values and outer-band mass fractions per unbounded side."""
    u = _axis_u(axis)
    span = u[-1] - u[0]
    w = axis.weights
    vmax = values.max()
    out = {"edge_rel": 0.0, "outer_frac": 0.0}
    total = float(np.sum(w * values))
    cut_hi = u[-1] - _OUTER_SPAN_FRAC * span
    hi_mask = u >= cut_hi
    out["edge_rel"] = values[-1] / vmax
    out["outer_frac"] = float(np.sum(w[hi_mask] * values[hi_mask])) / total
    if not bounded_lo:
        cut_lo = u[0] + _OUTER_SPAN_FRAC * span
        lo_mask = u <= cut_lo
        out["edge_rel"] = max(out["edge_rel"], values[0] / vmax)
        out["outer_frac"] = max(out["outer_frac"],
                                float(np.sum(w[lo_mask] * values[lo_mask])) / total)
    return out


def _grid_ok(checks: dict) -> bool:
    return checks["outer_frac"] <= _OUTER_MASS_TOL and checks["edge_rel"] <= _EDGE_VALUE_TOL


def _bounded_lo(family: SamplingFamily, i: int, axis: Axis) -> bool:
    spec = family.params[i]
    return (spec.closed_lo and np.isfinite(spec.lo)
            and axis.nodes[0] <= spec.lo + 1e-12 * (1.0 + abs(spec.lo)))


def assign(family: SamplingFamily, factor: ConsistencyFactor, sample: Sample,
           grid: GridSpec | ParameterGrid | None = None) -> PosteriorDensity:
    """Assign the parameter density proportional to weight times likelihood.

    With no ``grid`` (or a non-explicit :class:`GridSpec`) the grid is
    placed adaptively: centered near the likelihood peak, extended until
    the tails decay, and expanded up to twice more if edge mass remains;
    persistent edge mass raises :class:`ImproperPosteriorError`.  An
    explicit grid is taken as-is and only diagnosed.
    """
    if factor.dim != family.n_params:
        raise DomainError(f"factor dimension {factor.dim} != "
                          f"family free parameters {family.n_params}")
    validate_sample(family, sample)
    xs = sample.values
    spec = grid if isinstance(grid, GridSpec) else GridSpec()
    kinds = tuple(axis_kind_for_role(p.role) for p in family.params)

    if family.n_params == 1:
        loglik = _loglik_1d(family, xs)
        logpost = lambda th: factor.log_weight(th) + loglik(th)
        if isinstance(grid, ParameterGrid):
            return _finalize_1d(family, grid, logpost, explicit=True)
        if spec.is_explicit:
            return _finalize_1d(family, spec.build_explicit(kinds), logpost, explicit=True)
        return _assign_adaptive_1d(family, logpost, xs, spec)

    loglik2 = _loglik_2d(family, xs)
    logpost2 = lambda t0, t1: factor.log_weight(t0, t1) + loglik2(t0, t1)
    if isinstance(grid, ParameterGrid):
        return _finalize_2d(family, grid, logpost2, explicit=True)
    if spec.is_explicit:
        return _finalize_2d(family, spec.build_explicit(kinds), logpost2, explicit=True)
    return _assign_adaptive_2d(family, logpost2, xs, spec)


def _finalize_1d(family, grid, logpost, explicit, expansions=0):
    axis = grid.axes[0]
    values = _normalize(grid, logpost(axis.nodes))
    checks = _tail_checks_1d(axis, values, _bounded_lo(family, 0, axis))
    checks["expansions"] = expansions
    if not explicit and not _grid_ok(checks):
        return None, checks  # caller retries
    post = PosteriorDensity(grid=grid, values=values, diagnostics=checks)
    return post if explicit else (post, checks)


def _assign_adaptive_1d(family, logpost, xs, spec):
    center = family.initial_guess(xs)[0]
    p = family.params[0]
    kind = axis_kind_for_role(p.role)
    tail_nats = spec.tail_nats(1)
    n_nodes = spec.nodes_for(1)[0]
    min_reach = (0.0, 0.0)
    for expansions in range(_MAX_EXPANSIONS + 1):
        axis = adaptive_axis(logpost, center, kind, (p.lo, p.hi), p.closed_lo,
                             n_nodes, tail_nats, min_reach)
        result, checks = _finalize_1d(family, ParameterGrid((axis,)), logpost,
                                      explicit=False, expansions=expansions)
        if result is not None:
            return result
        min_reach = (2.0 * axis.reach[0], 2.0 * axis.reach[1])
        tail_nats *= 2.0
    raise ImproperPosteriorError(
        f"posterior for {family.id} keeps mass at the grid edge after "
        f"{_MAX_EXPANSIONS} span doublings (outer_frac={checks['outer_frac']:.2e}, "
        f"edge_rel={checks['edge_rel']:.2e}); the weight-likelihood product "
        "looks unnormalizable")


def _finalize_2d(family, grid, logpost2, explicit, expansions=0):
    m0, m1 = grid.meshes()
    values = _normalize(grid, logpost2(m0, m1))
    checks = {"expansions": expansions}
    for i, axis in enumerate(grid.axes):
        other = grid.axes[1 - i]
        marg = (values * other.weights[None, :]).sum(axis=1) if i == 0 \
            else (values * grid.axes[0].weights[:, None]).sum(axis=0)
        c = _tail_checks_1d(axis, np.maximum(marg, 0.0), _bounded_lo(family, i, axis))
        checks[f"axis{i}_edge_rel"] = c["edge_rel"]
        checks[f"axis{i}_outer_frac"] = c["outer_frac"]
    ok = all(checks[f"axis{i}_outer_frac"] <= _OUTER_MASS_TOL
             and checks[f"axis{i}_edge_rel"] <= _EDGE_VALUE_TOL for i in range(2))
    if not explicit and not ok:
        return None, checks
    post = PosteriorDensity(grid=grid, values=values, diagnostics=checks)
    return post if explicit else (post, checks)


def _assign_adaptive_2d(family, logpost2, xs, spec):
    centers = family.initial_guess(xs)
    kinds = tuple(axis_kind_for_role(p.role) for p in family.params)
    tail_nats = spec.tail_nats(2)
    n0, n1 = spec.nodes_for(2)
    reaches = [(0.0, 0.0), (0.0, 0.0)]
    for expansions in range(_MAX_EXPANSIONS + 1):
        cand1 = np.asarray([centers[1]], dtype=float)
        ax0 = ax1 = None
        for _ in range(2):
            prof0 = lambda t0: np.max(logpost2(np.asarray(t0, dtype=float)[..., None], cand1))
            ax0 = adaptive_axis(prof0, centers[0], kinds[0],
                                (family.params[0].lo, family.params[0].hi),
                                family.params[0].closed_lo, n0, tail_nats, reaches[0])
            cand0 = ax0.nodes[:: max(1, ax0.n // 32)]
            prof1 = lambda t1: np.max(logpost2(cand0[..., None], np.asarray(t1, dtype=float)))
            ax1 = adaptive_axis(prof1, centers[1], kinds[1],
                                (family.params[1].lo, family.params[1].hi),
                                family.params[1].closed_lo, n1, tail_nats, reaches[1])
            cand1 = ax1.nodes[:: max(1, ax1.n // 32)]
        result, checks = _finalize_2d(family, ParameterGrid((ax0, ax1)), logpost2,
                                      explicit=False, expansions=expansions)
        if result is not None:
            return result
        reaches = [(2.0 * ax0.reach[0], 2.0 * ax0.reach[1]),
                   (2.0 * ax1.reach[0], 2.0 * ax1.reach[1])]
        tail_nats *= 1.5
    raise ImproperPosteriorError(
        f"joint posterior for {family.id} keeps edge mass after "
        f"{_MAX_EXPANSIONS} span doublings: {checks}")


# ---------------------------------------------------------------------------
# Updating and reshaping
# ---------------------------------------------------------------------------

def update(prior: PosteriorDensity, family: SamplingFamily, x: float) -> PosteriorDensity:
    """Multiply the prior density by the likelihood of one new observation
    and renormalize (grid unchanged)."""
    if not np.all(family.in_support(x)):
        raise DomainError(f"observation {x} outside the support of {family.id}")
    if prior.dims == 1:
        lik = np.exp(family.log_density(float(x), prior.nodes))
    else:
        m0, m1 = prior.grid.meshes()
        lik = np.exp(family.log_density(float(x), m0, m1))
    raw = prior.values * lik
    z = prior.grid.integrate(raw)
    if not np.isfinite(z) or z <= 0.0:
        raise EmptyLikelihoodError("updated posterior has zero mass on the prior grid")
    return PosteriorDensity(grid=prior.grid, values=raw / z,
                            diagnostics=dict(prior.diagnostics))


def transform_parameter(post: PosteriorDensity, pmap: MonotoneMap) -> PosteriorDensity:
    """Push a 1-d density through a strictly monotone reparameterization."""
    post._require_1d()
    nodes = post.nodes
    deriv = pmap.deriv_checked(nodes)
    sign = np.sign(deriv)
    if not (np.all(sign > 0) or np.all(sign < 0)):
        raise SingularityError("reparameterization is not monotone on the grid span")
    new_nodes = np.asarray(pmap.forward(nodes), dtype=float)
    new_values = post.values / np.abs(deriv)
    if sign[0] < 0:
        new_nodes, new_values = new_nodes[::-1], new_values[::-1]
    if np.any(np.diff(new_nodes) <= 0):
        raise SingularityError("mapped nodes are not strictly increasing")
    axis = Axis(nodes=new_nodes, weights=trapezoid_weights(new_nodes), kind="linear")
    grid = ParameterGrid((axis,))
    z = grid.integrate(new_values)
    return PosteriorDensity(grid=grid, values=new_values / z)


def marginalize(joint: PosteriorDensity, over: int) -> PosteriorDensity:
    """Integrate a 2-d posterior over the axis ``over``."""
    if joint.dims != 2:
        raise DomainError("marginalize needs a 2-d posterior")
    if over not in (0, 1):
        raise DomainError("axis index must be 0 or 1")
    w = joint.grid.axes[over].weights
    vals = (joint.values * w[:, None]).sum(axis=0) if over == 0 \
        else (joint.values * w[None, :]).sum(axis=1)
    keep = joint.grid.axes[1 - over]
    grid = ParameterGrid((keep,))
    z = grid.integrate(vals)
    return PosteriorDensity(grid=grid, values=vals / z)


def condition(joint: PosteriorDensity, fixed: int, value: float) -> PosteriorDensity:
    """Slice a 2-d posterior at a fixed coordinate (linear interpolation
    between the bracketing grid lines), renormalized over the free axis."""
    if joint.dims != 2:
        raise DomainError("condition needs a 2-d posterior")
    if fixed not in (0, 1):
        raise DomainError("axis index must be 0 or 1")
    nodes = joint.grid.axes[fixed].nodes
    value = float(value)
    if not (nodes[0] <= value <= nodes[-1]):
        raise DomainError(f"conditioning value {value} outside the grid span")
    i = int(np.clip(np.searchsorted(nodes, value) - 1, 0, nodes.size - 2))
    frac = (value - nodes[i]) / (nodes[i + 1] - nodes[i])
    if fixed == 0:
        slice_vals = (1 - frac) * joint.values[i, :] + frac * joint.values[i + 1, :]
    else:
        slice_vals = (1 - frac) * joint.values[:, i] + frac * joint.values[:, i + 1]
    keep = joint.grid.axes[1 - fixed]
    grid = ParameterGrid((keep,))
    z = grid.integrate(slice_vals)
    if not np.isfinite(z) or z <= 0.0:
        raise EmptyLikelihoodError("conditional slice has zero mass")
    return PosteriorDensity(grid=grid, values=slice_vals / z)


def credible_interval(post: PosteriorDensity, delta: float) -> CredibleInterval:
    """Equal-tail interval with content ``delta``."""
    if not (0.0 < delta < 1.0):
        raise DomainError("interval level must lie in (0, 1)")
    post._require_1d()
    lo, hi = post.equal_tail(delta)
    return CredibleInterval(lo=lo, hi=hi, level=float(delta))
