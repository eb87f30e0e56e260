"""Frequency verification of posterior intervals.

``run_coverage`` plays the long-run game: draw data at a known true
parameter, assign the posterior, cut the equal-tail interval, record
whether it contains the truth, repeat.  For invariant families with
their matched weights the hit frequency reproduces the interval content
delta to Monte Carlo precision; deliberately broken settings miss it by
a wide margin.

Trials are independent work units.  Each derives its own random stream
from (master seed, namespace, sweep index, trial index) and the tallies
are plain sums, so reports are bit-identical for any worker count or
chunk schedule.

``exact_calibration_residual`` checks the pointwise identity between
the assigned density and |dF(x, theta)/d theta| for one-datum
posteriors, which is the sharp (non-Monte-Carlo) form of the same
calibration statement.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .errors import (CalibrationInfeasibleError, DomainError, ImproperPosteriorError,
                     InvalidInputError, PicalibError)
from .factors import ConsistencyFactor, factor_by_kind
from .families import Sample, SamplingFamily, make_family
from .grids import GridSpec, ParameterGrid
from .posterior import PosteriorDensity, assign, marginalize
from .rng import stream

WORKERS_ENV = "PICALIB_WORKERS"

_TRIAL_NS = 0      # stream namespaces under the master seed
_TEMPLATE_NS = 1

_FAST_EDGE_TOL = 1e-6
_FAST_OUTER_TOL = 1e-6
_INLINE_TRIAL_LIMIT = 4000   # below this a process pool costs more than it saves


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class CalibrationSpec:
    """One coverage experiment: which inference, which truth, how often."""

    family_id: str
    factor: str
    true_params: Sequence
    n: int
    delta: float
    trials: int
    seed: int
    hyper: dict = field(default_factory=dict)
    q: float | None = None
    r: float | None = None
    method: str = "exact_assign"        # or "gaussian_approx"
    param_index: int = 0                 # component checked for containment
    grid_nodes: int = 1001
    tail_rel: float = 1e-10
    workers: int | None = None

    def __post_init__(self):
        if self.trials < 1000:
            raise DomainError("coverage runs need at least 1000 trials")
        if not (0.0 < self.delta < 1.0):
            raise DomainError("delta must lie in (0, 1)")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.method not in ("exact_assign", "gaussian_approx"):
            raise DomainError(f"unknown interval method '{self.method}'")
        object.__setattr__(self, "sweep", _as_sweep(self.true_params))
        fam = self.make_family()
        for theta in self.sweep:
            fam.check_params(theta)
        if not 0 <= self.param_index < fam.n_params:
            raise DomainError("param_index out of range")

    def make_family(self) -> SamplingFamily:
        return make_family(self.family_id, **self.hyper)

    def make_factor(self) -> ConsistencyFactor:
        fam = self.make_family()
        return factor_by_kind(self.factor, q=self.q, r=self.r, dim_hint=fam.n_params)


def _as_sweep(true_params) -> tuple[tuple[float, ...], ...]:
    if np.isscalar(true_params):
        return ((float(true_params),),)
    seq = list(true_params)
    if not seq:
        raise DomainError("true_params must not be empty")
    if all(np.isscalar(v) for v in seq):
        return tuple((float(v),) for v in seq)
    return tuple(tuple(float(x) for x in v) for v in seq)


@dataclass(frozen=True)
class ValueCoverage:
    """Tally for one true-parameter point."""

    true_params: tuple
    hits: int
    trials: int
    improper_count: int
    degenerate_count: int
    coverage: float
    std_error: float
    z_score: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CoverageReport:
    """Aggregate frequency result with its binomial error bar.

    Trials aborted by improper posteriors are excluded from the
    coverage denominator and reported in ``improper_count``;
    ``degenerate_count`` tallies trials whose interval collapsed
    (boundary maximum-likelihood point) and which therefore count as
    misses.  ``passed`` is the |z| < 4 verdict.
    """

    delta: float
    n: int
    seed: int
    method: str
    hits: int
    trials: int
    improper_count: int
    degenerate_count: int
    coverage: float
    std_error: float
    z_score: float
    passed: bool
    by_value: tuple[ValueCoverage, ...]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["by_value"] = [v.to_dict() for v in self.by_value]
        return d


def _zstats(hits, effective, delta):
    coverage = hits / effective if effective else float("nan")
    se = float(np.sqrt(delta * (1.0 - delta) / effective)) if effective else float("nan")
    z = (coverage - delta) / se if effective else float("nan")
    return coverage, se, z


# ---------------------------------------------------------------------------
# Trial engine
# ---------------------------------------------------------------------------

def _shiftable(fam: SamplingFamily) -> bool:
    # A template grid may be re-anchored only where translating (or, on a
    # log axis, rescaling) cannot cross a parameter-domain boundary.
    for p, kind in zip(fam.params, _axis_kinds(fam)):
        if kind == "linear" and (np.isfinite(p.lo) or np.isfinite(p.hi)):
            return False
    return True


def _axis_kinds(fam: SamplingFamily):
    from .grids import axis_kind_for_role
    return tuple(axis_kind_for_role(p.role) for p in fam.params)


def _build_template(fam, factor, theta_true, n, seed, sweep_idx, grid_nodes, tail_rel):
    """Grid built once from a representative draw, plus the anchor (the
    cheap parameter estimate of that draw) used to re-position it per trial."""
    if not _shiftable(fam):
        return None
    rng = stream(seed, _TEMPLATE_NS, sweep_idx)
    sample = fam.draw(theta_true, rng, n)
    try:
        post = assign(fam, factor, sample, GridSpec(n_nodes=grid_nodes, tail_rel=tail_rel))
    except PicalibError:
        return None
    return post.grid.axes, fam.initial_guess(sample.values)


def _shift_axis(ax, old, new):
    """Translate (linear) or rescale (log) an axis so the anchor moves
    old -> new; weights follow the jacobian on log axes."""
    from dataclasses import replace
    if ax.kind == "log":
        ratio = new / old
        return replace(ax, nodes=ax.nodes * ratio, weights=ax.weights * ratio,
                       center=None if ax.center is None else ax.center * ratio)
    off = new - old
    return replace(ax, nodes=ax.nodes + off,
                   center=None if ax.center is None else ax.center + off)


def _diag_ok(diag: dict) -> bool:
    if "edge_rel" in diag:
        return diag["edge_rel"] <= _FAST_EDGE_TOL and diag["outer_frac"] <= _FAST_OUTER_TOL
    return all(diag.get(f"axis{i}_edge_rel", 1.0) <= _FAST_EDGE_TOL
               and diag.get(f"axis{i}_outer_frac", 1.0) <= _FAST_OUTER_TOL
               for i in range(2))


def _posterior_for_trial(fam, factor, sample, template, grid_nodes, tail_rel):
    if template is not None:
        axes, anchors = template
        guess = fam.initial_guess(sample.values)
        try:
            shifted = tuple(_shift_axis(ax, old, new)
                            for ax, old, new in zip(axes, anchors, guess))
            post = assign(fam, factor, sample, ParameterGrid(shifted))
            if _diag_ok(post.diagnostics):
                return post
        except PicalibError:
            pass
    return assign(fam, factor, sample, GridSpec(n_nodes=grid_nodes, tail_rel=tail_rel))


def _gaussian_interval_posterior(fam, sample, grid_nodes) -> PosteriorDensity:
    # deferred import: asymptotics builds on this module's run_coverage
    from .asymptotics import gaussian_approx, mle
    res = mle(fam, sample)
    if not res.converged or res.at_boundary:
        raise InvalidInputError("boundary or non-converged MLE")
    return gaussian_approx(res, n_nodes=grid_nodes)


def _run_chunk(family_id, hyper, factor_kind, q, r, method, theta_true, n, delta,
               seed, sweep_idx, lo, hi, template, grid_nodes, tail_rel,
               param_index) -> tuple[int, int, int]:
    """Tally (hits, improper, degenerate) over trials [lo, hi)."""
    fam = make_family(family_id, **hyper)
    factor = factor_by_kind(factor_kind, q=q, r=r, dim_hint=fam.n_params)
    hits = improper = degenerate = 0
    target = theta_true[param_index]
    for t in range(lo, hi):
        rng = stream(seed, _TRIAL_NS, sweep_idx, t)
        sample = fam.draw(theta_true, rng, n)
        try:
            if method == "gaussian_approx":
                try:
                    post = _gaussian_interval_posterior(fam, sample, grid_nodes)
                except InvalidInputError:
                    degenerate += 1  # collapsed interval cannot cover: a miss
                    continue
            else:
                post = _posterior_for_trial(fam, factor, sample, template,
                                            grid_nodes, tail_rel)
            if post.dims == 2:
                post = marginalize(post, over=1 - param_index)
            qlo, qhi = post.equal_tail(delta)
        except ImproperPosteriorError:
            improper += 1
            continue
        if qlo <= target <= qhi:
            hits += 1
    return hits, improper, degenerate


def run_coverage(spec: CalibrationSpec) -> CoverageReport:
    """Monte Carlo containment frequency of delta equal-tail intervals.

    Deterministic in (spec, master seed): trials own derived streams and
    the reduction is a plain sum, so any worker count or chunking gives
    the same report.  Raises :class:`CalibrationInfeasibleError` (with
    the partial report attached) when more than 1% of trials abort with
    improper posteriors.
    """
    fam = spec.make_family()
    factor = spec.make_factor()
    workers = spec.workers if spec.workers is not None else default_workers()
    by_value = []
    tot_hits = tot_improper = tot_degenerate = 0
    for sweep_idx, theta_true in enumerate(spec.sweep):
        template = None
        if spec.method == "exact_assign":
            template = _build_template(fam, factor, theta_true, spec.n, spec.seed,
                                       sweep_idx, spec.grid_nodes, spec.tail_rel)
        args = (spec.family_id, dict(spec.hyper), spec.factor, spec.q, spec.r,
                spec.method, theta_true, spec.n, spec.delta, spec.seed, sweep_idx)
        tail = (template, spec.grid_nodes, spec.tail_rel, spec.param_index)
        if workers <= 1 or spec.trials < _INLINE_TRIAL_LIMIT:
            hits, improper, degenerate = _run_chunk(*args, 0, spec.trials, *tail)
        else:
            chunk = max(1000, -(-spec.trials // (workers * 4)))
            bounds = [(lo, min(lo + chunk, spec.trials))
                      for lo in range(0, spec.trials, chunk)]
            hits = improper = degenerate = 0
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_chunk, *args, lo, hi, *tail)
                           for lo, hi in bounds]
                for fut in futures:
                    h, i, d = fut.result()
                    hits += h
                    improper += i
                    degenerate += d
        effective = spec.trials - improper
        cov, se, z = _zstats(hits, effective, spec.delta)
        by_value.append(ValueCoverage(true_params=tuple(theta_true), hits=hits,
                                      trials=spec.trials, improper_count=improper,
                                      degenerate_count=degenerate, coverage=cov,
                                      std_error=se, z_score=z))
        tot_hits += hits
        tot_improper += improper
        tot_degenerate += degenerate
    total = spec.trials * len(spec.sweep)
    effective = total - tot_improper
    cov, se, z = _zstats(tot_hits, effective, spec.delta)
    report = CoverageReport(delta=spec.delta, n=spec.n, seed=spec.seed,
                            method=spec.method, hits=tot_hits, trials=total,
                            improper_count=tot_improper,
                            degenerate_count=tot_degenerate, coverage=cov,
                            std_error=se, z_score=z,
                            passed=bool(abs(z) < 4.0) if np.isfinite(z) else False,
                            by_value=tuple(by_value))
    if tot_improper > 0.01 * total:
        raise CalibrationInfeasibleError(
            f"{tot_improper}/{total} trials aborted with improper posteriors",
            report=report)
    return report


# ---------------------------------------------------------------------------
# Exact pointwise calibration
# ---------------------------------------------------------------------------

def exact_calibration_residual(family: SamplingFamily, factor: ConsistencyFactor,
                               x_samples: Sequence[float],
                               grid: GridSpec | ParameterGrid | None = None) -> float:
    """Sup-norm gap between the one-datum posterior and |dF(x,theta)/dtheta|.

    The theta derivative is a central finite difference of the family's
    distribution function with step 1e-5 times the posterior's central
    (interquartile) width, which keeps the step meaningful on graded
    grids whose full span can be many orders of magnitude wider than
    the bulk.
    """
    if family.is_discrete:
        raise DomainError("exact calibration residual is defined for continuous variates")
    if family.n_params != 1:
        raise DomainError("exact calibration residual needs one free parameter")
    if grid is None:
        # the sup-norm check is sensitive to the normalization constant, so
        # spend extra nodes here; power-law tails carry a small convex bias
        # under the trapezoid rule at the default resolution
        grid = GridSpec(n_nodes=4001)
    p = family.params[0]
    worst = 0.0
    for x in x_samples:
        post = assign(family, factor, Sample(values=np.array([float(x)]),
                                             family_id=family.id), grid)
        nodes = post.nodes
        h = 1e-5 * (post.quantile(0.75) - post.quantile(0.25))
        hp = nodes + h
        hm = nodes - h
        if np.isfinite(p.lo):
            hm = np.maximum(hm, p.lo + 0.25 * (nodes - p.lo))
        fd = np.abs(family._distribution(float(x), hp)
                    - family._distribution(float(x), hm)) / (hp - hm)
        worst = max(worst, float(np.max(np.abs(post.values - fd))))
    return worst
