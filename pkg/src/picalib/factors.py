"""Consistency factors and their invariance machinery.

A factor is an unnormalized positive weight over the parameter space,
defined only up to a positive constant.  It is *not* a probability
distribution: nothing here integrates a factor on its own, and equality
between factors always means equality of ratios.

The module also carries the two verification tools built on factors:
the group functional-equation check (does w(g_a(theta)) |g_a'| / w(theta)
depend on theta?) and the q/r factorization scan that singles out the
flat location weight and the 1/sigma scale weight as the only pair for
which joint, conditional and marginal densities cohere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ImproperPosteriorError, SingularityError
from .families import (SCALING, TRANSLATION_SCALING, ROLE_LOCATION, ROLE_SCALE,
                       Sample, SamplingFamily, make_family)
from .grids import GridSpec, ParameterGrid
from .maps import MonotoneMap


@dataclass(frozen=True)
class ConsistencyFactor:
    """Positive parameter weight, defined up to a multiplicative constant."""

    dim: int
    kind: str
    log_weight: Callable = field(repr=False)
    qr: tuple[float, float] | None = None
    positive_axes: tuple[int, ...] = ()

    def weight(self, *theta) -> float | np.ndarray:
        """Weight value with domain checking (positive axes must be > 0)."""
        if len(theta) != self.dim:
            raise DomainError(f"factor is {self.dim}-dimensional, got {len(theta)} arguments")
        for i in self.positive_axes:
            if np.any(np.asarray(theta[i], dtype=float) <= 0.0):
                raise DomainError(f"factor '{self.kind}' needs argument {i} > 0")
        out = np.exp(self.log_weight(*(np.asarray(t, dtype=float) for t in theta)))
        if np.any(~np.isfinite(out)) or np.any(out <= 0.0):
            raise DomainError(f"factor '{self.kind}' is undefined at {theta}")
        return out if np.ndim(out) else float(out)


def location_factor() -> ConsistencyFactor:
    """Flat weight over a location parameter."""
    return ConsistencyFactor(dim=1, kind="location",
                             log_weight=lambda mu: np.zeros_like(np.asarray(mu, dtype=float)))


def scale_factor() -> ConsistencyFactor:
    """Weight 1/sigma over a scale parameter on (0, inf)."""
    return ConsistencyFactor(dim=1, kind="scale",
                             log_weight=lambda s: -np.log(s),
                             positive_axes=(0,))


def location_scale_factor() -> ConsistencyFactor:
    """Joint weight 1/sigma over (mu, sigma); independent of mu."""
    return ConsistencyFactor(dim=2, kind="location_scale",
                             log_weight=lambda mu, s: -np.log(s) + 0.0 * np.asarray(mu),
                             positive_axes=(1,))


def custom_factor(q: float, r: float) -> ConsistencyFactor:
    """Joint weight exp(-q mu) * sigma^-r in the location-scale chart."""
    q, r = float(q), float(r)
    return ConsistencyFactor(dim=2, kind="custom",
                             log_weight=lambda mu, s: -q * np.asarray(mu, dtype=float)
                             - r * np.log(s),
                             qr=(q, r), positive_axes=(1,))


def tilted_location_factor(q: float) -> ConsistencyFactor:
    """Weight exp(-q mu) over a location parameter (q != 0 breaks the
    translation functional equation's constant solution)."""
    q = float(q)
    return ConsistencyFactor(dim=1, kind="custom",
                             log_weight=lambda mu: -q * np.asarray(mu, dtype=float),
                             qr=(q, 0.0))


def power_scale_factor(r: float) -> ConsistencyFactor:
    """Weight sigma^-r over a scale parameter."""
    r = float(r)
    return ConsistencyFactor(dim=1, kind="custom",
                             log_weight=lambda s: -r * np.log(s),
                             qr=(0.0, r), positive_axes=(0,))


def factor_by_kind(kind: str, q: float | None = None, r: float | None = None,
                   dim_hint: int = 1) -> ConsistencyFactor:
    """Resolve the CLI/file spelling of a factor."""
    if kind == "location":
        return location_factor()
    if kind == "scale":
        return scale_factor()
    if kind == "location_scale":
        return location_scale_factor()
    if kind == "custom":
        qq = 0.0 if q is None else float(q)
        rr = 0.0 if r is None else float(r)
        if dim_hint == 2:
            return custom_factor(qq, rr)
        if r is None and q is not None:
            return tilted_location_factor(qq)
        return power_scale_factor(rr)
    raise DomainError(f"unknown factor kind '{kind}'")


# ---------------------------------------------------------------------------
# Transformation rule
# ---------------------------------------------------------------------------

def transform_factor(factor: ConsistencyFactor, pmap: MonotoneMap) -> ConsistencyFactor:
    """Factor for the reparameterized problem nu = g(theta):
    new weight(nu) = weight(g^-1(nu)) / |g'(g^-1(nu))| (constant fixed to 1)."""
    if factor.dim != 1:
        raise DomainError("transform_factor handles scalar parameters")

    def log_w(nu):
        theta = np.asarray(pmap.inverse(np.asarray(nu, dtype=float)), dtype=float)
        return factor.log_weight(theta) - np.log(np.abs(pmap.deriv_checked(theta)))

    return ConsistencyFactor(dim=1, kind=f"{factor.kind}|{pmap.name}", log_weight=log_w)


def factor_ratio_spread(a: ConsistencyFactor, b: ConsistencyFactor,
                        theta_samples: Sequence[float]) -> float:
    """Relative spread of weight_a / weight_b over sample points; ~0 means
    the two factors agree up to a constant."""
    pts = [np.asarray(t, dtype=float) for t in theta_samples]
    ratios = np.array([float(np.exp(a.log_weight(t) - b.log_weight(t))) for t in pts])
    if np.any(~np.isfinite(ratios)):
        raise SingularityError("factor ratio is not finite on the sample points")
    return float((ratios.max() - ratios.min()) / np.abs(ratios.mean()))


# ---------------------------------------------------------------------------
# Group functional equation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupAction:
    """A one- or two-parameter transformation group acting on parameters."""

    transform: Callable = field(repr=False)   # (a, theta) -> theta'
    jacobian: Callable = field(repr=False)    # (a, theta) -> |det d theta'/d theta|
    name: str = "action"


def translation_action() -> GroupAction:
    return GroupAction(transform=lambda a, th: th + a,
                       jacobian=lambda a, th: 1.0, name="translation")


def scaling_action() -> GroupAction:
    return GroupAction(transform=lambda a, th: a * th,
                       jacobian=lambda a, th: float(a), name="scaling")


def affine_action() -> GroupAction:
    """(a, b) acting on (mu, sigma) as (a mu + b, a sigma); Jacobian a^2."""
    def tf(ab, th):
        a, b = ab
        mu, s = th
        return (a * mu + b, a * s)

    return GroupAction(transform=tf, jacobian=lambda ab, th: float(ab[0]) ** 2,
                       name="affine")


def verify_group_equation(factor: ConsistencyFactor, action: GroupAction,
                          a_samples: Sequence, theta_samples: Sequence) -> float:
    """Maximum over group elements of the relative spread over theta of
    k(a, theta) = w(g_a(theta)) |J_a(theta)| / w(theta).

    Zero (to rounding) means k depends on the group element alone, i.e.
    the factor solves the invariance functional equation.
    """
    worst = 0.0
    for a in a_samples:
        ks = []
        for th in theta_samples:
            th_t = tuple(np.atleast_1d(np.asarray(th, dtype=float)))
            w0 = math.exp(float(factor.log_weight(*th_t)))
            if w0 == 0.0 or not np.isfinite(w0):
                raise SingularityError(f"factor weight vanishes at {th}")
            th_new = action.transform(a, th if len(th_t) > 1 else th_t[0])
            th_new_t = tuple(np.atleast_1d(np.asarray(th_new, dtype=float)))
            w1 = math.exp(float(factor.log_weight(*th_new_t)))
            jac = abs(float(action.jacobian(a, th)))
            ks.append(w1 * jac / w0)
        ks = np.asarray(ks)
        spread = float((ks.max() - ks.min()) / np.abs(ks.mean()))
        worst = max(worst, spread)
    return worst


# ---------------------------------------------------------------------------
# q/r factorization scan
# ---------------------------------------------------------------------------

def _resolve_ls_family(sample: Sample, family: SamplingFamily | None) -> SamplingFamily:
    fam = family if family is not None else make_family(sample.family_id)
    if fam.n_params != 2 or fam.invariance != TRANSLATION_SCALING \
            or fam.params[0].role != ROLE_LOCATION or fam.params[1].role != ROLE_SCALE:
        raise DomainError("factorization scan needs a location-scale family")
    return fam


def factorization_discrepancy(q: float, r: float, sample: Sample,
                              grid: GridSpec | ParameterGrid | None = None,
                              family: SamplingFamily | None = None) -> float:
    """Sup-norm failure of the product rule for the weights
    (exp(-q mu), sigma^-(q+1), joint sigma^-r).

    Builds the joint density with weight sigma^-r, the two conditionals
    with their weights, the marginals by quadrature, and returns the
    larger of the two sup-norm gaps
    |joint - f(mu|sigma) f(sigma)| and |joint - f(sigma|mu) f(mu)|,
    all densities normalized on the grid.  Exactly (q, r) = (0, 1)
    drives both gaps to rounding level.
    """
    fam = _resolve_ls_family(sample, family)
    if sample.n < 2:
        raise ImproperPosteriorError(
            "joint location-scale inference needs n >= 2; the n=1 joint "
            "with weight sigma^-r (r >= 1) does not normalize")
    grid = _scan_grid(fam, sample, grid)
    mu_ax, sg_ax = grid.axes
    mu = mu_ax.nodes[:, None]
    sg = sg_ax.nodes[None, :]
    w_mu = mu_ax.weights[:, None]
    w_sg = sg_ax.weights[None, :]

    loglik = np.zeros((mu_ax.n, sg_ax.n))
    for x in sample.values:
        loglik = loglik + fam.log_density(float(x), mu, sg)
    if np.any(np.isnan(loglik)):
        raise ImproperPosteriorError("log likelihood is NaN on the scan grid")
    log_sg = np.log(sg)

    def norm_joint(logv):
        v = np.exp(logv - logv.max())
        z = float(np.sum(v * w_mu * w_sg))
        if not np.isfinite(z) or z <= 0.0:
            raise ImproperPosteriorError("scan grid normalization failed")
        return v / z

    joint = norm_joint(-r * log_sg + loglik)

    # conditional over mu at each sigma, weight exp(-q mu)
    lc = -q * mu + loglik
    cond_mu = np.exp(lc - lc.max(axis=0, keepdims=True))
    cond_mu = cond_mu / np.sum(cond_mu * w_mu, axis=0, keepdims=True)
    # conditional over sigma at each mu, weight sigma^-(q+1)
    ls = -(q + 1.0) * log_sg + loglik
    cond_sg = np.exp(ls - ls.max(axis=1, keepdims=True))
    cond_sg = cond_sg / np.sum(cond_sg * w_sg, axis=1, keepdims=True)

    marg_sg = np.sum(joint * w_mu, axis=0)   # f(sigma)
    marg_mu = np.sum(joint * w_sg, axis=1)   # f(mu)

    d1 = float(np.max(np.abs(joint - cond_mu * marg_sg[None, :])))
    d2 = float(np.max(np.abs(joint - cond_sg * marg_mu[:, None])))
    out = max(d1, d2)
    if not np.isfinite(out):
        raise ImproperPosteriorError("factorization discrepancy is not finite")
    return out


def _scan_grid(fam, sample, grid):
    if isinstance(grid, ParameterGrid):
        return grid
    if isinstance(grid, GridSpec) and grid.is_explicit:
        return grid.build_explicit(("linear", "log"))
    # default: reuse the adaptive grid of the reference (q=0, r=1) joint
    from .posterior import assign  # deferred: posterior depends on this module
    spec = grid if isinstance(grid, GridSpec) else GridSpec()
    return assign(fam, location_scale_factor(), sample, spec).grid


def factorization_scan(q_list: Sequence[float], r_list: Sequence[float], sample: Sample,
                       grid: GridSpec | ParameterGrid | None = None,
                       family: SamplingFamily | None = None) -> np.ndarray:
    """Discrepancy matrix with rows over q and columns over r, all cells
    evaluated on one shared grid."""
    fam = _resolve_ls_family(sample, family)
    shared = _scan_grid(fam, sample, grid)
    return np.array([[factorization_discrepancy(q, r, sample, shared, fam)
                      for r in r_list] for q in q_list])
