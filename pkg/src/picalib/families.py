"""Sampling families: densities, distribution functions, samplers.

Each family bundles everything the rest of the pipeline needs to treat
"the data model" as a value: a log-density (log-space throughout, so
n-fold likelihood products never underflow), the cumulative
distribution, a seeded sampler, parameter roles/domains, and an
invariance tag that records which transformation group (if any) leaves
the family's form fixed.

Built-ins are constructed through :func:`make_family`; new families can
be added programmatically with :func:`register_family`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, gammaincc, ndtr

from .errors import DomainError, UnsupportedOperationError
from .maps import MonotoneMap, log_map

_LOG_2PI = math.log(2.0 * math.pi)

# parameter roles understood by the grid builder
ROLE_LOCATION = "location"
ROLE_SCALE = "scale"
ROLE_SHAPE = "shape"
ROLE_RATE = "rate"

# invariance tags
TRANSLATION = "translation"
SCALING = "scaling"
TRANSLATION_SCALING = "translation+scaling"
NO_INVARIANCE = "none"


@dataclass(frozen=True)
class ParamSpec:
    """One free parameter: its name, role, and admissible interval."""

    name: str
    role: str
    lo: float = -np.inf
    hi: float = np.inf
    closed_lo: bool = False

    def contains(self, value) -> bool:
        v = np.asarray(value, dtype=float)
        lower_ok = (v >= self.lo) if self.closed_lo else (v > self.lo)
        return bool(np.all(lower_ok & (v < self.hi) & np.isfinite(v)))

    @property
    def positive(self) -> bool:
        return self.lo >= 0.0 and not self.closed_lo


@dataclass(frozen=True)
class SamplingFamily:
    """A parametric family of sampling distributions.

    Immutable after construction and safe to share across threads.  The
    callables broadcast over numpy arrays in both the observation and
    the parameters.
    """

    id: str
    params: tuple[ParamSpec, ...]
    support: tuple[float, float]
    is_discrete: bool
    invariance: str
    _log_density: Callable = field(repr=False)
    _distribution: Callable = field(repr=False)
    _sampler: Callable = field(repr=False)
    _initial_guess: Callable = field(repr=False)
    support_closed_lo: bool = True

    # -- parameter plumbing -------------------------------------------------

    @property
    def n_params(self) -> int:
        return len(self.params)

    def check_params(self, theta: Sequence[float]) -> tuple[float, ...]:
        theta = tuple(float(t) for t in np.atleast_1d(np.asarray(theta, dtype=float)))
        if len(theta) != self.n_params:
            raise DomainError(
                f"{self.id}: expected {self.n_params} parameter(s), got {len(theta)}")
        for spec, t in zip(self.params, theta):
            if not spec.contains(t):
                raise DomainError(f"{self.id}: {spec.name}={t} outside ({spec.lo}, {spec.hi})")
        return theta

    def in_support(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        ok = (x >= lo) if self.support_closed_lo else (x > lo)
        ok = ok & (x <= hi)
        if self.is_discrete:
            ok = ok & (np.floor(x) == x)
        return ok

    # -- evaluation ---------------------------------------------------------

    def log_density(self, x, *theta):
        """Unchecked log density/pmf; callers guarantee x, theta admissible."""
        return self._log_density(np.asarray(x, dtype=float), *theta)

    def density(self, x, *theta):
        """Density (pmf if discrete) at x.  Zero outside the support; a
        parameter outside its domain raises :class:`DomainError`."""
        self.check_params(theta)
        x = np.asarray(x, dtype=float)
        ok = self.in_support(x)
        out = np.zeros_like(x, dtype=float)
        if np.any(ok):
            vals = np.exp(self._log_density(np.where(ok, x, self._safe_x()), *theta))
            out = np.where(ok, vals, 0.0)
        return out if out.ndim else float(out)

    def cdf(self, x, *theta):
        self.check_params(theta)
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        below = x < lo if not self.is_discrete else x < lo
        out = np.clip(self._distribution(np.clip(x, lo, hi), *theta), 0.0, 1.0)
        out = np.where(below, 0.0, out)
        out = np.where(x >= hi, 1.0, out)
        return out if out.ndim else float(out)

    def _safe_x(self) -> float:
        lo, hi = self.support
        if np.isfinite(lo) and np.isfinite(hi):
            return 0.5 * (lo + hi)
        if np.isfinite(lo):
            return lo + 1.0
        if np.isfinite(hi):
            return hi - 1.0
        return 0.0

    # -- sampling -----------------------------------------------------------

    def draw(self, theta: Sequence[float], rng: np.random.Generator, n: int) -> "Sample":
        """n independent draws at theta; a pure function of the stream state."""
        theta = self.check_params(theta)
        if n < 1:
            raise DomainError("sample size must be >= 1")
        values = np.asarray(self._sampler(rng, int(n), *theta), dtype=float)
        return Sample(values=values, family_id=self.id)

    def initial_guess(self, values: np.ndarray) -> tuple[float, ...]:
        """Cheap parameter estimate used for grid centering and MLE starts."""
        return tuple(float(v) for v in self._initial_guess(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class Sample:
    """Observed values tied to the family they were drawn from."""

    values: np.ndarray
    family_id: str

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if vals.size == 0:
            raise DomainError("sample must be non-empty")
        if not np.all(np.isfinite(vals)):
            raise DomainError("sample contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return int(self.values.size)


def validate_sample(family: SamplingFamily, sample: Sample) -> None:
    if not np.all(family.in_support(sample.values)):
        raise DomainError(f"sample values outside the support of {family.id}")


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------

def gauss_loc(sigma0: float = 1.0) -> SamplingFamily:
    """Gaussian with known width sigma0, unknown location mu."""
    if sigma0 <= 0:
        raise DomainError("sigma0 must be positive")
    s = float(sigma0)
    return SamplingFamily(
        id="gauss_loc",
        params=(ParamSpec("mu", ROLE_LOCATION),),
        support=(-np.inf, np.inf),
        is_discrete=False,
        invariance=TRANSLATION,
        _log_density=lambda x, mu: -0.5 * ((x - mu) / s) ** 2 - math.log(s) - 0.5 * _LOG_2PI,
        _distribution=lambda x, mu: ndtr((x - mu) / s),
        _sampler=lambda rng, n, mu: rng.normal(mu, s, size=n),
        _initial_guess=lambda v: (np.mean(v),),
    )


def gauss_loc_scale() -> SamplingFamily:
    """Gaussian with both location mu and width sigma free."""
    def guess(v):
        sd = float(np.std(v))
        if sd <= 0.0:
            sd = 1e-3 * (1.0 + abs(float(np.mean(v))))
        return (float(np.mean(v)), sd)

    return SamplingFamily(
        id="gauss_loc_scale",
        params=(ParamSpec("mu", ROLE_LOCATION), ParamSpec("sigma", ROLE_SCALE, lo=0.0)),
        support=(-np.inf, np.inf),
        is_discrete=False,
        invariance=TRANSLATION_SCALING,
        _log_density=lambda x, mu, sg: (-0.5 * ((x - mu) / sg) ** 2
                                        - np.log(sg) - 0.5 * _LOG_2PI),
        _distribution=lambda x, mu, sg: ndtr((x - mu) / sg),
        _sampler=lambda rng, n, mu, sg: rng.normal(mu, sg, size=n),
        _initial_guess=guess,
    )


def exp_scale() -> SamplingFamily:
    """Exponential with scale tau: density tau^-1 exp(-x/tau) on x >= 0."""
    return SamplingFamily(
        id="exp_scale",
        params=(ParamSpec("tau", ROLE_SCALE, lo=0.0),),
        support=(0.0, np.inf),
        is_discrete=False,
        invariance=SCALING,
        _log_density=lambda x, tau: -np.log(tau) - x / tau,
        _distribution=lambda x, tau: -np.expm1(-x / tau),
        _sampler=lambda rng, n, tau: rng.exponential(tau, size=n),
        _initial_guess=lambda v: (max(np.mean(v), 1e-300),),
    )


def cauchy_loc(gamma0: float = 1.0) -> SamplingFamily:
    """Cauchy with known half-width gamma0, unknown location mu."""
    if gamma0 <= 0:
        raise DomainError("gamma0 must be positive")
    g = float(gamma0)
    return SamplingFamily(
        id="cauchy_loc",
        params=(ParamSpec("mu", ROLE_LOCATION),),
        support=(-np.inf, np.inf),
        is_discrete=False,
        invariance=TRANSLATION,
        _log_density=lambda x, mu: -np.log1p(((x - mu) / g) ** 2) - math.log(math.pi * g),
        _distribution=lambda x, mu: 0.5 + np.arctan((x - mu) / g) / math.pi,
        _sampler=lambda rng, n, mu: mu + g * rng.standard_cauchy(size=n),
        _initial_guess=lambda v: (np.median(v),),
    )


def _weibull_logpdf(x, sigma, k):
    z = x / sigma
    return np.log(k) - np.log(sigma) + (k - 1.0) * np.log(z) - z ** k


def weibull(shape: float | None = None) -> SamplingFamily:
    """Weibull on x > 0.

    With ``shape`` fixed it is a pure scale family (and so reducible to a
    location family by the log map); with the shape free it carries no
    continuous invariance.
    """
    if shape is not None:
        if shape <= 0:
            raise DomainError("shape must be positive")
        k = float(shape)

        def guess1(v):
            # closed-form scale MLE for known shape
            return ((np.mean(v ** k)) ** (1.0 / k),)

        return SamplingFamily(
            id="weibull",
            params=(ParamSpec("sigma", ROLE_SCALE, lo=0.0),),
            support=(0.0, np.inf),
            is_discrete=False,
            invariance=SCALING,
            support_closed_lo=False,
            _log_density=lambda x, sg: _weibull_logpdf(x, sg, k),
            _distribution=lambda x, sg: -np.expm1(-(x / sg) ** k),
            _sampler=lambda rng, n, sg: sg * rng.weibull(k, size=n),
            _initial_guess=guess1,
        )

    def guess2(v):
        lv = np.log(v)
        sd = float(np.std(lv))
        k_hat = math.pi / (math.sqrt(6.0) * max(sd, 1e-6))
        k_hat = float(np.clip(k_hat, 0.05, 50.0))
        sg_hat = float(np.mean(v ** k_hat) ** (1.0 / k_hat))
        return (sg_hat, k_hat)

    return SamplingFamily(
        id="weibull",
        params=(ParamSpec("sigma", ROLE_SCALE, lo=0.0), ParamSpec("k", ROLE_SHAPE, lo=0.0)),
        support=(0.0, np.inf),
        is_discrete=False,
        invariance=NO_INVARIANCE,
        support_closed_lo=False,
        _log_density=_weibull_logpdf,
        _distribution=lambda x, sg, k: -np.expm1(-(x / sg) ** k),
        _sampler=lambda rng, n, sg, k: sg * rng.weibull(k, size=n),
        _initial_guess=guess2,
    )


def poisson() -> SamplingFamily:
    """Poisson counts with rate lam; the discrete member of the zoo."""
    return SamplingFamily(
        id="poisson",
        params=(ParamSpec("lam", ROLE_RATE, lo=0.0),),
        support=(0.0, np.inf),
        is_discrete=True,
        invariance=NO_INVARIANCE,
        _log_density=lambda x, lam: x * np.log(lam) - lam - gammaln(x + 1.0),
        _distribution=lambda x, lam: gammaincc(np.floor(x) + 1.0, lam),
        _sampler=lambda rng, n, lam: rng.poisson(lam, size=n),
        _initial_guess=lambda v: (max(np.mean(v), 1e-12),),
    )


def trunc_gauss_loc(sigma0: float = 1.0) -> SamplingFamily:
    """Gaussian location family with the *parameter space* constrained to
    mu >= 0.  The sampling law itself is an ordinary Gaussian; only the
    admissible parameter values are truncated, which is exactly what
    breaks the translation invariance.
    """
    if sigma0 <= 0:
        raise DomainError("sigma0 must be positive")
    s = float(sigma0)
    return SamplingFamily(
        id="trunc_gauss_loc",
        params=(ParamSpec("mu", ROLE_LOCATION, lo=0.0, closed_lo=True),),
        support=(-np.inf, np.inf),
        is_discrete=False,
        invariance=NO_INVARIANCE,
        _log_density=lambda x, mu: -0.5 * ((x - mu) / s) ** 2 - math.log(s) - 0.5 * _LOG_2PI,
        _distribution=lambda x, mu: ndtr((x - mu) / s),
        _sampler=lambda rng, n, mu: rng.normal(mu, s, size=n),
        _initial_guess=lambda v: (max(np.mean(v), 0.0),),
    )


_REGISTRY: dict[str, Callable[..., SamplingFamily]] = {
    "gauss_loc": gauss_loc,
    "gauss_loc_scale": gauss_loc_scale,
    "exp_scale": exp_scale,
    "cauchy_loc": cauchy_loc,
    "weibull": weibull,
    "poisson": poisson,
    "trunc_gauss_loc": trunc_gauss_loc,
}


def register_family(family_id: str, builder: Callable[..., SamplingFamily]) -> None:
    """Add a family constructor under ``family_id`` (overwrites existing)."""
    _REGISTRY[family_id] = builder


def family_ids() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def make_family(family_id: str, **hyper) -> SamplingFamily:
    """Instantiate a registered family with fixed hyperparameters."""
    try:
        builder = _REGISTRY[family_id]
    except KeyError:
        raise DomainError(f"unknown family id '{family_id}'; known: {family_ids()}") from None
    return builder(**hyper)


# ---------------------------------------------------------------------------
# Variate transformations
# ---------------------------------------------------------------------------

def density_at(family: SamplingFamily, x, theta) -> float:
    """Density of ``family`` at observation x and parameter point theta."""
    theta = (theta,) if np.isscalar(theta) else tuple(theta)
    return family.density(x, *theta)


def draw(family: SamplingFamily, theta, stream_: np.random.Generator, n: int) -> Sample:
    theta = (theta,) if np.isscalar(theta) else tuple(theta)
    return family.draw(theta, stream_, n)


def pushforward(family: SamplingFamily, vmap: MonotoneMap) -> SamplingFamily:
    """The family of y = g(x): density picks up the usual 1/|dy/dx| factor.

    Only defined for continuous variates; the parameters are untouched.
    """
    if family.is_discrete:
        raise UnsupportedOperationError("cannot push a pmf through a continuous map")
    lo, hi = family.support
    with np.errstate(divide="ignore"):
        a = float(vmap.forward(np.array(lo if np.isfinite(lo) else -1e300)))
        b = float(vmap.forward(np.array(hi if np.isfinite(hi) else 1e300)))
    increasing = b >= a
    new_support = (min(a, b), max(a, b))
    new_support = tuple(np.where(np.abs(new_support) >= 1e299,
                                 np.copysign(np.inf, new_support), new_support))

    def log_density(y, *theta):
        x = vmap.inverse(y)
        return family.log_density(x, *theta) - np.log(np.abs(vmap.derivative(x)))

    def distribution(y, *theta):
        x = vmap.inverse(y)
        F = family._distribution(x, *theta)
        return F if increasing else 1.0 - F

    def sampler(rng, n, *theta):
        return vmap.forward(family._sampler(rng, n, *theta))

    def initial_guess(v):
        return family._initial_guess(np.asarray(vmap.inverse(v), dtype=float))

    return SamplingFamily(
        id=f"{family.id}|{vmap.name}",
        params=family.params,
        support=(float(new_support[0]), float(new_support[1])),
        is_discrete=False,
        invariance=NO_INVARIANCE,
        support_closed_lo=family.support_closed_lo,
        _log_density=log_density,
        _distribution=distribution,
        _sampler=sampler,
        _initial_guess=initial_guess,
    )


def reduce_scale_to_location(family: SamplingFamily) -> tuple[SamplingFamily, MonotoneMap, MonotoneMap]:
    """Rewrite a scale family on (0, inf) as a location family via logs.

    Returns (log-variate family in the log-parameter, the variate map
    y = ln x, and the parameter map mu = ln sigma).  The returned family
    has density exp(y - mu) * psi(exp(y - mu)) when the original is
    sigma^-1 psi(x / sigma).
    """
    if family.invariance != SCALING or family.n_params != 1 \
            or family.params[0].role != ROLE_SCALE:
        raise UnsupportedOperationError(f"{family.id} is not a one-parameter scale family")
    lo, hi = family.support
    if lo != 0.0 or np.isfinite(hi):
        raise UnsupportedOperationError("scale reduction needs support (0, inf)")
    vmap = log_map()
    pmap = log_map()

    def log_density(y, mu):
        return family.log_density(np.exp(y), np.exp(mu)) + y

    def distribution(y, mu):
        return family._distribution(np.exp(y), np.exp(mu))

    def sampler(rng, n, mu):
        return np.log(family._sampler(rng, n, np.exp(mu)))

    def initial_guess(v):
        (s_hat,) = family._initial_guess(np.exp(np.asarray(v, dtype=float)))
        return (math.log(s_hat),)

    name = family.params[0].name
    reduced = SamplingFamily(
        id=f"{family.id}|log",
        params=(ParamSpec(f"log_{name}", ROLE_LOCATION),),
        support=(-np.inf, np.inf),
        is_discrete=False,
        invariance=TRANSLATION,
        _log_density=log_density,
        _distribution=distribution,
        _sampler=sampler,
        _initial_guess=initial_guess,
    )
    return reduced, vmap, pmap
