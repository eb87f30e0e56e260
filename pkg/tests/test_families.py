"""Sampling family contracts: densities, distribution functions, samplers,
variate transformations."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

import picalib as pc
from picalib.families import SCALING, ROLE_SCALE, ParamSpec, SamplingFamily

ALL_CONTINUOUS = [
    ("gauss_loc", {"sigma0": 1.0}, [(-3.0,), (-0.5,), (0.0,), (1.7,), (12.0,)]),
    ("gauss_loc_scale", {}, [(0.0, 1.0), (-2.0, 0.5), (3.0, 2.0), (0.0, 0.1), (5.0, 7.0)]),
    ("exp_scale", {}, [(0.2,), (1.0,), (2.0,), (5.0,), (40.0,)]),
    ("cauchy_loc", {}, [(-3.0,), (0.0,), (0.5,), (2.0,), (10.0,)]),
    ("weibull", {"shape": 2.0}, [(0.5,), (1.0,), (2.0,), (3.0,), (8.0,)]),
    ("weibull", {}, [(1.0, 0.7), (1.0, 2.0), (2.0, 1.0), (0.5, 3.0), (4.0, 1.5)]),
    ("trunc_gauss_loc", {"sigma0": 1.0}, [(0.0,), (0.5,), (1.0,), (2.0,), (6.0,)]),
]


def test_density_closed_forms():
    gauss = pc.make_family("gauss_loc", sigma0=1.0)
    assert pc.density_at(gauss, 0.0, 0.0) == pytest.approx(0.3989423, abs=1e-7)
    expf = pc.make_family("exp_scale")
    assert pc.density_at(expf, 1.0, 1.0) == pytest.approx(0.3678794, abs=1e-7)
    cauchy = pc.make_family("cauchy_loc")
    # distribution at the center is exactly 1/2 by symmetry
    assert cauchy.cdf(3.25, 3.25) == pytest.approx(0.5, abs=1e-14)


def test_density_domain_and_support():
    expf = pc.make_family("exp_scale")
    with pytest.raises(pc.DomainError):
        pc.density_at(expf, 1.0, -2.0)
    # outside the support is zero, not an error
    assert pc.density_at(expf, -1.0, 1.0) == 0.0
    pois = pc.make_family("poisson")
    assert pc.density_at(pois, 2.5, 3.0) == 0.0  # non-integer count
    assert pc.density_at(pois, 2.0, 3.0) == pytest.approx(stats.poisson.pmf(2, 3.0))


@pytest.mark.parametrize("fam_id,hyper,thetas", ALL_CONTINUOUS)
def test_normalization(fam_id, hyper, thetas):
    fam = pc.make_family(fam_id, **hyper)
    lo, hi = fam.support
    for theta in thetas:
        # split at the density bulk so adaptive quadrature locks onto the peak
        c = float(theta[0]) if theta[0] > lo else lo + 1.0
        left, _ = integrate.quad(lambda x: fam.density(x, *theta), lo, c, limit=400)
        right, _ = integrate.quad(lambda x: fam.density(x, *theta), c, hi, limit=400)
        assert left + right == pytest.approx(1.0, abs=1e-8), (fam_id, theta)


def test_poisson_normalization():
    pois = pc.make_family("poisson")
    for lam in (0.3, 1.0, 2.0, 7.5, 30.0):
        total = sum(pois.density(float(k), lam) for k in range(int(lam + 40 * lam**0.5) + 20))
        assert total == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("fam_id,hyper,thetas", ALL_CONTINUOUS)
def test_distribution_monotone_with_limits(fam_id, hyper, thetas):
    fam = pc.make_family(fam_id, **hyper)
    lo, hi = fam.support
    xs = np.linspace(max(lo, -30.0), min(hi, 200.0), 400)
    theta = thetas[0]
    F = fam.cdf(xs, *theta)
    assert np.all(np.diff(F) >= -1e-12)
    assert fam.cdf(max(lo, -1e8), *theta) < 1e-6 or np.isfinite(lo)
    assert fam.cdf(np.inf if np.isinf(hi) else hi, *theta) == pytest.approx(1.0, abs=1e-12)
    assert fam.cdf(1e8 if np.isinf(hi) else hi, *theta) > 1.0 - 1e-6


def test_draw_determinism():
    fam = pc.make_family("gauss_loc")
    s1 = pc.draw(fam, 0.5, pc.stream(123, 7), 50)
    s2 = pc.draw(fam, 0.5, pc.stream(123, 7), 50)
    assert np.array_equal(s1.values, s2.values)
    s3 = pc.draw(fam, 0.5, pc.stream(123, 8), 50)
    assert not np.array_equal(s1.values, s3.values)


def test_draw_moments():
    expf = pc.make_family("exp_scale")
    xs = expf.draw((2.0,), pc.stream(5, 0), 100_000).values
    assert abs(xs.mean() - 2.0) < 0.02
    pois = pc.make_family("poisson")
    ks = pois.draw((3.0,), pc.stream(5, 1), 100_000).values
    assert abs(ks.var() - 3.0) < 0.05


@pytest.mark.parametrize("fam_id,hyper,theta", [
    ("gauss_loc", {"sigma0": 1.0}, (0.3,)),
    ("exp_scale", {}, (1.7,)),
    ("cauchy_loc", {}, (-1.0,)),
    ("weibull", {}, (1.2, 2.5)),
    ("gauss_loc_scale", {}, (1.0, 2.0)),
])
def test_sampler_matches_distribution_ks(fam_id, hyper, theta):
    fam = pc.make_family(fam_id, **hyper)
    xs = fam.draw(theta, pc.stream(9, hash(fam_id) % 1000), 100_000).values
    stat, p = stats.kstest(xs, lambda x: fam.cdf(x, *theta))
    assert p > 0.001, (fam_id, stat, p)


def test_poisson_sampler_chi2():
    pois = pc.make_family("poisson")
    lam = 3.0
    ks = pois.draw((lam,), pc.stream(9, 77), 100_000).values.astype(int)
    kmax = ks.max()
    observed = np.bincount(ks, minlength=kmax + 1)
    expected = stats.poisson.pmf(np.arange(kmax + 1), lam) * ks.size
    # pool the sparse tail so expected counts stay above ~5
    cut = np.searchsorted(expected[::-1].cumsum()[::-1] < 5.0, True)
    obs = np.append(observed[:cut], observed[cut:].sum())
    exp = np.append(expected[:cut], expected[cut:].sum())
    chi2 = ((obs - exp) ** 2 / exp).sum()
    p = stats.chi2.sf(chi2, df=obs.size - 1)
    assert p > 0.001


def test_pushforward_identity_and_roundtrip():
    expf = pc.make_family("exp_scale")
    same = pc.pushforward(expf, pc.identity_map())
    xs = np.array([0.1, 0.5, 1.0, 3.0])
    assert np.allclose(same.density(xs, 1.5), expf.density(xs, 1.5), rtol=1e-12)
    logged = pc.pushforward(expf, pc.log_map())
    back = pc.pushforward(logged, pc.exp_map())
    assert np.allclose(back.density(xs, 1.5), expf.density(xs, 1.5), rtol=1e-10)


def test_pushforward_log_exponential_is_gumbel_form():
    expf = pc.make_family("exp_scale")
    logged = pc.pushforward(expf, pc.log_map())
    # density exp{(y - mu) - e^(y - mu)} with mu = ln tau
    for tau in (0.5, 1.0, 4.0):
        mu = math.log(tau)
        ys = mu + np.array([-2.0, -0.5, 0.0, 1.0, 2.5])
        want = np.exp((ys - mu) - np.exp(ys - mu))
        assert np.allclose(logged.density(ys, tau), want, rtol=1e-12)
        assert logged.density(np.array([mu]), tau)[0] == pytest.approx(0.3678794, abs=1e-7)


def test_pushforward_preserves_probability():
    expf = pc.make_family("exp_scale")
    logged = pc.pushforward(expf, pc.log_map())
    a, b, tau = 0.4, 2.9, 1.3
    p_x, _ = integrate.quad(lambda x: expf.density(x, tau), a, b)
    p_y, _ = integrate.quad(lambda y: logged.density(y, tau), math.log(a), math.log(b))
    assert p_x == pytest.approx(p_y, abs=1e-8)


def test_pushforward_rejects_discrete():
    with pytest.raises(pc.UnsupportedOperationError):
        pc.pushforward(pc.make_family("poisson"), pc.log_map())


def half_gauss_scale():
    # sigma^-1 psi(x/sigma) with psi the half-normal shape
    c = math.sqrt(2.0 / math.pi)
    return SamplingFamily(
        id="half_gauss_scale",
        params=(ParamSpec("sigma", ROLE_SCALE, lo=0.0),),
        support=(0.0, np.inf),
        is_discrete=False,
        invariance=SCALING,
        _log_density=lambda x, s: math.log(c) - np.log(s) - 0.5 * (x / s) ** 2,
        _distribution=lambda x, s: 2.0 * stats.norm.cdf(x / s) - 1.0,
        _sampler=lambda rng, n, s: np.abs(rng.normal(0.0, s, size=n)),
        _initial_guess=lambda v: (float(np.sqrt(np.mean(v**2))),),
    )


def test_reduce_scale_to_location():
    expf = pc.make_family("exp_scale")
    reduced, vmap, pmap = pc.reduce_scale_to_location(expf)
    assert reduced.invariance == "translation"
    assert pmap.forward(np.array(1.0)) == pytest.approx(0.0)  # sigma=1 -> mu=0
    ys = np.array([-1.0, 0.0, 0.7])
    want = np.exp(ys - np.exp(ys))
    assert np.allclose(reduced.density(ys, 0.0), want, rtol=1e-12)

    hg = half_gauss_scale()
    reduced_hg, _, _ = pc.reduce_scale_to_location(hg)
    val, _ = integrate.quad(lambda y: reduced_hg.density(y, 0.3), -40, 12, limit=300)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_reduce_rejects_non_scale_family():
    with pytest.raises(pc.UnsupportedOperationError):
        pc.reduce_scale_to_location(pc.make_family("gauss_loc"))
    with pytest.raises(pc.UnsupportedOperationError):
        pc.reduce_scale_to_location(pc.make_family("weibull"))  # two free params


def test_registration_hook():
    pc.register_family("half_gauss_scale", lambda: half_gauss_scale())
    fam = pc.make_family("half_gauss_scale")
    assert fam.id == "half_gauss_scale"
    assert "half_gauss_scale" in pc.family_ids()
    with pytest.raises(pc.DomainError):
        pc.make_family("no_such_family")


def test_sample_validation():
    with pytest.raises(pc.DomainError):
        pc.Sample(values=np.array([]), family_id="gauss_loc")
    expf = pc.make_family("exp_scale")
    bad = pc.Sample(values=np.array([1.0, -2.0]), family_id="exp_scale")
    with pytest.raises(pc.DomainError):
        pc.validate_sample(expf, bad)


def test_trunc_gauss_sampling_law_is_full_gaussian():
    # the parameter space is constrained, the sampling density is not
    tf = pc.make_family("trunc_gauss_loc", sigma0=1.0)
    assert tf.density(-3.0, 0.0) == pytest.approx(stats.norm.pdf(-3.0), rel=1e-12)
    with pytest.raises(pc.DomainError):
        tf.density(0.0, -0.5)  # mu >= 0
