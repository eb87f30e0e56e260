"""Posterior assignment, updating, reshaping, and intervals."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

import picalib as pc
from picalib.families import ROLE_LOCATION, ParamSpec, SamplingFamily
from picalib.grids import explicit_axis
from picalib.posterior import PosteriorDensity


def gauss():
    return pc.make_family("gauss_loc", sigma0=1.0)


def sample_of(fam, *values):
    return pc.Sample(values=np.array(values, dtype=float), family_id=fam.id)


# ---------------------------------------------------------------------------
# assign
# ---------------------------------------------------------------------------

def test_assign_gaussian_conjugate():
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 0.5))
    assert post.mean() == pytest.approx(0.5, abs=1e-4)
    assert post.sd() == pytest.approx(1.0, abs=1e-4)


def test_assign_exponential_scale():
    fam = pc.make_family("exp_scale")
    post = pc.assign(fam, pc.scale_factor(), sample_of(fam, 1.0))
    # closed form x tau^-2 exp(-x/tau): mode x/2, normalization 1/x
    assert post.mode() == pytest.approx(0.5, abs=2e-3)
    want = post.nodes**-2 * np.exp(-1.0 / post.nodes)
    assert np.allclose(post.values, want, rtol=5e-5)


def test_assign_flat_weight_on_scale_is_improper():
    fam = pc.make_family("exp_scale")
    with pytest.raises(pc.ImproperPosteriorError):
        pc.assign(fam, pc.location_factor(), sample_of(fam, 1.0))


def test_assign_dimension_mismatch():
    with pytest.raises(pc.DomainError):
        pc.assign(gauss(), pc.location_scale_factor(), sample_of(gauss(), 0.0))


def test_assign_normalizes_to_one():
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 2.0, -1.0, 0.3))
    assert post.grid.integrate(post.values) == pytest.approx(1.0, abs=1e-12)


def test_posterior_tail_rule_on_standard_case():
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 0.0))
    peak = post.values.max()
    assert post.values[0] < 1e-10 * peak
    assert post.values[-1] < 1e-10 * peak


# ---------------------------------------------------------------------------
# update
# ---------------------------------------------------------------------------

def test_update_gaussian_two_observations():
    fam = gauss()
    post = pc.assign(fam, pc.location_factor(), sample_of(fam, 1.0))
    post = pc.update(post, fam, 3.0)
    assert post.mean() == pytest.approx(2.0, abs=1e-4)
    assert post.sd() == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-4)


def test_update_order_invariance():
    fam = gauss()
    base = pc.assign(fam, pc.location_factor(), sample_of(fam, 1.0, 3.0))
    grid = base.grid
    p12 = pc.update(pc.assign(fam, pc.location_factor(), sample_of(fam, 1.0), grid), fam, 3.0)
    p21 = pc.update(pc.assign(fam, pc.location_factor(), sample_of(fam, 3.0), grid), fam, 1.0)
    assert pc.l1_distance(p12, p21) < 1e-10


def test_batch_equals_sequential():
    fam = gauss()
    values = [0.2, -1.1, 0.9, 2.4]
    batch = pc.assign(fam, pc.location_factor(), sample_of(fam, *values))
    seq = pc.assign(fam, pc.location_factor(), sample_of(fam, values[0]), batch.grid)
    for v in values[1:]:
        seq = pc.update(seq, fam, v)
    assert pc.l1_distance(batch, seq) < 1e-8


def flat_likelihood_family():
    # density of x doesn't involve theta at all: Bayes must be a no-op
    return SamplingFamily(
        id="theta_free",
        params=(ParamSpec("mu", ROLE_LOCATION),),
        support=(0.0, 1.0),
        is_discrete=False,
        invariance="none",
        _log_density=lambda x, mu: np.zeros(np.broadcast(x, mu).shape),
        _distribution=lambda x, mu: np.clip(x, 0.0, 1.0) + 0.0 * mu,
        _sampler=lambda rng, n, mu: rng.uniform(0.0, 1.0, size=n),
        _initial_guess=lambda v: (0.0,),
    )


def test_update_with_flat_likelihood_is_identity():
    fam = gauss()
    prior = pc.assign(fam, pc.location_factor(), sample_of(fam, 0.5))
    flat = flat_likelihood_family()
    updated = pc.update(prior, flat, 0.3)
    assert pc.l1_distance(prior, updated) < 1e-10


def test_update_outside_support_raises():
    fam = pc.make_family("exp_scale")
    prior = pc.assign(fam, pc.scale_factor(), sample_of(fam, 1.0))
    with pytest.raises(pc.DomainError):
        pc.update(prior, fam, -3.0)


# ---------------------------------------------------------------------------
# transform_parameter
# ---------------------------------------------------------------------------

def test_transform_identity():
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 0.5))
    same = pc.transform_parameter(post, pc.identity_map())
    assert pc.l1_distance(post, same) < 1e-12


def test_transform_matches_log_reduced_assignment():
    fam = pc.make_family("exp_scale")
    reduced, _, pmap = pc.reduce_scale_to_location(fam)
    post_tau = pc.assign(fam, pc.scale_factor(), sample_of(fam, 1.3))
    pushed = pc.transform_parameter(post_tau, pmap)
    common = pc.ParameterGrid((explicit_axis(pushed.nodes),))
    direct = pc.assign(reduced, pc.location_factor(),
                       pc.Sample(values=np.array([math.log(1.3)]), family_id=reduced.id),
                       common)
    assert pc.l1_distance(pushed, direct) < 1e-6


def test_transform_preserves_interval_content():
    fam = pc.make_family("exp_scale")
    post = pc.assign(fam, pc.scale_factor(), sample_of(fam, 1.0))
    pushed = pc.transform_parameter(post, pc.log_map())
    a, b = 0.4, 2.5
    assert post.prob_between(a, b) == pytest.approx(
        pushed.prob_between(math.log(a), math.log(b)), abs=1e-8)


def test_transform_decreasing_map():
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 0.0))
    flipped = pc.transform_parameter(post, pc.affine_map(-1.0, 0.0))
    assert flipped.mean() == pytest.approx(-post.mean(), abs=1e-10)
    assert np.all(np.diff(flipped.nodes) > 0)


def test_transform_rejects_nonmonotone():
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 0.0))
    square = pc.MonotoneMap(lambda x: x**2, np.sqrt, lambda x: 2 * x, name="square")
    with pytest.raises(pc.SingularityError):
        pc.transform_parameter(post, square)


# ---------------------------------------------------------------------------
# marginalize / condition
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def ls_joint():
    fam = pc.make_family("gauss_loc_scale")
    return pc.assign(fam, pc.location_scale_factor(),
                     pc.Sample(values=np.array([-1.0, 1.0]), family_id=fam.id))


def test_marginal_mu_symmetric(ls_joint):
    marg = pc.marginalize(ls_joint, over=1)
    assert abs(marg.quantile(0.5)) < 2e-3
    assert marg.grid.integrate(marg.values) == pytest.approx(1.0, abs=1e-12)


def test_marginal_sigma_against_denser_grid(ls_joint):
    fam = pc.make_family("gauss_loc_scale")
    dense = pc.assign(fam, pc.location_scale_factor(),
                      pc.Sample(values=np.array([-1.0, 1.0]), family_id=fam.id),
                      pc.GridSpec(n_nodes=(801, 801)))
    m1 = pc.marginalize(ls_joint, over=0)
    m2 = pc.marginalize(dense, over=0)
    assert m1.mode() > 0
    assert pc.l1_distance(m1, m2) < 1e-4


def test_condition_times_marginal_reproduces_joint(ls_joint):
    # the q=0, r=1 product identity, checked on grid columns
    sg_nodes = ls_joint.grid.axes[1].nodes
    marg_sg = pc.marginalize(ls_joint, over=0)
    j = len(sg_nodes) // 2
    cond = pc.condition(ls_joint, fixed=1, value=sg_nodes[j])
    product = cond.values * marg_sg.interpolate(sg_nodes[j])
    assert np.max(np.abs(product - ls_joint.values[:, j])) < 1e-6


def test_condition_at_node_equals_row(ls_joint):
    mu_ax, sg_ax = ls_joint.grid.axes
    j = 137
    cond = pc.condition(ls_joint, fixed=1, value=sg_ax.nodes[j])
    row = ls_joint.values[:, j]
    row = row / np.sum(mu_ax.weights * row)
    assert np.allclose(cond.values, row, rtol=1e-10, atol=1e-14)


def test_condition_product_form_independence():
    mu_ax = explicit_axis(np.linspace(-4, 4, 201))
    sg_ax = explicit_axis(np.exp(np.linspace(np.log(0.2), np.log(5), 151)), kind="log")
    f = np.exp(-0.5 * mu_ax.nodes**2)
    g = np.exp(-((np.log(sg_ax.nodes)) ** 2))
    grid = pc.ParameterGrid((mu_ax, sg_ax))
    vals = np.outer(f, g)
    joint = PosteriorDensity(grid=grid, values=vals / grid.integrate(vals))
    c1 = pc.condition(joint, fixed=1, value=0.5)
    c2 = pc.condition(joint, fixed=1, value=3.0)
    assert pc.l1_distance(c1, c2) < 1e-8


def test_condition_outside_span(ls_joint):
    with pytest.raises(pc.DomainError):
        pc.condition(ls_joint, fixed=1, value=-1.0)


def test_marginalize_requires_2d():
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 0.0))
    with pytest.raises(pc.DomainError):
        pc.marginalize(post, over=0)


# ---------------------------------------------------------------------------
# credible intervals
# ---------------------------------------------------------------------------

def test_interval_standard_normal():
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 0.0))
    iv = pc.credible_interval(post, 0.683)
    assert iv.lo == pytest.approx(-1.0, abs=2e-3)
    assert iv.hi == pytest.approx(1.0, abs=2e-3)


def test_interval_cauchy_quartiles():
    fam = pc.make_family("cauchy_loc")
    x = 2.0
    post = pc.assign(fam, pc.location_factor(), sample_of(fam, x))
    iv = pc.credible_interval(post, 0.5)
    assert iv.lo == pytest.approx(x - 1.0, abs=2e-3)
    assert iv.hi == pytest.approx(x + 1.0, abs=2e-3)


def test_interval_content_matches_level():
    fam = pc.make_family("exp_scale")
    post = pc.assign(fam, pc.scale_factor(), sample_of(fam, 2.0))
    for delta in (0.5, 0.683, 0.9):
        iv = pc.credible_interval(post, delta)
        assert post.cdf(iv.hi) - post.cdf(iv.lo) == pytest.approx(delta, abs=1e-6)


def test_interval_level_domain():
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 0.0))
    for bad in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(pc.DomainError):
            pc.credible_interval(post, bad)


def test_interval_requires_1d(ls_joint):
    with pytest.raises(pc.DomainError):
        pc.credible_interval(ls_joint, 0.5)


def test_interval_reparameterization_equivariance():
    fam = pc.make_family("exp_scale")
    post = pc.assign(fam, pc.scale_factor(), sample_of(fam, 1.0))
    pushed = pc.transform_parameter(post, pc.log_map())
    iv_tau = pc.credible_interval(post, 0.683)
    iv_mu = pc.credible_interval(pushed, 0.683)
    assert iv_mu.lo == pytest.approx(math.log(iv_tau.lo), abs=1e-4)
    assert iv_mu.hi == pytest.approx(math.log(iv_tau.hi), abs=1e-4)


def test_grid_self_convergence_on_interval_endpoints():
    # doubling the resolution moves endpoints by < 1e-4 relative to scale
    cases = [
        ("gauss_loc", {"sigma0": 1.0}, pc.location_factor(), [0.5], 0.683),
        ("gauss_loc", {"sigma0": 1.0}, pc.location_factor(), [0.5], 0.9),
        ("cauchy_loc", {}, pc.location_factor(), [2.0], 0.5),
        ("exp_scale", {}, pc.scale_factor(), [1.0], 0.683),
        ("trunc_gauss_loc", {"sigma0": 1.0}, pc.location_factor(), [-1.0], 0.683),
    ]
    for fam_id, hyper, factor, xs, delta in cases:
        fam = pc.make_family(fam_id, **hyper)
        s = pc.Sample(values=np.array(xs), family_id=fam.id)
        iv1 = pc.credible_interval(pc.assign(fam, factor, s, pc.GridSpec(n_nodes=2001)), delta)
        iv2 = pc.credible_interval(pc.assign(fam, factor, s, pc.GridSpec(n_nodes=4001)), delta)
        scale = max(1.0, abs(iv1.lo), abs(iv1.hi))
        assert abs(iv1.lo - iv2.lo) < 1e-4 * scale, (fam_id, delta)
        assert abs(iv1.hi - iv2.hi) < 1e-4 * scale, (fam_id, delta)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.001, max_value=0.999))
def test_quantile_cdf_roundtrip(p):
    post = pc.assign(gauss(), pc.location_factor(), sample_of(gauss(), 0.7))
    assert post.cdf(post.quantile(p)) == pytest.approx(p, abs=1e-10)


def test_posterior_mode_parabolic_refinement():
    fam = pc.make_family("exp_scale")
    post = pc.assign(fam, pc.scale_factor(), sample_of(fam, 2.0))
    # closed-form mode is x/2 = 1; refinement should beat raw node spacing
    assert post.mode() == pytest.approx(1.0, abs=5e-4)
