"""Consistency factors: values, transformation rule, group equation,
and the q/r factorization scan."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import picalib as pc

# frozen from an independent dense-grid oracle (numpy-only, separate code
# path) for sample {-1, 1}; rows q in (-1, 0, 1), columns r in (0, 1, 2)
ORACLE_SCAN = np.array([
    [3.374e-02, 1.532e-01, 4.663e-01],
    [7.746e-02, 0.0, 2.559e-01],
    [1.585e-01, 1.721e-01, 1.937e-01],
])

SCAN_GRID = pc.GridSpec(n_nodes=(401, 401), bounds=((-12.0, 12.0), (0.08, 40.0)))


def ls_sample():
    return pc.Sample(values=np.array([-1.0, 1.0]), family_id="gauss_loc_scale")


def test_location_factor_values():
    f = pc.location_factor()
    assert f.weight(0.0) == 1.0
    assert f.weight(-7.3) == 1.0
    assert f.weight(3.0) / f.weight(-120.0) == 1.0


def test_scale_factor_values():
    f = pc.scale_factor()
    assert f.weight(2.0) == pytest.approx(0.5, rel=1e-15)
    assert f.weight(1.0) == 1.0
    with pytest.raises(pc.DomainError):
        f.weight(0.0)
    with pytest.raises(pc.DomainError):
        f.weight(-1.0)


def test_location_scale_factor_values():
    f = pc.location_scale_factor()
    assert f.weight(5.0, 4.0) == pytest.approx(0.25, rel=1e-15)
    assert f.weight(-5.0, 4.0) == pytest.approx(0.25, rel=1e-15)  # mu-independent
    assert f.weight(0.0, 1.0) == 1.0
    with pytest.raises(pc.DomainError):
        f.weight(0.0, -2.0)


@given(st.floats(min_value=1e-3, max_value=1e3),
       st.floats(min_value=1e-3, max_value=1e3))
def test_scale_factor_scaling_invariance(c, sigma):
    f = pc.scale_factor()
    assert f.weight(c * sigma) * c == pytest.approx(f.weight(sigma), rel=1e-12)


def test_transform_scale_to_location():
    # reparameterize sigma -> mu = ln(sigma): the 1/sigma weight flattens
    moved = pc.transform_factor(pc.scale_factor(), pc.log_map())
    spread = pc.factor_ratio_spread(moved, pc.location_factor(),
                                    [-3.0, -1.0, 0.0, 0.5, 2.0])
    assert spread < 1e-12


def test_transform_identity_and_stretch():
    same = pc.transform_factor(pc.location_factor(), pc.identity_map())
    assert pc.factor_ratio_spread(same, pc.location_factor(), [-2.0, 0.0, 1.0]) < 1e-15
    # nu = 2 mu: new weight is the constant 1/2
    doubled = pc.transform_factor(pc.location_factor(), pc.affine_map(2.0, 0.0))
    assert doubled.weight(0.7) == pytest.approx(0.5, rel=1e-14)
    assert pc.factor_ratio_spread(doubled, pc.location_factor(),
                                  [-5.0, 0.0, 3.0]) < 1e-14


def test_transform_roundtrip_functorial():
    pts = np.linspace(0.2, 8.0, 10)
    back = pc.transform_factor(pc.transform_factor(pc.scale_factor(), pc.log_map()),
                               pc.exp_map())
    assert pc.factor_ratio_spread(back, pc.scale_factor(), list(pts)) < 1e-10


@settings(max_examples=50)
@given(st.floats(min_value=0.1, max_value=5.0),
       st.floats(min_value=-3.0, max_value=3.0))
def test_transform_roundtrip_affine(a, b):
    pts = [-2.0, -0.3, 0.0, 1.1, 4.0]
    fwd = pc.affine_map(a, b)
    inv = pc.affine_map(1.0 / a, -b / a)
    back = pc.transform_factor(pc.transform_factor(pc.tilted_location_factor(0.5), fwd), inv)
    assert pc.factor_ratio_spread(back, pc.tilted_location_factor(0.5), pts) < 1e-9


def test_group_equation_matched_factors():
    dev = pc.verify_group_equation(pc.location_factor(), pc.translation_action(),
                                   [-2.0, 0.5, 3.0], [-5.0, 0.0, 1.0, 7.0])
    assert dev < 1e-10
    dev = pc.verify_group_equation(pc.scale_factor(), pc.scaling_action(),
                                   [0.5, 2.0, 7.0], [1.0, 2.0, 4.0])
    assert dev < 1e-10
    dev = pc.verify_group_equation(pc.location_scale_factor(), pc.affine_action(),
                                   [(0.5, -1.0), (2.0, 0.0), (1.5, 3.0)],
                                   [(0.0, 1.0), (-2.0, 0.5), (4.0, 3.0)])
    assert dev < 1e-10


def test_group_equation_detects_mismatch():
    # sigma^-2 still solves the scaling equation (with k(a) = 1/a) ...
    dev = pc.verify_group_equation(pc.power_scale_factor(2.0), pc.scaling_action(),
                                   [0.5, 2.0], [1.0, 2.0, 4.0])
    assert dev < 1e-12
    # ... but exp(-sigma) does not solve it at all
    bad = pc.ConsistencyFactor(dim=1, kind="exp", log_weight=lambda s: -np.asarray(s))
    dev = pc.verify_group_equation(bad, pc.scaling_action(), [0.5, 2.0], [1.0, 2.0, 4.0])
    assert dev > 0.1


def test_factorization_unique_at_zero_one():
    assert pc.factorization_discrepancy(0.0, 1.0, ls_sample(), SCAN_GRID) < 1e-6
    assert pc.factorization_discrepancy(0.0, 2.0, ls_sample(), SCAN_GRID) > 1e-2
    assert pc.factorization_discrepancy(1.0, 1.0, ls_sample(), SCAN_GRID) > 1e-2


def test_factorization_scan_matches_oracle():
    mat = pc.factorization_scan((-1.0, 0.0, 1.0), (0.0, 1.0, 2.0), ls_sample(), SCAN_GRID)
    assert mat[1, 1] < 1e-6
    mask = np.ones((3, 3), dtype=bool)
    mask[1, 1] = False
    assert np.allclose(mat[mask], ORACLE_SCAN[mask], rtol=0.02)
    # minimum over the scan is the matched cell, and only that cell is tiny
    assert mat.min() == mat[1, 1]
    assert np.all(mat[mask] > 1e-2)


def test_factorization_needs_two_observations():
    one = pc.Sample(values=np.array([1.0]), family_id="gauss_loc_scale")
    with pytest.raises(pc.ImproperPosteriorError):
        pc.factorization_discrepancy(0.0, 1.0, one, SCAN_GRID)


def test_factorization_needs_location_scale_family():
    s = pc.Sample(values=np.array([1.0, 2.0]), family_id="exp_scale")
    with pytest.raises(pc.DomainError):
        pc.factorization_discrepancy(0.0, 1.0, s)


def test_factorization_default_grid_is_adaptive():
    # no explicit grid: the scan borrows the reference joint's grid
    val = pc.factorization_discrepancy(0.0, 1.0, ls_sample())
    assert val < 1e-6


def test_custom_factor_weight():
    f = pc.custom_factor(1.0, 2.0)
    assert f.weight(0.0, 1.0) == 1.0
    assert f.weight(1.0, 2.0) == pytest.approx(np.exp(-1.0) / 4.0, rel=1e-12)
    assert f.qr == (1.0, 2.0)
