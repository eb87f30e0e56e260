"""Grid construction and quadrature plumbing."""

import numpy as np
import pytest

import picalib as pc
from picalib.grids import (GridSpec, adaptive_axis, explicit_axis, trapezoid_weights,
                           uniform_axis)


def test_trapezoid_weights_sum_to_span():
    nodes = np.sort(np.concatenate([np.linspace(0, 1, 40), [0.015, 0.5017, 0.93]]))
    w = trapezoid_weights(nodes)
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(nodes[-1] - nodes[0], abs=1e-12)


def test_trapezoid_weights_reject_bad_nodes():
    with pytest.raises(pc.DomainError):
        trapezoid_weights(np.array([0.0, 1.0, 1.0, 2.0]))
    with pytest.raises(pc.DomainError):
        trapezoid_weights(np.array([3.0]))


def test_uniform_axis_kinds():
    lin = uniform_axis(-2.0, 2.0, 101)
    assert np.allclose(np.diff(lin.nodes), 0.04)
    log = uniform_axis(0.1, 10.0, 101, kind="log")
    assert np.allclose(np.diff(np.log(log.nodes)), np.log(100.0) / 100)
    with pytest.raises(pc.DomainError):
        uniform_axis(-1.0, 1.0, 51, kind="log")


def test_adaptive_axis_covers_gaussian():
    lp = lambda th: -0.5 * (np.asarray(th) - 3.0) ** 2
    ax = adaptive_axis(lp, 2.0, "linear", (-np.inf, np.inf), False, 801, 23.0)
    assert ax.nodes[0] < 3.0 - 6.0 and ax.nodes[-1] > 3.0 + 6.0
    # edge drop of at least 23 nats relative to the peak
    assert lp(ax.nodes).max() - lp(ax.nodes[-1]) >= 23.0
    # node spacing is finest near the peak
    i = np.argmin(np.abs(ax.nodes - 3.0))
    d = np.diff(ax.nodes)
    assert d[i] < d[-1] and d[i] < d[0]


def test_adaptive_axis_anchors_closed_boundary():
    # posterior peaked below the boundary: grid must start exactly at it
    lp = lambda th: -0.5 * (np.asarray(th) + 2.0) ** 2
    ax = adaptive_axis(lp, 0.0, "linear", (0.0, np.inf), True, 501, 23.0)
    assert ax.nodes[0] == 0.0
    assert np.all(np.diff(ax.nodes) > 0)


def test_adaptive_axis_log_kind_stays_positive():
    lp = lambda th: -2.0 * np.log(np.asarray(th)) - 1.0 / np.asarray(th)
    ax = adaptive_axis(lp, 1.0, "log", (0.0, np.inf), False, 801, 23.0)
    assert ax.nodes[0] > 0.0
    assert ax.kind == "log"


def test_grid_spec_explicit_and_defaults():
    spec = GridSpec()
    assert spec.nodes_for(1) == (2001,)
    assert spec.nodes_for(2) == (401, 401)
    assert not spec.is_explicit
    g = GridSpec(n_nodes=(51, 41), bounds=((-1.0, 1.0), (0.1, 5.0)))
    grid = g.build_explicit(("linear", "log"))
    assert grid.shape == (51, 41)
    assert grid.axes[1].nodes[0] == pytest.approx(0.1)
    with pytest.raises(pc.DomainError):
        GridSpec(n_nodes=(3, 4, 5)).nodes_for(2)


def test_parameter_grid_integrate():
    g = GridSpec(n_nodes=(201, 201), bounds=((-8.0, 8.0), (-8.0, 8.0)))
    grid = g.build_explicit(("linear", "linear"))
    m0, m1 = grid.meshes()
    vals = np.exp(-0.5 * (m0**2 + m1**2)) / (2 * np.pi)
    assert grid.integrate(vals) == pytest.approx(1.0, abs=1e-6)
