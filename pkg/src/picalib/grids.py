"""Parameter grids and quadrature.

Grids discretize the normalization, marginalization and quantile
integrals.  Axes are graded: nodes follow u = c + s*sinh(t) with t
uniform, which packs resolution into the posterior bulk while still
reaching far enough out to satisfy the edge-coverage rule even for
power-law tails (a Cauchy posterior needs the grid edge ~1e5 half-widths
out before edge values drop to 1e-10 of the peak).  Scale-type
parameters get the same treatment on the log axis, so a scale grid maps
onto a location grid under theta -> ln theta node by node.

Quadrature is the trapezoid rule on the node list; interpolation
elsewhere in the package is piecewise-linear, so cumulative integrals
of interpolants and the weights here agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .families import ROLE_LOCATION

# probe ladder never pushes |u - c| past these, keeping exp(u) finite
_MAX_DISP_LOG = 600.0
_MAX_DISP_LINEAR = 1e15


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size < 2 or np.any(np.diff(nodes) <= 0):
        raise DomainError("grid nodes must be strictly increasing, length >= 2")
    w = np.empty_like(nodes)
    d = np.diff(nodes)
    w[0] = d[0] / 2.0
    w[-1] = d[-1] / 2.0
    w[1:-1] = (d[:-1] + d[1:]) / 2.0
    return w


@dataclass(frozen=True)
class Axis:
    """Nodes plus trapezoid weights along one parameter dimension."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "linear"          # "linear" | "log": coordinate the grading lives in
    center: float | None = None   # build metadata, used for template shifts
    reach: tuple[float, float] | None = None  # u-space displacement (lo, hi)
    scale: float | None = None

    @property
    def n(self) -> int:
        return int(self.nodes.size)


@dataclass(frozen=True)
class ParameterGrid:
    axes: tuple[Axis, ...]

    def __post_init__(self):
        if len(self.axes) not in (1, 2):
            raise DomainError("grids are 1- or 2-dimensional")

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    def meshes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(a.nodes for a in self.axes), indexing="ij"))

    def weight_mesh(self) -> np.ndarray:
        if self.dims == 1:
            return self.axes[0].weights
        return np.multiply.outer(self.axes[0].weights, self.axes[1].weights)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values * self.weight_mesh()))


# ---------------------------------------------------------------------------
# Adaptive construction
# ---------------------------------------------------------------------------

def _to_u(theta, kind):
    return np.log(theta) if kind == "log" else theta


def _from_u(u, kind):
    return np.exp(u) if kind == "log" else u


def _u_domain(domain, kind):
    lo, hi = domain
    if kind == "log":
        lo = -np.inf if lo <= 0 else math.log(lo)
        hi = np.inf if np.isinf(hi) else math.log(hi)
        return lo, hi, False  # log axes never touch their boundaries
    return lo, hi, True


def _locate_mode(lp_u, c, u_lo, u_hi):
    """A few safeguarded Newton steps toward the peak; also returns the
    local curvature scale 1/sqrt(-d2 logpost)."""
    clip = lambda u: float(min(max(u, u_lo), u_hi))
    c = clip(c)
    h = max(1e-6 * (1.0 + abs(c)), 1e-9)
    f0 = lp_u(c)
    # widen the probe until the posterior actually varies
    for _ in range(40):
        fp, fm = lp_u(clip(c + h)), lp_u(clip(c - h))
        if np.isfinite(fp) and np.isfinite(fm) and (abs(fp - f0) + abs(fm - f0)) > 1e-9:
            break
        h *= 4.0
    scale = 1.0 + abs(c)
    for _ in range(12):
        fp, fm = lp_u(clip(c + h)), lp_u(clip(c - h))
        if not (np.isfinite(fp) and np.isfinite(fm) and np.isfinite(f0)):
            h *= 0.5
            continue
        d1 = (fp - fm) / (2.0 * h)
        d2 = (fp + fm - 2.0 * f0) / h**2
        if d2 < 0:
            scale = 1.0 / math.sqrt(-d2)
            step = float(np.clip(d1 / -d2, -8 * scale, 8 * scale))
        else:
            step = math.copysign(2.0 * h, d1) if d1 != 0.0 else 0.0
        new_c = clip(c + step)
        f_new = lp_u(new_c)
        if not np.isfinite(f_new) or f_new < f0 - 1e-12:
            h *= 0.5
            continue
        moved = abs(new_c - c)
        c, f0 = new_c, f_new
        h = max(scale * 1e-4, 1e-9)
        if moved < 1e-10 * (1.0 + abs(c)):
            break
    if np.isfinite(u_lo) and c == u_lo:
        # boundary mode: keep one-sided curvature so spacing tracks the peak
        f1, f2 = lp_u(c + h), lp_u(c + 2 * h)
        if np.isfinite(f1) and np.isfinite(f2):
            d2 = (f0 - 2 * f1 + f2) / h**2
            if d2 < 0:
                scale = 1.0 / math.sqrt(-d2)
    return c, scale, f0


def _probe_reach(lp_u, c, scale, sign, tail_nats, edge_disp, hard_cap, peak):
    """Displacement from c (in u) at which logpost has dropped tail_nats
    below the running peak, capped by the domain edge and a hard limit.

    Returns (displacement, updated peak, stopped-at-domain-edge flag).
    """
    cap = min(edge_disp, hard_cap)
    if cap <= 0.0:
        return 0.0, peak, np.isfinite(edge_disp)
    t, last = 0.25, 0.0
    while t <= 42.0:
        disp = scale * math.sinh(t)
        capped = disp >= cap
        disp = min(disp, cap)
        val = lp_u(c + sign * disp)
        if np.isfinite(val) and val > peak:
            peak = val
        if not np.isfinite(val) or (peak - val) >= tail_nats:
            return disp, peak, capped and disp >= edge_disp
        if capped:
            return disp, peak, disp >= edge_disp
        last = disp
        t += 0.25
    return last, peak, False


def adaptive_axis(logpost_theta: Callable, center_theta: float, kind: str,
                  domain: tuple[float, float], closed_lo: bool, n_nodes: int,
                  tail_nats: float, min_reach: tuple[float, float] = (0.0, 0.0)) -> Axis:
    """Build one graded axis from the unnormalized log posterior along it.

    ``min_reach`` forces at least that u-displacement per side; the
    improper-posterior retry loop uses it to double the span.
    """
    u_lo, u_hi, lin = _u_domain(domain, kind)
    closed_lo = closed_lo and lin and np.isfinite(u_lo)
    lp_u = (lambda u: logpost_theta(_from_u(np.asarray(u, dtype=float), kind)))
    c0 = _to_u(center_theta, kind)
    if not np.isfinite(c0):
        raise DomainError("grid center must be finite and inside the domain")
    c, scale, peak = _locate_mode(lp_u, c0, u_lo, u_hi)
    hard = _MAX_DISP_LOG if kind == "log" else _MAX_DISP_LINEAR
    r_lo, peak, at_lo_edge = _probe_reach(lp_u, c, scale, -1, tail_nats, c - u_lo, hard, peak)
    r_hi, peak, _ = _probe_reach(lp_u, c, scale, +1, tail_nats, u_hi - c, hard, peak)
    r_lo = min(max(r_lo, min_reach[0], 4.0 * scale), hard, c - u_lo)
    r_hi = min(max(r_hi, min_reach[1], 4.0 * scale), hard, u_hi - c)
    t_lo = math.asinh(r_lo / scale)
    t_hi = math.asinh(r_hi / scale)
    t = np.linspace(-t_lo, t_hi, int(n_nodes))
    u = c + scale * np.sinh(t)
    if closed_lo and (at_lo_edge or r_lo >= c - u_lo):
        u[0] = u_lo  # land exactly on a closed boundary
    nodes = _from_u(u, kind)
    nodes = np.maximum.accumulate(nodes)  # guard against float ties
    if np.any(np.diff(nodes) <= 0):
        keep = np.concatenate(([True], np.diff(nodes) > 0))
        nodes = nodes[keep]
    return Axis(nodes=nodes, weights=trapezoid_weights(nodes), kind=kind,
                center=_from_u(c, kind), reach=(r_lo, r_hi), scale=scale)


def uniform_axis(lo: float, hi: float, n: int, kind: str = "linear") -> Axis:
    """Nodes uniform in the axis coordinate (theta, or ln theta for log)."""
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise DomainError("explicit axis bounds must be finite with lo < hi")
    if kind == "log":
        if lo <= 0:
            raise DomainError("log axis requires positive bounds")
        nodes = np.exp(np.linspace(math.log(lo), math.log(hi), int(n)))
    else:
        nodes = np.linspace(lo, hi, int(n))
    return Axis(nodes=nodes, weights=trapezoid_weights(nodes), kind=kind)


def explicit_axis(nodes: Sequence[float], kind: str = "linear") -> Axis:
    nodes = np.asarray(nodes, dtype=float)
    return Axis(nodes=nodes, weights=trapezoid_weights(nodes), kind=kind)


def axis_kind_for_role(role: str) -> str:
    return "linear" if role == ROLE_LOCATION else "log"


@dataclass(frozen=True)
class GridSpec:
    """How to discretize: node counts plus optional explicit geometry.

    With ``bounds`` or ``axes`` set the grid is frozen exactly as given
    (adaptive placement and span expansion are skipped); otherwise the
    builder centers on the likelihood peak and extends each side until
    the integrand falls below ``tail_rel`` of its maximum.
    """

    n_nodes: int | tuple[int, ...] | None = None
    bounds: tuple[tuple[float, float], ...] | None = None
    axes: tuple[np.ndarray, ...] | None = None
    tail_rel: float = 1e-10

    def nodes_for(self, dims: int) -> tuple[int, ...]:
        default = (2001,) if dims == 1 else (401, 401)
        if self.n_nodes is None:
            return default
        if isinstance(self.n_nodes, int):
            return (self.n_nodes,) * dims
        if len(self.n_nodes) != dims:
            raise DomainError(f"n_nodes has {len(self.n_nodes)} entries for a {dims}-d grid")
        return tuple(int(n) for n in self.n_nodes)

    @property
    def is_explicit(self) -> bool:
        return self.bounds is not None or self.axes is not None

    def tail_nats(self, dims: int) -> float:
        # 2-d axes probe profile curves, which understate the marginal
        # reach by a slowly-growing width factor; pad them.
        base = -math.log(self.tail_rel)
        return base if dims == 1 else base + 9.0

    def build_explicit(self, kinds: Sequence[str]) -> ParameterGrid:
        dims = len(kinds)
        if self.axes is not None:
            if len(self.axes) != dims:
                raise DomainError("explicit axes dimensionality mismatch")
            return ParameterGrid(tuple(explicit_axis(a, k) for a, k in zip(self.axes, kinds)))
        if len(self.bounds) != dims:
            raise DomainError("bounds dimensionality mismatch")
        ns = self.nodes_for(dims)
        return ParameterGrid(tuple(uniform_axis(lo, hi, n, k)
                                   for (lo, hi), n, k in zip(self.bounds, ns, kinds)))
