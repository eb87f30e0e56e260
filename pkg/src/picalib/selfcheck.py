"""The acceptance gate, runnable as a library call or `picalib self-check`.

Eight criteria, each with its tolerance pinned here.  They are the
package's claims about itself: exact pointwise calibration for the
matched weights, Monte Carlo coverage equal to the interval content,
uniqueness of the (q, r) = (0, 1) factorization, order invariance,
the scale-to-location reduction, the deliberately broken settings
missing their nominal coverage, recovery with growing n, and bitwise
determinism under a fixed master seed.

``trials_scale`` shrinks the Monte Carlo sizes proportionally (floored
at 1000 trials) for smoke runs; the acceptance configuration is
trials_scale = 1.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import (CalibrationSpec, GridSpec, ParameterGrid, Sample, assign,
               coverage_vs_n, exact_calibration_residual, factorization_scan,
               l1_distance, location_factor, log_map, make_family,
               reduce_scale_to_location, run_coverage, scale_factor, stream,
               transform_parameter, update)
from .grids import explicit_axis

DEFAULT_SEED = 20250101


@dataclass(frozen=True)
class CriterionResult:
    cid: int
    title: str
    passed: bool
    runtime_s: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.cid}: {self.title} ({self.runtime_s:.1f}s)"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SelfCheckReport:
    seed: int
    trials_scale: float
    criteria: tuple[CriterionResult, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "trials_scale": self.trials_scale,
                "all_passed": self.all_passed,
                "criteria": [c.to_dict() for c in self.criteria]}


def _scaled(t: int, scale: float) -> int:
    return max(1000, int(round(t * scale)))


def _timed(fn):
    t0 = time.perf_counter()
    passed, details = fn()
    return passed, time.perf_counter() - t0, details


def criterion_1_exact_calibration():
    """Pointwise |f(theta|x) - |dF/dtheta|| below 1e-4 for the matched weights."""
    cases = [
        (make_family("gauss_loc", sigma0=1.0), location_factor(), [-2.0, 0.0, 3.0]),
        (make_family("cauchy_loc"), location_factor(), [-2.0, 0.0, 3.0]),
        (make_family("exp_scale"), scale_factor(), [0.5, 1.0, 3.0]),
    ]
    details = {}
    ok = True
    for fam, factor, xs in cases:
        res = exact_calibration_residual(fam, factor, xs)
        details[fam.id] = res
        ok = ok and res < 1e-4
    return ok, details


def criterion_2_coverage_headline(seed, scale, workers):
    """Coverage equals delta within 4 binomial standard errors at n=1."""
    trials = _scaled(100_000, scale)
    details = {}
    ok = True
    for fam_id, factor, true in (("gauss_loc", "location", 0.0),
                                 ("exp_scale", "scale", 2.0)):
        for delta in (0.5, 0.683, 0.9):
            spec = CalibrationSpec(family_id=fam_id, factor=factor, true_params=true,
                                   n=1, delta=delta, trials=trials, seed=seed,
                                   workers=workers)
            rep = run_coverage(spec)
            key = f"{fam_id}@{delta}"
            details[key] = {"coverage": rep.coverage, "bound": 4 * rep.std_error}
            ok = ok and abs(rep.coverage - delta) < 4 * rep.std_error
    return ok, details


SCAN_GRID = GridSpec(n_nodes=(401, 401), bounds=((-12.0, 12.0), (0.08, 40.0)))


def criterion_3_uniqueness_scan():
    """(q, r) = (0, 1) is the only cell below 1e-4; all others above 1e-2."""
    sample = Sample(values=np.array([-1.0, 1.0]), family_id="gauss_loc_scale")
    qs, rs = (-1.0, 0.0, 1.0), (0.0, 1.0, 2.0)
    mat = factorization_scan(qs, rs, sample, SCAN_GRID)
    details = {"matrix": mat.tolist()}
    ok = mat[1, 1] < 1e-4
    for i, q in enumerate(qs):
        for j, r in enumerate(rs):
            if (q, r) != (0.0, 1.0):
                ok = ok and mat[i, j] > 1e-2
    return ok, details


def _fixed_grid_posterior(fam, factor, values, order, grid):
    post = assign(fam, factor, Sample(values=np.array([values[order[0]]]),
                                      family_id=fam.id), grid)
    for idx in order[1:]:
        post = update(post, fam, values[idx])
    return post


def criterion_4_order_invariance(seed):
    """Iterated updating is permutation-invariant to 1e-10 in L1."""
    fams = [(make_family("gauss_loc"), location_factor(), (0.0,)),
            (make_family("exp_scale"), scale_factor(), (1.5,)),
            (make_family("cauchy_loc"), location_factor(), (0.5,))]
    worst = 0.0
    for f_idx, (fam, factor, theta) in enumerate(fams):
        for s_idx in range(20):
            rng = stream(seed, 40, f_idx, s_idx)
            values = fam.draw(theta, rng, 5).values
            base = assign(fam, factor, Sample(values=values, family_id=fam.id))
            grid = base.grid  # one common grid for every ordering
            ref = _fixed_grid_posterior(fam, factor, values, tuple(range(5)), grid)
            for perm in itertools.permutations(range(5)):
                post = _fixed_grid_posterior(fam, factor, values, perm, grid)
                worst = max(worst, l1_distance(ref, post))
    return worst < 1e-10, {"worst_l1": worst}


def criterion_5_scale_reduction():
    """Scale-factor posterior pushed through ln equals the location-factor
    posterior of the log-reduced family (same grid), L1 < 1e-6."""
    worst = 0.0
    for fam in (make_family("exp_scale"), make_family("weibull", shape=2.0)):
        reduced, _, pmap = reduce_scale_to_location(fam)
        for x in (0.5, 1.0, 3.0):
            post_tau = assign(fam, scale_factor(),
                              Sample(values=np.array([x]), family_id=fam.id))
            pushed = transform_parameter(post_tau, pmap)
            common = ParameterGrid((explicit_axis(pushed.nodes),))
            direct = assign(reduced, location_factor(),
                            Sample(values=np.array([np.log(x)]), family_id=reduced.id),
                            common)
            worst = max(worst, l1_distance(pushed, direct))
    return worst < 1e-6, {"worst_l1": worst}


def criterion_6_broken_consistency(seed, scale, workers):
    """Boundary-constrained location and discrete counting miss nominal
    coverage by the stated margins at n=1."""
    trials = _scaled(100_000, scale)
    trunc = run_coverage(CalibrationSpec(
        family_id="trunc_gauss_loc", factor="location", true_params=0.0, n=1,
        delta=0.683, trials=trials, seed=seed, workers=workers))
    pois = run_coverage(CalibrationSpec(
        family_id="poisson", factor="location", true_params=2.0, n=1, delta=0.683,
        trials=trials, seed=seed, method="gaussian_approx", workers=workers))
    details = {"trunc_coverage": trunc.coverage, "poisson_coverage": pois.coverage}
    ok = abs(trunc.coverage - 0.683) > 0.03 and abs(pois.coverage - 0.683) > 0.05
    return ok, details


def criterion_7_consistency_regained(seed, scale, workers):
    """|coverage - delta| shrinks by > 4 combined SE from n=1 to the largest
    n and ends within 0.015 of delta."""
    trials = _scaled(20_000, scale)
    details = {}
    ok = True
    sweeps = [
        ("poisson", "location", 2.0, "gaussian_approx", (1, 5, 25, 100)),
        ("trunc_gauss_loc", "location", 1.0, "exact_assign", (1, 4, 16, 64)),
    ]
    for fam_id, factor, true, method, n_list in sweeps:
        spec = CalibrationSpec(family_id=fam_id, factor=factor, true_params=true,
                               n=1, delta=0.683, trials=trials, seed=seed,
                               method=method, workers=workers)
        reports = coverage_vs_n(spec, n_list, method)
        devs = [abs(r.coverage - 0.683) for r in reports]
        comb_se = float(np.hypot(reports[0].std_error, reports[-1].std_error))
        details[fam_id] = {"n": list(n_list), "coverage": [r.coverage for r in reports],
                           "combined_se": comb_se}
        ok = ok and (devs[0] - devs[-1]) > 4 * comb_se and devs[-1] < 0.015
    return ok, details


def criterion_8_determinism(seed, workers):
    """Identical spec and master seed give identical reports, regardless
    of worker count."""
    spec1 = CalibrationSpec(family_id="gauss_loc", factor="location", true_params=0.0,
                            n=1, delta=0.683, trials=5000, seed=seed, workers=1)
    spec2 = CalibrationSpec(family_id="gauss_loc", factor="location", true_params=0.0,
                            n=1, delta=0.683, trials=5000, seed=seed,
                            workers=max(2, workers or 2))
    r1 = run_coverage(spec1).to_dict()
    r2 = run_coverage(spec2).to_dict()
    same = r1 == r2
    return same, {"hits": r1["hits"], "identical": same}


def run_all(seed: int = DEFAULT_SEED, trials_scale: float = 1.0,
            workers: int | None = None) -> SelfCheckReport:
    runners = [
        (1, "exact calibration residual < 1e-4 (gauss/cauchy/exp)",
         lambda: criterion_1_exact_calibration()),
        (2, "coverage equals delta within 4 SE (gauss_loc, exp_scale)",
         lambda: criterion_2_coverage_headline(seed, trials_scale, workers)),
        (3, "factorization scan: only (q,r)=(0,1) coheres",
         lambda: criterion_3_uniqueness_scan()),
        (4, "posterior is order-invariant (L1 < 1e-10)",
         lambda: criterion_4_order_invariance(seed)),
        (5, "scale -> location log reduction (L1 < 1e-6)",
         lambda: criterion_5_scale_reduction()),
        (6, "broken settings miss nominal coverage",
         lambda: criterion_6_broken_consistency(seed, trials_scale, workers)),
        (7, "coverage returns to delta as n grows",
         lambda: criterion_7_consistency_regained(seed, trials_scale, workers)),
        (8, "seeded runs are deterministic across worker counts",
         lambda: criterion_8_determinism(seed, workers)),
    ]
    caps = {1: 10.0, 2: 120.0, 3: 60.0, 7: 300.0}
    results = []
    for cid, title, fn in runners:
        passed, dt, details = _timed(fn)
        cap = caps.get(cid)
        if cap is not None:
            details = dict(details)
            details["runtime_cap_s"] = cap
            passed = passed and dt < cap
        results.append(CriterionResult(cid=cid, title=title, passed=passed,
                                       runtime_s=dt, details=details))
    return SelfCheckReport(seed=seed, trials_scale=trials_scale,
                           criteria=tuple(results))
