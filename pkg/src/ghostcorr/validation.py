"""Self-checks of the simulator against its analytic oracles.

Each check returns a :class:`CheckResult`; :func:`run_all` runs them in
order.  The same functions back ``ghostcorr --mode validate`` and the
acceptance tests.
"""

from __future__ import annotations

import math
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ArmSpec, RunConfig
from .correlator import (
    CoincidenceWarning,
    SystemConfig,
    cross_C_r1_closed,
    cross_C_r1_quadrature,
    g_n_identical,
    g_n_monte_carlo,
    intensity_Ir,
    intensity_Ir_quadrature,
    sampling_report,
)
from .imaging import (
    classify_configuration,
    feature_centers,
    image_sharpness,
    plan_scan,
    reconstruct_ghost_image,
)
from .optics import ObjectMask, ReferenceArm, TestArm, image_detector_grid
from .source_model import PowerSpectrum, make_frequency_grid, moment_mc_check
from .visibility import cauchy_schwarz_ratio, cauchy_schwarz_ratio_measured, visibility_bound, visibility_from_correlation

__all__ = ["CheckResult", "CHECKS", "run_all"] + [
    "check_moment_theorem",
    "check_closed_forms",
    "check_thin_lens_argmax",
    "check_ghost_geometry",
    "check_identical_arms",
    "check_visibility_bound",
    "check_cauchy_schwarz",
    "check_eight_configurations",
    "check_determinism",
    "EIGHT_CASES",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.elapsed:.1f} s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.elapsed = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# 1 -----------------------------------------------------------------------


@_timed
def check_moment_theorem(M: int = 20000, n_tuples: int = 20, modes: int = 128, seed: int = 7) -> CheckResult:
    """Sample moments of |E(q_i)|^2 products against the pairing sum, orders 2 and 3."""
    spec = PowerSpectrum()
    grid = make_frequency_grid(spec, n=modes)
    active = np.flatnonzero(np.abs(grid.samples - spec.center) <= spec.bandwidth / 2)
    rng = np.random.default_rng(seed)
    within, total, worst = 0, 0, 0.0
    for order in (2, 3):
        for i in range(n_tuples):
            # every other tuple draws from a 3-mode pool so repeated indices occur
            pool = active[:3] if i % 2 else active
            qs = rng.choice(pool, size=order, replace=True)
            chk = moment_mc_check(spec, grid, qs, M, seed=1000 * order + i)
            worst = max(worst, chk.z_score)
            within += chk.z_score <= 5
            total += 1
    frac = within / total
    return CheckResult("moment theorem", frac >= 0.95, f"{within}/{total} tuples within 5 SE (max z {worst:.2f})",
                       {"fraction": frac, "max_z": worst})


# 2 -----------------------------------------------------------------------


def _rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@_timed
def check_closed_forms(system: SystemConfig | None = None, tol: float = 0.02) -> CheckResult:
    """|C_r1| closed form vs quadrature and I_r closed form vs quadrature on the default double slit."""
    system = system or RunConfig().system()
    arm = system.arm(2)
    x_r = image_detector_grid(arm, system.obj, 128).positions
    c_q = np.abs(cross_C_r1_quadrature(system, 2, 0.0, x_r))
    c_c = np.abs(cross_C_r1_closed(system, 2, 0.0, x_r))
    e_c = _rel_l2(c_q, c_c)
    ir_q = intensity_Ir_quadrature(system, 2, x_r)
    e_i = _rel_l2(ir_q, np.full_like(ir_q, intensity_Ir(system, 2)))
    return CheckResult("closed forms", e_c <= tol and e_i <= tol,
                       f"|C_r1| rel L2 {e_c:.2e}, I_r rel L2 {e_i:.2e} (tol {tol})", {"C_r1": e_c, "I_r": e_i})


# 3 -----------------------------------------------------------------------


@_timed
def check_thin_lens_argmax(steps: int = 20, step: float = 0.01, half_width: float = 5e-4,
                           points: int = 401) -> CheckResult:
    """Image sharpness over detector distances around the thin-lens solution, point object."""
    base = RunConfig().system(obj=ObjectMask.point())
    arm = base.arm(2)
    z = arm.z_r1
    X = np.linspace(-half_width, half_width, points)
    sharp = []
    for k in range(-steps, steps + 1):
        a = arm.with_z_r1(z * (1 + step * k))
        profile = np.abs(cross_C_r1_quadrature(base.with_refs([a]), 2, 0.0, X / a.gain)) ** 2
        sharp.append(image_sharpness(X, profile))
    best = int(np.argmax(sharp)) - steps
    return CheckResult("thin-lens argmax", abs(best) <= 1,
                       f"sharpest image at step {best:+d} of {step:.0%} around z_r1 = {z:.4g} m",
                       {"best_step": best, "sharpness": sharp})


# 4 -----------------------------------------------------------------------


@_timed
def check_ghost_geometry(M: int = 20000, points: int = 128, seed: int = 2024, threads: int = 1) -> CheckResult:
    """N=2 double-slit Monte Carlo: peak centroids at the predicted image positions."""
    system = RunConfig().system()
    arm = system.arm(2)
    axes = plan_scan(system, (2,), points)
    res = g_n_monte_carlo(system, axes, M, seed, threads=threads)
    img = reconstruct_ghost_image(res, 2, object_mask=system.obj)
    predicted = np.sort(feature_centers(system.obj) / arm.gain)
    cell = float(axes[0][1] - axes[0][0])
    ok = img.peaks.size == predicted.size == 2
    err = float(np.max(np.abs(np.sort(img.peaks) - predicted))) if ok else math.inf
    ok = ok and err <= cell
    return CheckResult("ghost-image geometry", ok,
                       f"peaks {np.round(np.sort(img.peaks) * 1e3, 4).tolist()} mm vs predicted "
                       f"{np.round(predicted * 1e3, 4).tolist()} mm, max error {err / cell:.2f} cells",
                       {"peaks": img.peaks, "predicted": predicted, "cell": cell, "magnification": arm.gain,
                        "estimated_magnification": img.magnification})


# 5 -----------------------------------------------------------------------


@_timed
def check_identical_arms(M: int = 20000, points: int = 128, seed: int = 99, threads: int = 1) -> CheckResult:
    """N=3 identical arms, arm 3 parked: Monte Carlo against the identical-arm closed form."""
    system = RunConfig().system(N=3)
    axes = plan_scan(system, (2,), points)
    mc = g_n_monte_carlo(system, axes, M, seed, threads=threads)
    an = g_n_identical(system, axes)
    z = np.abs(mc.values - an.values) / mc.std_error
    z = z[mc.valid]
    frac = float(np.mean(z <= 5))
    return CheckResult("identical-arm consistency", frac >= 0.95,
                       f"{frac:.1%} of {z.size} points within 5 SE (max z {z.max():.2f})",
                       {"fraction": frac, "max_z": float(z.max())})


# 6 -----------------------------------------------------------------------


def point_system(N: int, qa: float, spectrum: PowerSpectrum = PowerSpectrum(), n: int = 257) -> SystemConfig:
    """Identical-arm system with a one-cell point object of area qa / q0."""
    obj = ObjectMask.point(n=n, extent=n * qa / spectrum.effective_bandwidth)
    cfg = RunConfig()
    return SystemConfig.identical(N, cfg.test_arm(), cfg.reference_arms(2)[0], obj, spectrum)


def point_visibility(N: int, qa: float) -> float:
    """Visibility of the point image with every reference detector on it."""
    system = point_system(N, qa)
    X = np.array([0.0, 1.0 / system.spectrum.effective_bandwidth])
    axes = [X / a.gain for a in system.refs]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoincidenceWarning)
        res = g_n_identical(system, axes)
    return visibility_from_correlation(res, exclude_coincident=False)


@_timed
def check_visibility_bound(n_max: int = 5, tol: float = 1e-6) -> CheckResult:
    """Point object: bound saturated at q0 A = 1, strictly below it at q0 A = 5, rising with N."""
    Ns = list(range(2, n_max + 1))
    v1 = [point_visibility(N, 1.0) for N in Ns]
    v5 = [point_visibility(N, 5.0) for N in Ns]
    bounds = [visibility_bound(N) for N in Ns]
    sat = max(abs(v - b) for v, b in zip(v1, bounds))
    below = all(v < b for v, b in zip(v5, bounds))
    rising = all(np.diff(v1) > 0) and all(np.diff(v5) > 0)
    half = visibility_bound(2) == 0.5
    ok = sat <= tol and below and rising and half
    return CheckResult("visibility bound", ok,
                       f"max |V - (N-1)/N| at q0A=1: {sat:.1e}; q0A=5 below bound: {below}; increasing: {rising}",
                       {"N": Ns, "V_qa1": v1, "V_qa5": v5, "bound": bounds})


# 7 -----------------------------------------------------------------------


def random_soft_system(rng) -> SystemConfig:
    """A real-image N=2 system with a soft-edged slit object well inside the broadband limit."""
    q0 = rng.uniform(1.5e4, 3.0e4)
    speckle = 1 / q0
    width = rng.uniform(300e-6, 600e-6)
    edge = rng.uniform(3, 5) * speckle
    if rng.random() < 0.5:
        obj = ObjectMask.single_slit(width=width, edge=edge)
    else:
        obj = ObjectMask.double_slit(width=width, separation=width + edge + rng.uniform(100e-6, 500e-6), edge=edge)
    z1, fc, f = rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2)
    m = rng.uniform(0.5, 2.0)
    o = f * (1 + m)
    arm = ReferenceArm(2, z1 + o, f * o / (o - f), f)
    return SystemConfig(TestArm(z1, fc), (arm,), obj, PowerSpectrum(bandwidth=q0))


@_timed
def check_cauchy_schwarz(n_configs: int = 10, seed: int = 11) -> CheckResult:
    """<I_1><I_r>/max|C_r1|^2 from quadratures: at least 1 and equal to q0 int |T|^2."""
    rng = np.random.default_rng(seed)
    rows, ok = [], True
    for _ in range(n_configs):
        system = random_soft_system(rng)
        arm = system.arm(2)
        x_r = image_detector_grid(arm, system.obj, 256).positions
        measured = cauchy_schwarz_ratio_measured(system, 2, x_r)
        predicted = cauchy_schwarz_ratio(system)
        good = measured >= 1 - 1e-3 and abs(measured / predicted - 1) <= 0.05
        ok &= good and sampling_report(system, [x_r])["ok"]
        rows.append((measured, predicted))
    worst = max(abs(m / p - 1) for m, p in rows)
    low = min(m for m, _ in rows)
    return CheckResult("Cauchy-Schwarz ratio", bool(ok),
                       f"min ratio {low:.3f}, worst deviation from q0*A {worst:.2%} over {n_configs} configs",
                       {"measured": [r[0] for r in rows], "predicted": [r[1] for r in rows]})


# 8 -----------------------------------------------------------------------

# (case, kinds of arms 2, 3, 4)
EIGHT_CASES = (
    (1, ("real", "real", "real")),
    (2, ("virtual", "virtual", "virtual")),
    (3, ("real", "virtual", "virtual")),
    (4, ("virtual", "real", "virtual")),
    (5, ("virtual", "virtual", "real")),
    (6, ("real", "real", "virtual")),
    (7, ("real", "virtual", "real")),
    (8, ("virtual", "real", "real")),
)


def case_arms(kinds, z1: float = 0.1, f: float = 0.1) -> tuple:
    """Reference arms whose object distance is 2f (real) or f/2 (virtual)."""
    specs = [ArmSpec(z1 + (2 * f if k == "real" else f / 2), None, f) for k in kinds]
    return RunConfig(N=len(kinds) + 1, z1=z1, refs=tuple(specs)).reference_arms()


@_timed
def check_eight_configurations() -> CheckResult:
    """Real/virtual classification of the eight N=4 ghost-image configurations."""
    bad = []
    for case, kinds in EIGHT_CASES:
        got = tuple(classify_configuration(case_arms(kinds), 0.1))
        if got != kinds:
            bad.append(case)
    return CheckResult("eight configurations", not bad,
                       "all 8 cases reproduced" if not bad else f"mismatched cases {bad}", {"mismatched": bad})


# 9 -----------------------------------------------------------------------


@_timed
def check_determinism(M: int = 2000, seed: int = 5) -> CheckResult:
    """Two CLI runs with the same seed (1 and 3 threads) give byte-identical CSVs."""
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for i, threads in enumerate((1, 3)):
            out = Path(tmp) / f"run{i}"
            code = main(["--mode", "simulate", "--seed", str(seed), "--realizations", str(M), "--threads",
                         str(threads), "--deterministic", "--out", str(out), "--quiet"])
            if code != 0:
                return CheckResult("determinism", False, f"run {i} exited with {code}")
            outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        same = bool(outs[0]) and outs[0] == outs[1]
        return CheckResult("determinism", same,
                           f"{len(outs[0])} CSV files {'identical' if same else 'differ'} across runs",
                           {"files": sorted(outs[0])})


CHECKS = (
    check_moment_theorem,
    check_closed_forms,
    check_thin_lens_argmax,
    check_ghost_geometry,
    check_identical_arms,
    check_visibility_bound,
    check_cauchy_schwarz,
    check_eight_configurations,
    check_determinism,
)


def run_all(threads: int = 1, report=print) -> list[CheckResult]:
    out = []
    for check in CHECKS:
        kwargs = {"threads": threads} if check in (check_ghost_geometry, check_identical_arms) else {}
        res = check(**kwargs)
        if report:
            report(res.line())
        out.append(res)
    return out
