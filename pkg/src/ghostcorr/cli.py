"""Command-line driver.

Exit status: 0 success, 1 configuration error, 2 numerical or domain
error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .config import MODES, ConfigError, RunConfig, parse_config, to_ini, with_overrides
from .correlator import (
    CoincidenceWarning,
    THIN_LENS_TOL,
    bucket_weights,
    chi,
    g_n_analytic,
    g_n_identical,
    g_n_monte_carlo,
    geometry_flags,
    intensity_I1,
    intensity_Ir,
    sampling_report,
)
from .imaging import (
    bright_points,
    classify_configuration,
    plan_scan,
    reconstruct_ghost_image,
    scaled_position,
    thin_lens_residual,
)
from .optics import ObjectMask
from .output import write_csv, write_pgm, write_profile_csv, write_summary
from .visibility import (
    cauchy_schwarz_ratio,
    visibility_analytic,
    visibility_error,
    visibility_from_correlation,
    visibility_report,
)

__all__ = ["main", "run", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_DOMAIN", "EXIT_VALIDATION"]

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_VALIDATION = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghostcorr", description="Nth-order thermal-light ghost imaging simulator.")
    p.add_argument("--config", type=Path, help="INI run configuration (defaults apply when omitted)")
    p.add_argument("--mode", choices=MODES, help="override [run] mode")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--realizations", type=int, help="override [run] realizations (M)")
    p.add_argument("--out", help="override [run] output directory")
    p.add_argument("--threads", type=int, help="worker threads for the ensemble")
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None,
                   help="fixed-order reduction (bit-identical for any thread count)")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def _log(quiet, *args):
    if not quiet:
        print(*args)


# derived quantities ------------------------------------------------------


def _arm_table(cfg: RunConfig, system=None) -> list:
    arms = system.refs if system is not None else cfg.reference_arms()
    kinds = classify_configuration(arms, cfg.z1)
    return [
        {
            "arm": a.index,
            "z_r0": a.z_r0,
            "z_r1": a.z_r1,
            "f_r": a.f_r,
            "object_distance": a.z_r0 - cfg.z1,
            "magnification": a.gain,
            "kind": kind,
            "thin_lens_residual": thin_lens_residual(a, cfg.z1),
        }
        for a, kind in zip(arms, kinds)
    ]


def _derived(cfg, system) -> dict:
    out = {
        "N": system.N,
        "k": system.k,
        "I1": intensity_I1(system),
        "Ir": {a.index: intensity_Ir(system, a.index) for a in system.refs},
        "transmission_area": system.obj.transmission_area(),
        "effective_bandwidth": system.spectrum.effective_bandwidth,
        "bucket_weights": bucket_weights(system),
        "arms": _arm_table(cfg, system),
        "geometry_flags": geometry_flags(system),
    }
    if system.identical_arms():
        out["chi"] = chi(system)
    return out


def _best_positions(system, axes) -> list:
    """Per arm, the scanned scaled position of maximal |T|^2."""
    best = []
    for arm, ax in zip(system.refs, axes):
        X = scaled_position(arm, ax)
        best.append(float(X[np.argmax(np.abs(system.obj(X)) ** 2)]))
    return best


def _visibility(system, result, axes):
    q0 = system.spectrum.effective_bandwidth
    analytic = visibility_analytic(system.obj, q0, system.N, _best_positions(system, axes))
    return visibility_report(system.N, visibility_from_correlation(result), analytic,
                             cauchy_schwarz_ratio(system), visibility_error(result))


# modes -----------------------------------------------------------------


def _write_profiles(out: Path, cfg, system, result, suffix=""):
    """Profile CSV (one scanned arm) or scan CSV plus heatmap (two scanned arms)."""
    axes = result.scan_axes
    scanned = list(cfg.scan_arms)
    files, images = [], []
    if len(scanned) == 1:
        r = scanned[0]
        p = r - 2
        idx = tuple(slice(None) if i == p else 0 for i in range(len(axes)))
        bg = np.broadcast_to(np.asarray(result.background, dtype=float), result.shape)[idx]
        se = None if result.std_error is None else result.std_error[idx]
        files.append(write_profile_csv(out / f"profile_arm{r}{suffix}.csv", axes[p], result.values[idx], se, bg))
        img = reconstruct_ghost_image(result, r, object_mask=system.obj)
        images.append({
            "arm": r,
            "peaks": img.peaks,
            "peak_heights": img.peak_heights,
            "estimated_magnification": img.magnification,
            "diagnostic": img.diagnostic,
        })
    else:
        r, rp = sorted(scanned)
        p, pp = r - 2, rp - 2
        idx = tuple(slice(None) if i in (p, pp) else 0 for i in range(len(axes)))
        G = result.values[idx]
        bg = np.broadcast_to(np.asarray(result.background, dtype=float), result.shape)[idx]
        se = np.zeros_like(G) if result.std_error is None else result.std_error[idx]
        rows = ((axes[p][i], axes[pp][j], G[i, j], se[i, j], bg[i, j])
                for i in range(G.shape[0]) for j in range(G.shape[1]))
        files.append(write_csv(out / f"scan_arm{r}_arm{rp}{suffix}.csv",
                               ["x_r", "x_rp", "G", "std_error", "background"], rows))
        files.append(write_pgm(out / f"heatmap_arm{r}_arm{rp}{suffix}.pgm", G - bg))
    return files, images


def _agreement(mc, an) -> dict:
    z = np.abs(mc.values - an.values) / mc.std_error
    z = z[mc.valid] if mc.valid is not None and mc.valid.any() else z.ravel()
    return {"within_5se": float(np.mean(z <= 5)), "max_z": float(np.max(z))}


def _run_scan(cfg: RunConfig, out: Path, quiet: bool) -> dict:
    system = cfg.system()
    axes = plan_scan(system, cfg.scan_arms, cfg.scan_points, cfg.scan_margin, cfg.park_gap)
    thin = all(thin_lens_residual(a, cfg.z1) <= THIN_LENS_TOL for a in system.refs)
    if system.identical_arms() and thin:
        analytic = g_n_identical(system, axes)
    else:
        analytic = g_n_analytic(system, axes, image_term="closed" if thin else "quadrature")
    summary = {"derived": _derived(cfg, system), "sampling": sampling_report(system, axes)}
    if cfg.mode == "simulate":
        t0 = time.perf_counter()
        result = g_n_monte_carlo(system, axes, cfg.realizations, cfg.seed, threads=cfg.threads,
                                 deterministic=cfg.deterministic, block_size=cfg.block_size or None)
        _log(quiet, f"Monte Carlo: M={cfg.realizations}, {np.prod(result.shape)} points, "
                    f"{time.perf_counter() - t0:.1f} s")
        summary["monte_carlo"] = {
            "M": result.M,
            "seed": cfg.seed,
            "block_size": result.metadata["block_size"],
            "background_ratio": result.metadata["background_ratio"],
            "agreement_with_analytic": _agreement(result, analytic),
        }
        files, images = _write_profiles(out, cfg, system, result)
        more, _ = _write_profiles(out, cfg, system, analytic, suffix="_analytic")
        files += more
    else:
        result = analytic
        files, images = _write_profiles(out, cfg, system, result)
    summary["method"] = result.method
    summary["ghost_images"] = images
    summary["visibility"] = _visibility(system, result, axes).to_dict()
    summary["files"] = [f.name for f in files]
    for img in images:
        _log(quiet, f"arm {img['arm']}: peaks at {np.round(np.asarray(img['peaks']) * 1e3, 4).tolist()} mm"
                    + (f" ({img['diagnostic']})" if img["diagnostic"] else ""))
    _log(quiet, f"visibility {summary['visibility']['measured']:.4f} "
                f"(predicted {summary['visibility']['analytic']:.4f}, bound {summary['visibility']['bound']:.4f})")
    return summary


def _sweep_positions(cfg, obj, N, q0):
    placement = cfg.placement
    if placement == "auto":
        placement = "coincident" if cfg.preset == "point" else "distinct"
    if placement == "coincident":
        w = np.abs(obj.t) ** 2
        return np.full(N - 1, obj.x[np.argmax(w)]), placement
    return bright_points(obj, N - 1, 2.0 / q0), placement


def _run_sweep(cfg: RunConfig, out: Path, quiet: bool) -> dict:
    rows, reports = [], []
    q0 = cfg.spectrum().effective_bandwidth
    targets = cfg.qa or (None,)
    for qa in targets:
        for N in range(cfg.n_min, cfg.n_max + 1):
            if qa is None:
                obj = cfg.object_mask()
            else:
                n = cfg.object_samples | 1
                obj = ObjectMask.point(n=n, extent=n * qa / q0)
            system = cfg.system(N=N, obj=obj)
            X, placement = _sweep_positions(cfg, obj, N, q0)
            axes = [np.array([x / a.gain]) for x, a in zip(X, system.refs)]
            exclude = placement != "coincident"
            with warnings.catch_warnings():
                if not exclude:
                    warnings.simplefilter("ignore", CoincidenceWarning)
                if cfg.measure == "monte-carlo":
                    res = g_n_monte_carlo(system, axes, cfg.realizations, cfg.seed, threads=cfg.threads,
                                          deterministic=cfg.deterministic)
                else:
                    res = g_n_identical(system, axes)
            measured = visibility_from_correlation(res, exclude_coincident=exclude)
            error = visibility_error(res, exclude_coincident=exclude)
            rep = visibility_report(N, measured, visibility_analytic(obj, q0, N, X), cauchy_schwarz_ratio(system), error)
            qa_value = q0 * obj.transmission_area()
            rows.append((N, qa_value, rep.measured, rep.analytic, rep.bound, rep.measured_error))
            reports.append({**rep.to_dict(), "q0A": qa_value, "placement": placement, "positions": X})
            _log(quiet, f"N={N} q0A={qa_value:.4g}: V={rep.measured:.6f} predicted {rep.analytic:.6f} "
                        f"bound {rep.bound:.6f}")
    f = write_csv(out / "visibility.csv", ["N", "q0A", "V_measured", "V_analytic", "bound", "V_error"], rows)
    return {"visibility_sweep": reports, "measure": cfg.measure, "files": [f.name]}


def _run_classify(cfg: RunConfig, quiet: bool) -> dict:
    table = _arm_table(cfg)
    for row in table:
        _log(quiet, f"arm {row['arm']}: {row['kind']} (z_r1 = {row['z_r1']:.6g} m, magnification {row['magnification']:.4g})")
    return {"classification": [row["kind"] for row in table], "derived": {"arms": table}}


def run(cfg: RunConfig, quiet: bool = False) -> int:
    """Execute one configured run and write its artifacts into ``cfg.output``."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"mode": cfg.mode, "config": to_ini(cfg)}
    status = EXIT_OK
    if cfg.mode in ("simulate", "analytic"):
        summary.update(_run_scan(cfg, out, quiet))
    elif cfg.mode == "visibility-sweep":
        summary.update(_run_sweep(cfg, out, quiet))
    elif cfg.mode == "classify":
        summary.update(_run_classify(cfg, quiet))
    elif cfg.mode == "validate":
        from .validation import run_all

        results = run_all(threads=cfg.threads, report=None if quiet else print)
        summary["validation"] = [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]
        if not all(r.passed for r in results):
            status = EXIT_VALIDATION
    write_summary(out / "summary.json", summary)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
        cfg = with_overrides(cfg, mode=args.mode, seed=args.seed, realizations=args.realizations,
                             output=args.out, threads=args.threads, deterministic=args.deterministic)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg, quiet=args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # any module error is reported, not raised
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
