"""Command line front end.

Four subcommands: ``dominate`` solves for the dominating point and its
rates, ``rate`` reports the predicted decay rates along the ladder,
``estimate`` compares estimators at the top rung, and ``verify`` runs
the full ladder and fits empirical decay slopes.  Outputs are plain
JSON (sorted keys) and CSV (fixed header, 17 significant digits), with
no timestamps, so reruns with the same config and seed are
byte-identical.

Exit codes: 0 success, 2 configuration or validation failure, 3 solver
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.special import log_ndtr

from . import __version__
from .config import ExperimentConfig, load_config
from .dominate import (
    DominatingPoint,
    check_margin,
    corner_pairwise,
    dominating_point,
    rate_mixture,
)
from .errors import ConfigError, GaussMaxError, SingularPair
from .estimate import (
    EstimateReport,
    Method,
    exact_block_diagonal_log,
    exact_block_reports,
    is_single,
    mc_at_least_one,
    mc_componentwise,
    slope_fit,
    union_combine,
    union_combined_report,
)
from .model import GaussianMixture, GaussianModel, RandomStream
from .sets import Block, Halfspace, Polyhedron

CSV_HEADER = "n,speed,method,p_hat,std_error,log_p_hat,seed"

# Crude Monte Carlo rows are emitted only when n * trials * dimension
# stays under this budget; larger rungs rely on exact or IS-based rows.
CRUDE_SCALAR_BUDGET = 200_000_000

MARGIN_WARNING = "margin alpha <= 1"
MARGIN_NEAR_ONE = "margin alpha within 1e-9 of 1"


def _g(x: float) -> str:
    return f"{x:.17g}"


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, Method):
        return value.value
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)  # 'nan', 'inf', '-inf'
    return value


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")


def _write_csv(path: Path, reports: list[EstimateReport]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for r in reports:
        lines.append(
            ",".join(
                [
                    str(r.n),
                    _g(r.scaling_norm_sq),
                    r.method.value,
                    _g(r.p_hat),
                    _g(r.std_error),
                    _g(r.log_p_hat),
                    str(r.seed),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _report_dict(r: EstimateReport) -> dict:
    return {
        "p_hat": r.p_hat,
        "std_error": r.std_error,
        "log_p_hat": r.log_p_hat,
        "trials": r.trials,
        "method": r.method.value,
        "seed": r.seed,
        "n": r.n,
        "scaling_norm_sq": r.scaling_norm_sq,
        "degenerate_weights": r.degenerate_weights,
    }


def _envelope(config: ExperimentConfig, seed: int) -> dict:
    return {
        "artifact_version": __version__,
        "config_digest": config.digest(),
        "seed": seed,
    }


def _margin_warnings(alpha: float) -> list[str]:
    warnings = []
    if alpha <= 1.0:
        warnings.append(MARGIN_WARNING)
    elif alpha <= 1.0 + 1e-9:
        warnings.append(MARGIN_NEAR_ONE)
    return warnings


def _is_diagonal(sigma: np.ndarray) -> bool:
    off = sigma - np.diag(np.diag(sigma))
    return float(np.abs(off).max(initial=0.0)) <= 1e-14 * float(np.abs(sigma).max())


def _exact_block_applicable(model, target, limit) -> bool:
    return (
        isinstance(model, GaussianModel)
        and isinstance(target, Block)
        and _is_diagonal(model.covariance.sigma)
        and bool(np.all(model.mean == 0.0))
        and bool(np.all(limit.diagonal * target.corner > 0.0))
    )


def _solve(config: ExperimentConfig):
    """Dominating point (Gaussian) or mixture rate, plus shared summary fields."""
    model = config.build_model()
    target = config.build_set()
    limit = config.build_limit()
    if isinstance(model, GaussianMixture):
        mix = rate_mixture(target, model, limit)
        best = mix.per_component[mix.argmin_component - 1]
        alpha = 0.5 * best.quad_value
        return model, target, limit, mix, best.x_star, alpha, mix.rate
    point = dominating_point(target, model.covariance, limit)
    alpha, _ = check_margin(point)
    return model, target, limit, point, point.x_star, alpha, point.rate_componentwise


def run_dominate(config: ExperimentConfig, seed: int, outdir: Path) -> dict:
    model, target, limit, solved, x_star, alpha, rate = _solve(config)
    payload = _envelope(config, seed)
    payload["margin_alpha"] = alpha
    payload["margin_pass"] = alpha > 1.0
    payload["rate_componentwise"] = rate
    warnings = _margin_warnings(alpha)
    if isinstance(solved, DominatingPoint):
        payload.update(
            {
                "x_star": solved.x_star,
                "quad_value": solved.quad_value,
                "rate_single": solved.rate_single,
                "optimality_certificate": solved.optimality_certificate,
                "solver_iterations": solved.solver_iterations,
            }
        )
    else:
        payload.update(
            {
                "x_star": x_star,
                "argmin_component": solved.argmin_component,
                "per_component": [
                    {
                        "component": c.index,
                        "x_star": c.x_star,
                        "quad_value": c.quad_value,
                        "iterations": c.iterations,
                    }
                    for c in solved.per_component
                ],
            }
        )
    if isinstance(target, Polyhedron) and target.dimension == 2:
        try:
            corner = corner_pairwise(target.constraints, target.offsets)
            discrepancy = float(np.linalg.norm(np.asarray(x_star) - corner))
            payload["corner_pairwise"] = corner
            payload["corner_discrepancy"] = discrepancy
            if discrepancy > 1e-6:
                warnings.append(
                    "pairwise corner formula disagrees with the quadratic solver"
                )
        except SingularPair as exc:
            payload["corner_pairwise"] = None
            payload["corner_discrepancy"] = None
            warnings.append(f"pairwise corner unavailable: {exc}")
    payload["warnings"] = warnings
    _write_json(outdir / "dominate.json", payload)
    return payload


def run_rate(config: ExperimentConfig, seed: int, outdir: Path) -> dict:
    model, target, limit, solved, x_star, alpha, rate = _solve(config)
    ladder = config.build_ladder()
    payload = _envelope(config, seed)
    payload.update(
        {
            "speed_definition": "2*log(n)",
            "ladder": [{"n": e.n, "speed": e.speed} for e in ladder.entries()],
            "margin_alpha": alpha,
            "rate_componentwise": rate,
            "warnings": _margin_warnings(alpha),
        }
    )
    if isinstance(solved, DominatingPoint):
        payload["rate_single"] = solved.rate_single
        payload["x_star"] = solved.x_star
    else:
        payload["argmin_component"] = solved.argmin_component
        payload["per_component"] = [
            {"component": c.index, "quad_value": c.quad_value}
            for c in solved.per_component
        ]
    _write_json(outdir / "rate.json", payload)
    return payload


def _exact_single_tail(model: GaussianModel, target, scale_diag: np.ndarray):
    """Exact log of the single-vector probability where a closed form exists."""
    if isinstance(target, Block) and _is_diagonal(model.covariance.sigma):
        corner = scale_diag * target.corner - model.mean
        sd = np.sqrt(np.diag(model.covariance.sigma))
        return float(np.sum(log_ndtr(-corner / sd)))
    if isinstance(target, Halfspace):
        normal = target.normal / scale_diag
        offset = target.offset
        spread = math.sqrt(float(normal @ model.covariance.sigma @ normal))
        return float(log_ndtr(-(offset - float(normal @ model.mean)) / spread))
    return None


def run_estimate(config: ExperimentConfig, seed: int, outdir: Path, zero_shift: bool) -> dict:
    model, target, limit, solved, x_star, alpha, rate = _solve(config)
    entries = config.build_ladder().entries()
    payload = _envelope(config, seed)
    warnings = _margin_warnings(alpha)
    root = RandomStream(seed)

    if isinstance(model, GaussianMixture):
        d = model.dimension
        feasible = [
            e for e in entries if e.n * config.trials * d <= CRUDE_SCALAR_BUDGET
        ]
        if not feasible:
            warnings.append("no ladder entry fits the crude sampling budget")
            payload["warnings"] = warnings
            _write_json(outdir / "estimate.json", payload)
            return payload
        entry = feasible[-1]
        payload.update({"n": entry.n, "speed": entry.speed})
        cw = mc_componentwise(model, target, entry, config.trials, root.substream(901))
        alo = mc_at_least_one(model, target, entry, config.trials, root.substream(902))
        payload["crude_componentwise"] = _report_dict(cw)
        payload["crude_at_least_one"] = _report_dict(alo)
        payload["warnings"] = warnings
        _write_json(outdir / "estimate.json", payload)
        return payload

    entry = entries[-1]
    scaled = target.scale(entry.scale_diag)
    shift = np.zeros(model.dimension) if zero_shift else entry.scale_diag * np.asarray(x_star)
    stream = root.substream(800)
    is_report = is_single(
        model, scaled, shift, config.is_samples, stream, n=1, scaling_norm_sq=entry.speed
    )
    crude_report = is_single(
        model, scaled, np.zeros(model.dimension), config.is_samples, stream,
        n=1, scaling_norm_sq=entry.speed,
    )
    union_report = union_combined_report(is_report, entry.n, entry.speed)
    if is_report.degenerate_weights:
        warnings.append("importance sampler produced no hits (degenerate weights)")

    var_is = is_report.std_error**2 * is_report.trials
    var_crude = crude_report.p_hat * (1.0 - crude_report.p_hat)
    crude_resolved = crude_report.p_hat > 0.0
    reduction = None
    if crude_resolved and var_is > 0.0:
        reduction = var_crude / var_is

    payload.update(
        {
            "n": entry.n,
            "speed": entry.speed,
            "zero_shift": zero_shift,
            "shift": shift,
            "importance_sampled": _report_dict(is_report),
            "crude_single": _report_dict(crude_report),
            "union_combined": _report_dict(union_report),
            "crude_resolved": crude_resolved,
            "variance_reduction_factor": reduction,
            "degenerate_weights": is_report.degenerate_weights,
        }
    )

    log_q_exact = _exact_single_tail(model, target, entry.scale_diag)
    if log_q_exact is not None:
        q_exact = math.exp(log_q_exact)
        p_alo_exact = union_combine(q_exact, entry.n)
        exact = {"q_single": q_exact, "p_at_least_one": p_alo_exact}
        relative = {}
        if q_exact > 0.0:
            relative["importance_sampled_vs_exact"] = abs(is_report.p_hat - q_exact) / q_exact
        if p_alo_exact > 0.0:
            relative["union_combined_vs_exact"] = (
                abs(union_report.p_hat - p_alo_exact) / p_alo_exact
            )
        if _exact_block_applicable(model, target, limit):
            log_cw, log_alo = exact_block_diagonal_log(
                np.diag(model.covariance.sigma),
                entry.scale_diag * target.corner,
                1.0,
                entry.n,
            )
            exact["p_componentwise"] = math.exp(log_cw)
        payload["exact"] = exact
        payload["relative_errors"] = relative
    else:
        payload["exact"] = None
        payload["relative_errors"] = None

    payload["warnings"] = warnings
    _write_json(outdir / "estimate.json", payload)
    return payload


_VERIFY_METHOD_ORDER = (
    Method.EXACT_BLOCK_DIAGONAL,
    Method.UNION_COMBINED,
    Method.CRUDE_COMPONENTWISE,
    Method.CRUDE_AT_LEAST_ONE,
)

# Methods whose ladder probabilities follow the at-least-one event.
_AT_LEAST_ONE_METHODS = {Method.UNION_COMBINED, Method.CRUDE_AT_LEAST_ONE}


def run_verify(config: ExperimentConfig, seed: int, outdir: Path, workers: int) -> dict:
    model, target, limit, solved, x_star, alpha, rate = _solve(config)
    entries = config.build_ladder().entries()
    d = target.dimension
    gaussian = isinstance(model, GaussianModel)
    exact_ok = gaussian and _exact_block_applicable(model, target, limit)
    root = RandomStream(seed)
    x_star = np.asarray(x_star, dtype=float)

    def entry_rows(item) -> list[EstimateReport]:
        i, entry = item
        rows: list[EstimateReport] = []
        if exact_ok:
            cw, alo = exact_block_reports(
                np.diag(model.covariance.sigma), target.corner, entry, seed
            )
            rows.extend([cw, alo])
        if entry.n * config.trials * d <= CRUDE_SCALAR_BUDGET:
            rows.append(
                mc_componentwise(model, target, entry, config.trials, root.substream(16 * i + 1))
            )
            rows.append(
                mc_at_least_one(model, target, entry, config.trials, root.substream(16 * i + 2))
            )
        if gaussian and not exact_ok:
            scaled = target.scale(entry.scale_diag)
            shift = entry.scale_diag * x_star
            q = is_single(
                model, scaled, shift, config.is_samples, root.substream(16 * i + 3),
                n=1, scaling_norm_sq=entry.speed,
            )
            rows.append(union_combined_report(q, entry.n, entry.speed))
        order = {m: k for k, m in enumerate(_VERIFY_METHOD_ORDER)}
        rows.sort(key=lambda r: order[r.method])
        return rows

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            grouped = list(pool.map(entry_rows, enumerate(entries)))
    else:
        grouped = [entry_rows(item) for item in enumerate(entries)]
    reports = [r for group in grouped for r in group]
    _write_csv(outdir / "verify_ladder.csv", reports)

    summary = _envelope(config, seed)
    summary.update(
        {
            "speed_definition": "2*log(n)",
            "predicted_rate": rate,
            "margin_alpha": alpha,
            "workers": workers,
            "ladder": [{"n": e.n, "speed": e.speed} for e in entries],
        }
    )
    warnings = _margin_warnings(alpha)
    product_rate = 0.5 * d - alpha

    fits = {}
    for method in _VERIFY_METHOD_ORDER:
        pts = [
            (r.scaling_norm_sq, r.log_p_hat)
            for r in reports
            if r.method is method and math.isfinite(r.log_p_hat)
        ]
        if not pts:
            continue
        try:
            fit = slope_fit(pts, rate)
        except ValueError as exc:
            fits[method.value] = {"error": str(exc), "points": pts}
            continue
        entry_dict = {
            "points": [list(p) for p in fit.points],
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "predicted_rate": fit.predicted_rate,
            "relative_gap": fit.relative_gap,
        }
        if method not in _AT_LEAST_ONE_METHODS:
            entry_dict["product_rate"] = product_rate
            if product_rate != 0.0:
                entry_dict["relative_gap_product"] = abs(fit.slope - product_rate) / abs(
                    product_rate
                )
        fits[method.value] = entry_dict
    summary["slope_fits"] = fits

    if exact_ok:
        gap_entries = []
        worst = 0.0
        for e in entries:
            log_cw, log_alo = exact_block_diagonal_log(
                np.diag(model.covariance.sigma), e.scale_diag * target.corner, 1.0, e.n
            )
            log_ratio = log_cw - log_alo
            scaled_gap = log_ratio / math.log(e.n)
            worst = max(worst, abs(scaled_gap))
            gap_entries.append(
                {"n": e.n, "log_ratio": log_ratio, "log_ratio_over_log_n": scaled_gap}
            )
        detected = worst > 0.01
        summary["equivalence_gap"] = {
            "entries": gap_entries,
            "gap_detected": detected,
            "max_log_ratio_over_log_n": worst,
        }
        if detected:
            warnings.append(
                "componentwise and at-least-one probabilities differ on the log n scale"
            )
    summary["warnings"] = warnings
    _write_json(outdir / "verify_summary.json", summary)
    return summary


def _prepare(args) -> tuple[ExperimentConfig, int, Path]:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.seed
    outdir = Path(args.out) if args.out else Path(config.outputs)
    return config, seed, outdir


def _cmd_dominate(args) -> int:
    config, seed, outdir = _prepare(args)
    payload = run_dominate(config, seed, outdir)
    print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    return 0


def _cmd_rate(args) -> int:
    config, seed, outdir = _prepare(args)
    payload = run_rate(config, seed, outdir)
    print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    return 0


def _cmd_estimate(args) -> int:
    config, seed, outdir = _prepare(args)
    run_estimate(config, seed, outdir, args.zero_shift)
    print(f"wrote {outdir / 'estimate.json'}")
    return 0


def _cmd_verify(args) -> int:
    config, seed, outdir = _prepare(args)
    if args.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {args.workers}")
    run_verify(config, seed, outdir, args.workers)
    print(f"wrote {outdir / 'verify_ladder.csv'}")
    print(f"wrote {outdir / 'verify_summary.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussmax",
        description="Dominating points and decay-rate verification for scaled Gaussian maxima.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the YAML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the config output directory")

    p_dom = sub.add_parser("dominate", help="solve for the dominating point and rates")
    common(p_dom)
    p_dom.set_defaults(func=_cmd_dominate)

    p_rate = sub.add_parser("rate", help="report predicted decay rates along the ladder")
    common(p_rate)
    p_rate.set_defaults(func=_cmd_rate)

    p_est = sub.add_parser("estimate", help="compare estimators at the top ladder rung")
    common(p_est)
    p_est.add_argument(
        "--zero-shift",
        action="store_true",
        help="disable the importance-sampling shift (reduces IS to crude MC)",
    )
    p_est.set_defaults(func=_cmd_estimate)

    p_ver = sub.add_parser("verify", help="run the ladder and fit empirical decay slopes")
    common(p_ver)
    p_ver.add_argument("--workers", type=int, default=1, help="parallel workers over ladder rungs")
    p_ver.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GaussMaxError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
