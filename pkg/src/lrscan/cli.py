"""Command-line interface.

Five subcommands over a single JSON config:

* ``rho``       print the window-overlap correlation matrix of a scheme
* ``fit``       per-window constrained and unconstrained MLEs for CSV data
* ``pvalue``    observed statistics, marginal tail probabilities, and the
                joint exceedance probability at the observed vector
* ``simulate``  draws from the limiting distribution plus histogram CSVs
* ``verify``    run a simulation study and check it against the asymptotic
                laws; exits 0 only if every configured check passes

Exit codes: 0 success, 2 input or configuration error, 3 numerical or study
failure.  Reports are deterministic bytes given (config, data, seed); the
``--threads`` flag changes scheduling only, never results.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .dataio import (
    acceptance_from_config,
    hyp_from_config,
    load_config,
    load_dataset,
    model_from_config,
    scheme_from_config,
    sha256_hex,
    study_from_config,
    write_histogram_csv,
    write_population_csv,
    write_report,
)
from .errors import ConfigError, InputError, LrscanError, NumericalError, StudyError
from .limitdist import LimitLaw, chi_square_survival, joint_exceedance, sample_limit_law
from .mle import fit_constrained, fit_unconstrained
from .simharness import run_study
from .windows import Dataset, lr_vector, overlap_correlation

_HIST_BINS = 100


def _resolve_seed(cfg: dict, args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return int(cfg.get("study", {}).get("seed", 0))


def _manifest(command: str, cfg: dict, args, seed: int, data_paths=()) -> dict:
    inputs = {str(args.config): sha256_hex(args.config)}
    for p in data_paths:
        inputs[str(p)] = sha256_hex(p)
    return {
        "command": command,
        "config": cfg,
        "inputs": inputs,
        "seed": seed,
        "version": __version__,
    }


def _emit(report: dict, args) -> None:
    text = write_report(report, args.out)
    if args.out is None:
        sys.stdout.write(text)


def _fit_dict(fit) -> dict:
    return {
        "theta": [float(v) for v in fit.theta_hat],
        "log_lik": float(fit.log_lik),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "grad_norm": float(fit.grad_norm),
    }


def cmd_rho(args) -> int:
    cfg = load_config(args.config)
    scheme = scheme_from_config(cfg)
    seed = _resolve_seed(cfg, args)
    report = {
        "manifest": _manifest("rho", cfg, args, seed),
        "scheme": {
            "P": scheme.P,
            "G": scheme.G,
            "M": scheme.M,
            "n": list(scheme.n),
        },
        "R": overlap_correlation(scheme).tolist(),
    }
    _emit(report, args)
    return 0


def _load_windows_inputs(args):
    cfg = load_config(args.config)
    model = model_from_config(cfg)
    if not args.data:
        raise InputError("this command requires --data files, one per population")
    arrays = load_dataset(model, args.data)
    scheme = scheme_from_config(cfg, n_from_files=[a.shape[0] for a in arrays])
    hyp = hyp_from_config(cfg)
    dataset = Dataset.from_arrays(model, scheme, arrays)
    return cfg, model, scheme, hyp, dataset


def cmd_fit(args) -> int:
    cfg, model, scheme, hyp, dataset = _load_windows_inputs(args)
    seed = _resolve_seed(cfg, args)
    windows = []
    all_converged = True
    for i in range(scheme.M):
        pooled = dataset.pooled(scheme, i)
        fu = fit_unconstrained(model, pooled)
        fc = fit_constrained(model, pooled, hyp)
        all_converged = all_converged and fu.converged and fc.converged
        windows.append(
            {
                "window": i + 1,
                "populations": [p + 1 for p in scheme.window_populations(i)],
                "n_pooled": int(pooled.shape[0]),
                "unconstrained": _fit_dict(fu),
                "constrained": _fit_dict(fc),
            }
        )
    report = {
        "manifest": _manifest("fit", cfg, args, seed, args.data),
        "windows": windows,
    }
    _emit(report, args)
    return 0 if all_converged else 3


def cmd_pvalue(args) -> int:
    cfg, model, scheme, hyp, dataset = _load_windows_inputs(args)
    seed = _resolve_seed(cfg, args)
    draws = int(cfg.get("study", {}).get("limit_law_draws", 100_000))
    res = lr_vector(model, dataset, scheme, hyp)
    stats = res.stats
    failed = bool(res.failed.any())
    marginal = [
        None if math.isnan(s) else chi_square_survival(hyp.r, s) for s in stats
    ]
    report = {
        "manifest": _manifest("pvalue", cfg, args, seed, args.data),
        "stats": [float(s) for s in stats],
        "marginal_p": marginal,
        "windows": [
            {
                "window": i + 1,
                "failed": bool(w.failed),
                "unconstrained": _fit_dict(w.unconstrained),
                "constrained": _fit_dict(w.constrained),
            }
            for i, w in enumerate(res.windows)
        ],
    }
    if not failed:
        law = LimitLaw(r=hyp.r, R=overlap_correlation(scheme))
        p_joint, se = joint_exceedance(law, stats, draws, seed)
        report["joint_exceedance"] = {
            "probability": p_joint,
            "std_error": se,
            "draws": draws,
            "seed": seed,
        }
    _emit(report, args)
    return 0 if not failed else 3


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    scheme = scheme_from_config(cfg)
    hyp = hyp_from_config(cfg)
    seed = _resolve_seed(cfg, args)
    draws = int(cfg.get("study", {}).get("limit_law_draws", 100_000))
    if args.out is None:
        raise ConfigError("simulate requires --out for the sample and histogram files")
    law = LimitLaw(r=hyp.r, R=overlap_correlation(scheme))
    batch = sample_limit_law(law, draws, seed)

    stem = args.out[:-5] if args.out.endswith(".json") else args.out
    samples_path = stem + ".samples.csv"
    write_population_csv(samples_path, batch.q)
    hist_paths = []
    for i in range(law.M):
        col = batch.q[:, i]
        edges = np.linspace(0.0, float(col.max()) or 1.0, _HIST_BINS + 1)
        counts, _ = np.histogram(col, bins=edges)
        path = f"{stem}.hist.w{i + 1}.csv"
        write_histogram_csv(path, edges, counts)
        hist_paths.append(path)

    centered = batch.q - batch.q.mean(axis=0)
    report = {
        "manifest": _manifest("simulate", cfg, args, seed),
        "law": {"r": law.r, "M": law.M, "R": law.R.tolist()},
        "draws": draws,
        "mean": batch.q.mean(axis=0).tolist(),
        "cov": ((centered.T @ centered) / (draws - 1)).tolist(),
        "samples_path": samples_path,
        "histogram_paths": hist_paths,
    }
    _emit(report, args)
    return 0


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    study = study_from_config(cfg, seed_override=args.seed)
    seed = study.seed
    report_obj = run_study(study, threads=args.threads)
    acceptance = acceptance_from_config(cfg)

    checks = []
    if report_obj.ks_p_values is not None:
        worst = min(report_obj.ks_p_values)
        checks.append(
            {
                "name": "marginal_ks",
                "passed": bool(worst > acceptance["ks_level"]),
                "min_p": worst,
                "level": acceptance["ks_level"],
            }
        )
    if report_obj.q_cov is not None:
        checks.append(
            {
                "name": "q_covariance",
                "passed": bool(
                    report_obj.q_cov.max_sigma_dev <= acceptance["q_cov_sigma"]
                ),
                "max_sigma_dev": report_obj.q_cov.max_sigma_dev,
                "limit": acceptance["q_cov_sigma"],
            }
        )
    checks.append(
        {
            "name": "mle_covariance",
            "passed": bool(
                report_obj.mle_cov.max_sigma_dev <= acceptance["mle_cov_sigma"]
            ),
            "max_sigma_dev": report_obj.mle_cov.max_sigma_dev,
            "limit": acceptance["mle_cov_sigma"],
        }
    )
    if report_obj.exceedance is not None:
        worst_dev = max(e.sigma_dev for e in report_obj.exceedance)
        checks.append(
            {
                "name": "joint_exceedance",
                "passed": bool(worst_dev <= acceptance["exceedance_sigma"]),
                "max_sigma_dev": worst_dev,
                "limit": acceptance["exceedance_sigma"],
            }
        )
    all_passed = all(c["passed"] for c in checks)

    report = {
        "manifest": _manifest("verify", cfg, args, seed),
        "study": report_obj.to_dict(),
        "acceptance": {"checks": checks, "all_passed": all_passed},
    }
    _emit(report, args)
    return 0 if all_passed else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrscan",
        description=(
            "Likelihood-ratio testing over overlapping sample windows with "
            "Monte Carlo calibration of the correlated chi-square limit law."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False):
        p.add_argument("--config", required=True, help="JSON config file")
        if data:
            p.add_argument(
                "--data",
                nargs="+",
                default=None,
                help="population CSV files, in population order",
            )
        p.add_argument("--out", default=None, help="report output path")
        p.add_argument(
            "--threads",
            type=int,
            default=os.cpu_count() or 1,
            help="worker threads (scheduling only; results never change)",
        )
        p.add_argument("--seed", type=int, default=None, help="master seed override")

    p_rho = sub.add_parser("rho", help="window-overlap correlation matrix")
    common(p_rho)
    p_rho.set_defaults(func=cmd_rho)

    p_fit = sub.add_parser("fit", help="per-window MLE fits")
    common(p_fit, data=True)
    p_fit.set_defaults(func=cmd_fit)

    p_pv = sub.add_parser("pvalue", help="observed statistics and p-values")
    common(p_pv, data=True)
    p_pv.set_defaults(func=cmd_pvalue)

    p_sim = sub.add_parser("simulate", help="sample the limiting distribution")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="simulation study vs. asymptotic laws")
    common(p_ver)
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, StudyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except LrscanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
