import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import compare_spectra, dist_test, match_spectra, select_memory_depth
from .config import DEFAULT_CONFIG_NAME, STARTER_CONFIG, AppConfig, ModelSection, load_config
from .embedding import ThresholdConfig, denoise_dataset, effective_env_dim, fit, natural_rank, predict_trajectory
from .errors import NoSignalError
from .logger import get_logger, set_log_level
from .models import channel_spectrum, model_config_from_metadata, simulate_experiment
from .qcore import bloch_vector
from .storage import (
    atomic_write_text,
    complex_pairs,
    file_fingerprint,
    read_dataset,
    read_model,
    write_csv,
    write_dataset,
    write_json,
    write_model,
)
from .sweeps import (
    SPECTRUM_SIGMAS,
    sweep_denoising,
    sweep_finite_env,
    sweep_memory_depth,
    sweep_spectra,
    sweep_spin_boson_gamma,
)
from .validators import RATE_NORMS, parse_complex, validate_model_params

logger = get_logger(__name__)

MODEL_PARAM_FLAGS = (
    "d_E", "d", "a_unit", "a_diss", "rate_norm", "generator_seed",
    "gamma", "g", "alpha", "n_levels", "Delta", "omega0", "tau",
    "check_convergence", "convergence_tol",
)
SPECTRUM_COLUMNS = ["source", "recovered_re", "recovered_im", "reference_re", "reference_im", "distance"]


def _error(msg) -> int:
    print(f"[ERROR] {msg}", file=sys.stderr)
    return 1


def _load_app_config(args) -> AppConfig:
    path = getattr(args, "config", None)
    if not path:
        return AppConfig()
    config_path = Path(path)
    if not config_path.exists():
        raise ValueError(
            f"Config file not found: {config_path}. Run `markov-embedding init` first."
        )
    return load_config(config_path)


def _pick(value, fallback):
    return fallback if value is None else value


def cmd_init(args):
    """Create a starter config file in the current directory."""
    target = Path(args.path or DEFAULT_CONFIG_NAME)
    if target.exists() and not args.force:
        print(f"[WARN] Config file already exists: {target}", file=sys.stderr)
        print("[INFO] Use -f/--force to overwrite", file=sys.stderr)
        return 1
    atomic_write_text(target, STARTER_CONFIG)
    print(f"[OK] Created config file: {target}")
    return 0


def cmd_generate(args):
    """Simulate a training set, its clean twin and one test trajectory."""
    app = _load_app_config(args)
    kind = _pick(args.model, app.model.kind)
    section = ModelSection(kind=kind, params=app.model.params if kind == app.model.kind else {})

    overrides = {name: getattr(args, name, None) for name in MODEL_PARAM_FLAGS}
    merged = dict(section.params)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    problems = validate_model_params(kind, merged)
    if problems:
        return _error("Invalid model parameters:\n  - " + "\n  - ".join(problems))

    seed = _pick(args.seed, app.dataset.seed)
    L = _pick(args.L, app.dataset.L)
    T = _pick(args.T, app.dataset.T)
    sigma = _pick(args.sigma, app.dataset.sigma)
    cfg = section.to_model_config(seed=seed, overrides=overrides)

    data = simulate_experiment(cfg, L, T, sigma, seed)

    out = Path(args.out)
    out_clean = Path(args.out_clean)
    out_test = Path(args.out_test)
    write_dataset(out_clean, data.train_clean)
    write_dataset(out, data.train_noisy, clean_path=out_clean)
    write_dataset(out_test, data.test_noisy, clean=data.test_clean)
    print(f"[OK] Wrote {out}, {out_clean} and {out_test}")
    return 0


def _finite_pairs(values):
    # log(0) has no finite rate
    return [pair if np.all(np.isfinite(pair)) else None for pair in complex_pairs(values)]


def _fit_report(model, runtime_s, dataset, variant, project, selection=None):
    report = {
        "r": model.r,
        "K": model.K,
        "d": model.d,
        "d_E_eff": effective_env_dim(model.r, model.d),
        "variant": variant,
        "project": project,
        "threshold": {"sigma": model.threshold.sigma, "floor": model.threshold.floor},
        "eigenvalues": complex_pairs(model.eigenvalues),
        "continuous_rates": _finite_pairs(model.continuous_rates()),
        "singular_values": [float(s) for s in model.singular_values],
    }
    meta = dataset.metadata
    if meta.get("kind") == "finite" and "generator_seed" in meta:
        cfg = model_config_from_metadata(meta)
        report["natural_rank"] = natural_rank(cfg.d, cfg.d_E)
        report["spectrum_match"] = match_spectra(model.eigenvalues, channel_spectrum(cfg)).summary()
    if selection is not None:
        report["memory_depth_selection"] = {
            "best_K": selection.best_K,
            "scores": {str(k): v for k, v in selection.scores.items()},
            "failures": {str(k): v for k, v in selection.failures.items()},
        }
    report["runtime_s"] = round(runtime_s, 3)
    return report


def cmd_fit(args):
    """Reconstruct the embedding from a dataset file."""
    app = _load_app_config(args)
    dataset = read_dataset(args.data)
    section = replace(
        app.fit,
        sigma=_pick(args.sigma, app.fit.sigma),
        floor=_pick(args.floor, app.fit.floor),
    )
    threshold = section.threshold(fallback_sigma=dataset.noise_sigma)
    variant = _pick(args.variant, app.fit.variant)
    project = _pick(args.project, app.fit.project)
    K = _pick(args.K, app.fit.K)

    start = time.perf_counter()
    selection = None
    if args.select_K:
        if not args.validation:
            return _error("--select-K requires --validation TEST.json")
        validation = read_dataset(args.validation)
        selection = select_memory_depth(dataset, validation, args.select_K, threshold, variant=variant)
        K = selection.best_K

    try:
        model = fit(dataset, K, threshold, variant=variant)
    except NoSignalError as exc:
        logger.debug(str(exc))
        return _error("no signal above noise threshold")
    runtime = time.perf_counter() - start

    print(f"[OK] r = {model.r}, d_E_eff = {effective_env_dim(model.r, model.d)} (K={K})")
    if args.out_model:
        write_model(
            args.out_model,
            model,
            fingerprint=file_fingerprint(args.data),
            variant=variant,
            project=project,
        )
    if args.report:
        write_json(args.report, _fit_report(model, runtime, dataset, variant, project, selection))
        logger.info(f"Wrote report {args.report}")
    return 0


def _state_columns(d, prefix):
    if d == 2:
        return [f"{prefix}_x", f"{prefix}_y", f"{prefix}_z"]
    return [
        f"{prefix}_{part}_{i}{j}"
        for i in range(d) for j in range(d) for part in ("re", "im")
    ]


def _state_values(rho, prefix):
    d = rho.shape[0]
    if d == 2:
        return dict(zip(_state_columns(2, prefix), bloch_vector(rho)))
    values = {}
    for i in range(d):
        for j in range(d):
            values[f"{prefix}_re_{i}{j}"] = float(rho[i, j].real)
            values[f"{prefix}_im_{i}{j}"] = float(rho[i, j].imag)
    return values


def cmd_predict(args):
    """Predict from the first K states of every test trajectory."""
    model, header = read_model(args.model)
    test, clean = read_dataset(args.data, with_clean=True)
    K = model.K
    if test.d != model.d:
        return _error(f"Model dimension d={model.d} does not match dataset d={test.d}")
    if test.T < K:
        return _error(f"Test trajectory length {test.T} is shorter than K={K}")
    horizon = args.horizon if args.horizon is not None else test.T - K
    if horizon <= 0:
        return _error("--horizon must be positive")
    project = _pick(args.project, header["project"])

    columns = ["trajectory", "step"] + _state_columns(model.d, "pred") + _state_columns(model.d, "data")
    rows = []
    scores = {"dist_test_data": [], "dist_test_clean": []}
    n_eval = min(horizon, test.T - K)
    for l in range(test.L):
        history = test.trajectories[l, :K]
        pred = predict_trajectory(model, history, horizon, project=project)
        for n in range(horizon):
            step = K + n
            row = {"trajectory": l, "step": step}
            row.update(_state_values(pred[n], "pred"))
            if step < test.T:
                row.update(_state_values(test.trajectories[l, step], "data"))
            rows.append(row)
        if n_eval > 0:
            full = np.concatenate([history, pred[:n_eval]])
            scores["dist_test_data"].append(dist_test(full, test.trajectories[l, :K + n_eval], K))
            if clean is not None:
                scores["dist_test_clean"].append(dist_test(full, clean.trajectories[l, :K + n_eval], K))

    write_csv(args.out_csv, columns, rows)
    report = {"K": K, "horizon": horizon, "evaluated_steps": n_eval}
    for key, values in scores.items():
        if values:
            report[key] = float(np.mean(values))
            print(f"[OK] {key} = {report[key]:.6e}")
    if args.report is not None:
        report_path = Path(args.report) if args.report else Path(args.out_csv).with_suffix(".json")
        write_json(report_path, report)
        logger.info(f"Wrote report {report_path}")
    print(f"[OK] Wrote {args.out_csv}")
    return 0


def cmd_denoise(args):
    """Rank-truncate the Hankel matrix of a dataset and write the result."""
    dataset = read_dataset(args.data)
    sigma = _pick(args.sigma, dataset.noise_sigma)
    if sigma == 0:
        logger.info("Dataset is noiseless; writing it unchanged")
        write_dataset(args.out, dataset)
        print(f"[OK] Wrote {args.out}")
        return 0
    threshold = ThresholdConfig(sigma=float(sigma), floor=float(args.floor))
    eta, denoised = denoise_dataset(dataset, args.K, threshold, project=args.project)
    write_dataset(args.out, denoised)
    print(f"[OK] Denoised with rank {eta}; wrote {args.out}")
    return 0


def cmd_spectrum(args):
    """Reconstructed eigenvalues against the spectrum of exp(tau L)."""
    model, header = read_model(args.model)
    fingerprint = file_fingerprint(args.data)
    if header["fingerprint"] and header["fingerprint"] != fingerprint:
        logger.warning(f"{args.data} is not the dataset the model was fitted on (fingerprint mismatch)")
    dataset = read_dataset(args.data)
    cfg = model_config_from_metadata(dataset.metadata)
    reference = channel_spectrum(cfg)
    rows = compare_spectra(model, reference)
    write_csv(args.out_csv, SPECTRUM_COLUMNS, rows)
    summary = match_spectra(model.eigenvalues, reference).summary()
    print(
        f"[OK] matched {summary['matched']} eigenvalues, max distance "
        f"{summary['max_distance']:.3e}; wrote {args.out_csv}"
    )
    return 0


def cmd_sweep(args):
    """Run one of the experiment sweeps and write its CSV."""
    app = _load_app_config(args)
    seeds = args.seeds or app.sweep.seeds
    workers = _pick(args.workers, app.sweep.workers)
    grid = {
        key: values
        for key, values in (
            ("d_E", args.d_E), ("sigma", args.sigma), ("T", args.T),
            ("K", args.K), ("gamma", args.gamma),
        )
        if values
    }

    name = args.sweep
    if name == "table1":
        report = sweep_finite_env(seeds, grid, workers=workers)
    elif name == "fig3b":
        report = sweep_memory_depth(seeds, grid, workers=workers)
    elif name == "fig3c":
        extra = set(grid) - {"sigma"}
        if extra:
            return _error(f"fig3c only accepts --sigma, got {sorted(extra)}")
        report = sweep_spectra(seeds, grid.get("sigma", SPECTRUM_SIGMAS), workers=workers)
    elif name == "fig3d":
        report = sweep_denoising(seeds, grid, workers=workers)
    else:
        report = sweep_spin_boson_gamma(seeds, grid, workers=workers)

    out = Path(args.out or f"{name}.csv")
    write_csv(out, report.columns, report.rows())
    details = report.detail_rows()
    if details:
        detail_path = out.with_name(f"{out.stem}_spectra.csv")
        write_csv(detail_path, report.grid_columns + ["seed"] + SPECTRUM_COLUMNS, details)
        print(f"[OK] Wrote {detail_path}")
    failed = len(report.failed())
    print(f"[OK] Wrote {out} ({len(report.cells)} cells, {failed} failed)")
    return 0


def _add_model_flags(p):
    g = p.add_argument_group("model parameters")
    g.add_argument("--d-E", dest="d_E", type=int, help="Environment dimension (finite)")
    g.add_argument("--d", type=int, help="System dimension (finite, default 2)")
    g.add_argument("--a-unit", dest="a_unit", type=float, help="Hamiltonian scale (finite)")
    g.add_argument("--a-diss", dest="a_diss", type=float, help="Dissipation scale (finite)")
    g.add_argument(
        "--rate-norm",
        dest="rate_norm",
        choices=list(RATE_NORMS),
        help="Scaling of the random rate matrix (finite, default total)",
    )
    g.add_argument(
        "--generator-seed",
        dest="generator_seed",
        type=int,
        help="Seed of the random generator (finite, default --seed)",
    )
    g.add_argument("--gamma", type=float, help="Damping rate (jc, spin-boson)")
    g.add_argument("--g", type=float, help="Coupling strength (jc, spin-boson)")
    g.add_argument(
        "--alpha",
        type=parse_complex,
        help="Coherent amplitude of the mode (jc), e.g. 1.1, 1.1+0.3j or 1.1,0.3",
    )
    g.add_argument("--n-levels", dest="n_levels", type=int, help="Fock truncation (0 = automatic for jc)")
    g.add_argument("--Delta", type=float, help="Tunneling amplitude (spin-boson)")
    g.add_argument("--omega0", type=float, help="Bath resonance frequency (spin-boson)")
    g.add_argument(
        "--check-convergence",
        dest="check_convergence",
        action="store_true",
        default=None,
        help="Re-simulate with twice the pseudomode levels and fail if the trajectory moves (spin-boson)",
    )
    g.add_argument(
        "--convergence-tol",
        dest="convergence_tol",
        type=float,
        help="Trace-distance tolerance of --check-convergence (default 1e-3)",
    )
    g.add_argument("--tau", type=float, help="Time step")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="markov-embedding",
        description="Reconstruct minimal Markovian embeddings of non-Markovian quantum dynamics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=None,
        help="Logging verbosity (default: config logging.level or INFO)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    # init
    p_init = subparsers.add_parser("init", help=f"Create a starter {DEFAULT_CONFIG_NAME}")
    p_init.add_argument("path", nargs="?", help=f"Config path (default: {DEFAULT_CONFIG_NAME})")
    p_init.add_argument("-f", "--force", action="store_true", help="Overwrite an existing file")
    p_init.set_defaults(func=cmd_init)

    # generate
    p_gen = subparsers.add_parser("generate", help="Simulate trajectory datasets")
    p_gen.add_argument("-c", "--config", help="Experiment config (YAML)")
    p_gen.add_argument("--model", choices=["finite", "jc", "spin-boson"], help="Physical model")
    p_gen.add_argument("--L", type=int, help="Number of training trajectories")
    p_gen.add_argument("--T", type=int, help="States per trajectory")
    p_gen.add_argument("--sigma", type=float, help="Noise standard deviation (default 0)")
    p_gen.add_argument("--seed", type=int, help="Random seed")
    p_gen.add_argument("--out", default="train.json", help="Noisy training set")
    p_gen.add_argument("--out-clean", dest="out_clean", default="train_clean.json", help="Clean twin")
    p_gen.add_argument("--out-test", dest="out_test", default="test.json", help="Test trajectory")
    _add_model_flags(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    # fit
    p_fit = subparsers.add_parser("fit", help="Reconstruct the embedding from a dataset")
    p_fit.add_argument("-c", "--config", help="Experiment config (YAML)")
    p_fit.add_argument("--data", required=True, help="Training dataset file")
    p_fit.add_argument("--K", type=int, help="Memory depth")
    p_fit.add_argument("--sigma", type=float, help="Threshold noise level (default: dataset noise_sigma)")
    p_fit.add_argument("--floor", type=float, help="Relative threshold when sigma is 0")
    p_fit.add_argument(
        "--project",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Project predictions onto density matrices",
    )
    p_fit.add_argument("--variant", choices=["projected", "literal"], help="DMD variant")
    p_fit.add_argument("--out-model", dest="out_model", help="Model file to write")
    p_fit.add_argument("--report", help="JSON report to write")
    p_fit.add_argument(
        "--select-K",
        dest="select_K",
        type=int,
        nargs="+",
        help="Candidate memory depths; the best one on --validation is fitted",
    )
    p_fit.add_argument("--validation", help="Noisy test dataset used by --select-K")
    p_fit.set_defaults(func=cmd_fit)

    # predict
    p_pred = subparsers.add_parser("predict", help="Predict test trajectories")
    p_pred.add_argument("--model", required=True, help="Model file")
    p_pred.add_argument("--data", required=True, help="Test dataset file")
    p_pred.add_argument("--horizon", type=int, help="Steps to predict (default: T - K)")
    p_pred.add_argument("--out-csv", dest="out_csv", default="prediction.csv", help="CSV output")
    p_pred.add_argument(
        "--report",
        nargs="?",
        const="",
        default=None,
        help="Write D_test values as JSON (default path: next to the CSV)",
    )
    p_pred.add_argument(
        "--project",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Override the model's projection flag",
    )
    p_pred.set_defaults(func=cmd_predict)

    # denoise
    p_den = subparsers.add_parser("denoise", help="Denoise a dataset by Hankel rank truncation")
    p_den.add_argument("--data", required=True, help="Dataset file")
    p_den.add_argument("--K", type=int, default=75, help="Memory depth")
    p_den.add_argument("--sigma", type=float, help="Noise level (default: dataset noise_sigma)")
    p_den.add_argument("--floor", type=float, default=1e-12, help="Relative threshold when sigma is 0")
    p_den.add_argument("--project", action="store_true", help="Project states onto density matrices")
    p_den.add_argument("--out", required=True, help="Denoised dataset file")
    p_den.set_defaults(func=cmd_denoise)

    # spectrum
    p_spec = subparsers.add_parser("spectrum", help="Compare eigenvalues with exp(tau L)")
    p_spec.add_argument("--model", required=True, help="Model file")
    p_spec.add_argument("--data", required=True, help="Training dataset file (model metadata source)")
    p_spec.add_argument("--out-csv", dest="out_csv", default="spectrum.csv", help="CSV output")
    p_spec.set_defaults(func=cmd_spectrum)

    # sweep
    p_sweep = subparsers.add_parser("sweep", help="Run an experiment sweep")
    p_sweep.add_argument("sweep", choices=["table1", "fig3b", "fig3c", "fig3d", "fig5"])
    p_sweep.add_argument("-c", "--config", help="Experiment config (YAML)")
    p_sweep.add_argument("--seeds", type=int, nargs="+", help="Seeds per grid cell")
    p_sweep.add_argument("--workers", type=int, help="Parallel workers (default 1)")
    p_sweep.add_argument("--out", help="CSV output (default: <sweep>.csv)")
    p_sweep.add_argument("--d-E", dest="d_E", type=int, nargs="+", help="Override the d_E grid")
    p_sweep.add_argument("--sigma", type=float, nargs="+", help="Override the sigma grid")
    p_sweep.add_argument("--T", type=int, nargs="+", help="Override the T grid")
    p_sweep.add_argument("--K", type=int, nargs="+", help="Override the K grid")
    p_sweep.add_argument("--gamma", type=float, nargs="+", help="Override the gamma grid")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    func = getattr(args, "func", None)
    if func is None:
        parser.print_help()
        return 1

    try:
        level = args.log_level
        if level is None and getattr(args, "config", None) and Path(args.config).exists():
            level = load_config(Path(args.config), validate=False).logging.level
        set_log_level(level or "INFO")
        return int(func(args)) or 0
    except (ValueError, OSError) as e:
        return _error(e)


if __name__ == "__main__":
    raise SystemExit(main())
