"""Command-line interface.

Subcommands: ``simulate`` (write a synthetic dataset), ``smooth-eval``
(evaluate one smoother), ``sweep`` (grid sweep over one axis),
``kernel-validate`` (Monte Carlo vs closed-form kernel), ``logit-stats``
(logit concentration across schemes), ``metrics`` (WTE/LSII on label CSVs),
and ``correlate`` (metric-accuracy correlations over a sweep CSV).

Exit codes: 0 on success, 1 on a validation/usage error, 2 on an I/O or
dataset-format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dataio import DatasetError, read_label_csv, save_dataset
from .harness import (
    COMPONENT_BUNDLES,
    SMOOTHERS,
    SweepSpec,
    append_runs_csv,
    correlation_study,
    load_run_config,
    read_sweep_csv,
    run_pipeline,
    run_sweep,
    write_report_json,
    write_sweep_csv,
)
from .initializers import analytic_variance, parse_scheme
from .metrics import lsii, wte
from .montecarlo import (
    centered_unit_sequence,
    dk_sweep_detail,
    logit_concentration,
    monte_carlo_kernel,
)
from .rapk import rapk_coefficients, rapk_kernel
from .seeding import generator, mix_seed
from .sequences import FeatureSequence, StageSequence
from .synthgen import SynthConfig, make_dataset

__all__ = ["main"]


class CliError(Exception):
    """Bad arguments or configuration (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise CliError(message)


_AXIS_NAMES = {
    "window": "window",
    "dk": "d_k",
    "init": "init",
    "heads": "heads_layers",
    "components": "components",
}

_DEFAULT_GRIDS = {
    "window": "5,10,20,35,50",
    "dk": "16,64,256,1024",
    "init": (
        "xavier_uniform,xavier_normal,kaiming_uniform_relu,kaiming_normal_relu,"
        "orthogonal,uniform_0.1,normal_0.02,trunc_normal_0.02"
    ),
    "heads": "1x1,1x4,1x8,2x8",
    "components": ",".join(COMPONENT_BUNDLES),
}

_ENC_FLAGS = (
    "use_attention",
    "use_output_linear",
    "use_ffn",
    "use_layernorm",
    "use_residual",
    "use_positional",
)


def _add_common(parser: _Parser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers")


def _add_run_options(parser: _Parser) -> None:
    _add_common(parser)
    parser.add_argument("--dataset", type=Path, help="dataset directory")
    parser.add_argument("--smoother", choices=SMOOTHERS)
    parser.add_argument("--seed", help="comma-separated run seeds")
    parser.add_argument("--window", type=int, help="smoothing window width")
    parser.add_argument("--dk", type=int, help="total attention width d_k")
    parser.add_argument("--init", help="init scheme label (e.g. xavier_uniform)")
    parser.add_argument("--heads", type=int, help="attention heads per layer")
    parser.add_argument("--layers", type=int, help="encoder layers")
    parser.add_argument("--metric-window", type=int, help="LSII window width")
    parser.add_argument("--integer-median", action="store_true",
                        help="median smoother: integer median instead of mode")
    for flag in _ENC_FLAGS:
        parser.add_argument(
            f"--{flag.replace('_', '-')}", dest=flag,
            action=argparse.BooleanOptionalAction, default=None,
        )


def build_parser() -> _Parser:
    parser = _Parser(prog="rapklab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset directory")
    _add_common(p)
    p.add_argument("--seed", type=int, help="dataset seed")
    p.add_argument("--classes", type=int, help="number of stages")
    p.add_argument("--t-len", type=int, help="epochs per subject")
    p.add_argument("--subjects", type=int, help="number of subjects")
    p.add_argument("--self-prob", type=float, help="Markov stay probability")
    p.add_argument("--feat-dim", type=int, help="feature width")
    p.add_argument("--class-sep", type=float, help="class mean separation")
    p.add_argument("--noise-std", type=float, help="feature noise std")
    p.add_argument("--label-noise", type=float, help="epoch corruption rate")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("smooth-eval", help="evaluate one smoother configuration")
    _add_run_options(p)
    p.set_defaults(func=_cmd_smooth_eval)

    p = sub.add_parser("sweep", help="sweep one axis of the configuration")
    _add_run_options(p)
    p.add_argument("--axis", choices=sorted(_AXIS_NAMES), required=True)
    p.add_argument("--grid", help="comma-separated grid values")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("kernel-validate", help="Monte Carlo vs closed-form kernel")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-len", type=int, default=10)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--sequences", type=int, default=3)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--dk-grid", default="16,64,256,1024")
    p.add_argument("--scheme", default="xavier_uniform")
    p.add_argument("--dump-kernels", action="store_true",
                   help="also write the empirical and closed-form kernels as CSV")
    p.set_defaults(func=_cmd_kernel_validate)

    p = sub.add_parser("logit-stats", help="logit concentration across schemes")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-len", type=int, default=10)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--row-scale", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--dk-grid", default="32,128,512,1024")
    p.add_argument("--schemes", default=_DEFAULT_GRIDS["init"])
    p.set_defaults(func=_cmd_logit_stats)

    p = sub.add_parser("metrics", help="compute WTE/LSII from label CSVs")
    _add_common(p)
    p.add_argument("--labels", type=Path, help="stage CSV for WTE")
    p.add_argument("--none", type=Path, help="unsmoothed predictions CSV (LSII)")
    p.add_argument("--corr", type=Path, help="smoothed predictions CSV (LSII)")
    p.add_argument("--true", dest="true_labels", type=Path,
                   help="ground-truth CSV (optional, defaults to --corr)")
    p.add_argument("--window", type=int, help="LSII window width")
    p.add_argument("--classes", type=int, help="label-space size override")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("correlate", help="metric-accuracy correlations over a sweep CSV")
    _add_common(p)
    p.add_argument("--csv", type=Path, required=True, help="sweep CSV path")
    p.set_defaults(func=_cmd_correlate)

    return parser


def _load_config_file(path: Path | None) -> dict:
    if path is None:
        return {}
    if not path.is_file():
        raise DatasetError(f"config file not found: {path}")
    try:
        entry = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(entry, dict):
        raise CliError(f"{path}: config must be a JSON object")
    return entry


def _ensure_out(args) -> Path:
    if args.out is None:
        raise CliError("this command needs --out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise CliError(f"bad {what}: {text!r}") from None


def _cmd_simulate(args) -> int:
    entry = _load_config_file(args.config).get("synth", {})
    overrides = {
        "seed": args.seed,
        "n_classes": args.classes,
        "t_len": args.t_len,
        "n_subjects": args.subjects,
        "self_prob": args.self_prob,
        "feat_dim": args.feat_dim,
        "class_sep": args.class_sep,
        "noise_std": args.noise_std,
        "label_noise": args.label_noise,
    }
    for key, value in overrides.items():
        if value is not None:
            entry[key] = value
    try:
        cfg = SynthConfig(**entry)
    except TypeError as exc:
        raise CliError(f"bad synth config: {exc}") from None
    out = _ensure_out(args)
    save_dataset(make_dataset(cfg), out)
    print(f"wrote {cfg.n_subjects} subjects x {cfg.t_len} epochs to {out}")
    return 0


def _run_config_from_args(args):
    entry = _load_config_file(args.config)
    enc = dict(entry.get("encoder", {}))
    for attr, key in (("window", "window_w"), ("dk", "d_k"), ("init", "init"),
                      ("heads", "n_heads"), ("layers", "n_layers")):
        value = getattr(args, attr)
        if value is not None:
            enc[key] = value
    for flag in _ENC_FLAGS:
        value = getattr(args, flag)
        if value is not None:
            enc[flag] = value
    if enc:
        entry["encoder"] = enc
    if args.dataset is not None:
        entry.pop("synth", None)
        entry["dataset"] = str(args.dataset)
    if args.smoother is not None:
        entry["smoother"] = args.smoother
    if args.metric_window is not None:
        entry["metric_window"] = args.metric_window
    if args.integer_median:
        entry["integer_median"] = True
    if args.seed is not None:
        entry["seeds"] = _parse_int_list(str(args.seed), "--seed list")
    return load_run_config(entry)


def _cmd_smooth_eval(args) -> int:
    cfg = _run_config_from_args(args)
    result = run_pipeline(cfg, jobs=args.jobs)
    agg = result.aggregate
    lsii_text = "n/a" if agg["mean_lsii"] is None else f"{agg['mean_lsii']:.4f}"
    print(
        f"{cfg.smoother}: acc {agg['mean_accuracy']:.4f} +/- {agg['std_accuracy']:.4f}  "
        f"wf1 {agg['mean_weighted_f1']:.4f}  wte {agg['mean_wte']:.4f}  lsii {lsii_text}"
    )
    if args.out is not None:
        out = _ensure_out(args)
        write_report_json(result, out / "report.json")
        append_runs_csv(result, out / "runs.csv")
        print(f"wrote {out / 'report.json'}")
    return 0


def _cmd_sweep(args) -> int:
    base = _run_config_from_args(args)
    axis = _AXIS_NAMES[args.axis]
    grid_text = args.grid if args.grid is not None else _DEFAULT_GRIDS[args.axis]
    values = [part for part in grid_text.split(",") if part != ""]
    if args.axis in ("window", "dk"):
        grid = tuple(_parse_int_list(grid_text, f"--grid for {args.axis}"))
    else:
        grid = tuple(values)
    spec = SweepSpec(axis=axis, grid=grid, base=base)
    rows = run_sweep(spec, jobs=args.jobs)
    out = _ensure_out(args)
    path = out / "sweep.csv"
    write_sweep_csv(rows, path)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _cmd_kernel_validate(args) -> int:
    grid = _parse_int_list(args.dk_grid, "--dk-grid")
    scheme = parse_scheme(args.scheme)
    if args.sequences < 1:
        raise CliError("--sequences must be >= 1")
    x_set = [
        centered_unit_sequence(args.t_len, args.dim, mix_seed(args.seed, i))
        for i in range(args.sequences)
    ]
    report, blocks = dk_sweep_detail(x_set, scheme, grid, args.trials, args.seed)
    out = _ensure_out(args)
    payload = asdict(report)
    payload["scheme"] = args.scheme
    (out / "kernel_validation.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    with (out / "kernel_validation.csv").open("w", newline="") as fh:
        fh.write("d_k,trial_block,mse,pearson\n")
        for d_k, block, mse, pearson in blocks:
            fh.write(f"{d_k},{block},{mse!r},{pearson!r}\n")
    if args.dump_kernels:
        for di, d_k in enumerate(report.d_k_grid):
            for si, x in enumerate(x_set):
                var = analytic_variance(scheme, x.dim, d_k)
                emp = monte_carlo_kernel(x, scheme, d_k, args.trials, mix_seed(args.seed, di, si))
                theory = rapk_kernel(x, *rapk_coefficients(x, d_k, var, var, var))
                np.savetxt(out / f"kernel_emp_dk{d_k}_seq{si}.csv", emp, delimiter=",")
                np.savetxt(out / f"kernel_theory_dk{d_k}_seq{si}.csv", theory, delimiter=",")
    for d_k, mse, pearson in zip(report.d_k_grid, report.mse_per_dk, report.pearson_per_dk):
        print(f"d_k={d_k}: mse {mse:.3e}  pearson {pearson:.4f}")
    return 0


def _cmd_logit_stats(args) -> int:
    grid = _parse_int_list(args.dk_grid, "--dk-grid")
    labels = [part for part in args.schemes.split(",") if part != ""]
    rng = generator(args.seed, 0xDD)
    x = FeatureSequence(args.row_scale * rng.standard_normal((args.t_len, args.dim)))
    rows = []
    for label in labels:
        scheme = parse_scheme(label)
        for d_k in grid:
            for with_ln in (False, True):
                rep = logit_concentration(x, scheme, d_k, with_ln, args.trials,
                                          mix_seed(args.seed, d_k, int(with_ln)))
                rows.append(asdict(rep))
    out = _ensure_out(args)
    (out / "logit_stats.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    with (out / "logit_stats.csv").open("w", newline="") as fh:
        fh.write("scheme,d_k,with_layernorm,empirical_mean,empirical_std,"
                 "analytic_std,frac_within_eps,trials\n")
        for r in rows:
            fh.write(
                f"{r['scheme_label']},{r['d_k']},{r['with_layernorm']},"
                f"{r['empirical_mean']!r},{r['empirical_std']!r},"
                f"{r['analytic_std']!r},{r['frac_within_eps']!r},{r['trials']}\n"
            )
    print(f"wrote {len(rows)} rows to {out / 'logit_stats.csv'}")
    return 0


def _stage_sequence_from(path: Path, n_classes: int | None) -> StageSequence:
    labels = read_label_csv(path)
    c = n_classes if n_classes is not None else int(labels.max()) + 1
    return StageSequence(labels, c)


def _cmd_metrics(args) -> int:
    out: dict = {}
    if args.labels is not None:
        seq = _stage_sequence_from(args.labels, args.classes)
        out["wte"] = wte(seq)
    if (args.none is None) != (args.corr is None):
        raise CliError("LSII needs both --none and --corr")
    if args.none is not None:
        if args.window is None:
            raise CliError("LSII needs --window")
        c = args.classes
        if c is None:
            peak = max(int(read_label_csv(p).max()) for p in (args.none, args.corr))
            if args.true_labels is not None:
                peak = max(peak, int(read_label_csv(args.true_labels).max()))
            c = peak + 1
        none_seq = _stage_sequence_from(args.none, c)
        corr_seq = _stage_sequence_from(args.corr, c)
        true_seq = (
            _stage_sequence_from(args.true_labels, c)
            if args.true_labels is not None
            else corr_seq
        )
        out["lsii"] = lsii(none_seq, corr_seq, true_seq, args.window)
    if not out:
        raise CliError("nothing to compute: pass --labels and/or --none/--corr")
    text = json.dumps(out, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        out_dir = _ensure_out(args)
        (out_dir / "metrics.json").write_text(text + "\n")
    return 0


def _cmd_correlate(args) -> int:
    rows = read_sweep_csv(args.csv)
    r_lsii, r_wte = correlation_study(rows)
    print(json.dumps({"r_lsii_acc": r_lsii, "r_wte_acc": r_wte}, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
