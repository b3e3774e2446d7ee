"""Command-line front end.

Subcommands::

    optimize-thresholds   Fisher-optimal 1-bit threshold and sensor ratio
    simulate-roc          Monte Carlo ROC curves (presets fig1, fig2)
    check-asymptotics     null/alternative moments and KS diagnostics
    equivalence           cLMPT with Qc sensors vs Im-1-bit with ratio*Qc

Config files are flat ``key = value`` text, lists comma-separated. Every run
writes its resolved config next to its CSV; passing that file back through
``--config`` reproduces the CSV bit for bit.

Exit status: 0 on success, 2 on usage or config errors, 1 on runtime failure.
"""

import argparse
import dataclasses
import math
import os
import sys
from pathlib import Path

from . import experiments as ex
from .fisher_opt import CLMPT, IM1BIT, PsoConfig, fi_factor, optimize_threshold, sensor_equivalence
from .quantizers import DIRECT, LR, QuantizerBank

FORMAT_VERSION = 1
FAST_TRIALS = 4000
WIDE_STDERR_TRIALS = 1000

_FIELDS = {f.name: f for f in dataclasses.fields(ex.ExperimentConfig)}
_INT_KEYS = {"n_sensors", "dim", "trials_h0", "trials_h1", "seed"}
_FLOAT_KEYS = {"noise_var", "sparsity", "nonzero_var", "tau", "zeta"}
_LIST_KEYS = {"detectors", "pfa_grid"}

PRESETS = {
    "fig1": dict(n_sensors=300, dim=1000, noise_var=1.0, sparsity=0.05, nonzero_var=8.0,
                 detectors=(IM1BIT, "onebit")),
    # detectors are filled in from --qc and the runtime equivalence ratio
    "fig2": dict(dim=1000, noise_var=1.0, sparsity=0.05, nonzero_var=8.0),
}


class UsageError(Exception):
    pass


def read_config(path):
    """Parse a ``key = value`` file into a dict of strings."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    cfg = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        cfg[key.strip()] = value.strip()
    return cfg


def write_config(values, path):
    with open(path, "w") as fh:
        for key, value in values.items():
            if isinstance(value, (list, tuple)):
                value = ",".join(_text(v) for v in value)
            fh.write(f"{key} = {_text(value)}\n")
    return path


def _text(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return "none" if v is None else str(v)


def _coerce(key, value):
    if isinstance(value, str):
        value = value.strip()
        if value.lower() == "none":
            return None
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _LIST_KEYS:
            items = value.split(",") if isinstance(value, str) else value
            items = [i.strip() if isinstance(i, str) else i for i in items]
            return tuple(float(i) for i in items if i != "") if key == "pfa_grid" else tuple(i for i in items if i)
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc
    return value


def config_to_dict(config):
    out = {"format_version": FORMAT_VERSION}
    out.update(dataclasses.asdict(config))
    return out


def build_config(args, extra_keys=()):
    """Merge preset, config file and flags (later wins) into an ExperimentConfig."""
    values = {}
    if getattr(args, "preset", None):
        values.update(PRESETS[args.preset])
    if getattr(args, "config", None):
        raw = read_config(args.config)
        version = int(raw.pop("format_version", FORMAT_VERSION))
        if version != FORMAT_VERSION:
            raise UsageError(f"unsupported format_version {version}")
        for key in extra_keys:
            if key in raw and getattr(args, key, None) is None:
                setattr(args, key, _coerce_extra(key, raw[key]))
            raw.pop(key, None)
        unknown = set(raw) - set(_FIELDS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: _coerce(k, v) for k, v in raw.items()})
    for key in ("n_sensors", "dim", "noise_var", "sparsity", "nonzero_var", "generator", "seed", "tau", "zeta"):
        if getattr(args, key, None) is not None:
            values[key] = _coerce(key, getattr(args, key))
    if getattr(args, "detectors", None):
        values["detectors"] = _coerce("detectors", args.detectors)
    if getattr(args, "pfa_grid", None):
        values["pfa_grid"] = _coerce("pfa_grid", args.pfa_grid)
    if getattr(args, "trials", None) is not None:
        values["trials_h0"] = values["trials_h1"] = args.trials
    elif getattr(args, "fast", False):
        values["trials_h0"] = values["trials_h1"] = FAST_TRIALS
    try:
        return ex.ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _coerce_extra(key, value):
    if key == "qc":
        return int(value)
    if key == "ratio":
        return None if value.lower() == "none" else float(value)
    return value


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _warn_trials(config):
    if min(config.trials_h0, config.trials_h1) < WIDE_STDERR_TRIALS:
        print(
            f"warning: only {min(config.trials_h0, config.trials_h1)} trials; "
            "P_d standard errors will be wide",
            file=sys.stderr,
        )


def _fig2_config(config, qc, ratio):
    if ratio is None:
        ratio = sensor_equivalence(CLMPT, IM1BIT)
    q_im = max(1, int(round(ratio * qc)))
    return dataclasses.replace(config, n_sensors=max(qc, q_im), detectors=(f"{CLMPT}:{qc}", f"{IM1BIT}:{q_im}"))


def cmd_optimize_thresholds(args):
    if not (math.isfinite(args.sigma_w) and args.sigma_w > 0):
        raise UsageError("--sigma-w must be positive")
    kind = {"lr": LR, "im1bit": LR, "direct": DIRECT, "onebit": DIRECT}[args.kind]
    res = optimize_threshold(kind, args.sigma_w, PsoConfig(seed=args.seed or 0))
    factor = res.max_value / 4.0
    ratio = fi_factor(CLMPT) / factor
    bank = QuantizerBank.broadcast(kind, res.argmax, args.n_sensors)
    out = _out_dir(args)
    bank_path = out / f"bank_{kind}.txt"
    write_config({"format_version": FORMAT_VERSION, "sigma_w": args.sigma_w, **bank.to_config()}, bank_path)
    print(f"kind            {kind}")
    print(f"argmax          {res.argmax:.6f}")
    print(f"argmax/sigma_w  {res.argmax / args.sigma_w:.6f}")
    print(f"objective       {res.max_value:.6f}")
    print(f"fi_factor       {factor:.6f}")
    print(f"ratio_vs_clmpt  {ratio:.6f}")
    print(f"converged_runs  {res.converged_runs}")
    print(f"spread          {res.spread:.3g}")
    print(f"bank            {bank_path}")
    return 0


def _write_run(out, stem, config, extra=None):
    values = config_to_dict(config)
    if extra:
        values.update(extra)
    write_config(values, out / f"{stem}.config")


def cmd_simulate_roc(args):
    if not args.preset and not args.config:
        raise UsageError("simulate-roc needs --preset or --config")
    config = build_config(args)
    if args.preset == "fig2":
        config = _fig2_config(config, args.qc or 100, args.ratio)
    _warn_trials(config)
    out = _out_dir(args)
    curves = ex.run_roc(config, workers=args.workers)
    path = ex.emit_roc_csv(curves, out / "roc.csv")
    _write_run(out, "roc", config)
    print(f"wrote {path}")
    return 0


def cmd_check_asymptotics(args):
    config = build_config(args)
    _warn_trials(config)
    out = _out_dir(args)
    records = ex.run_normality(config, args.detector, workers=args.workers)
    path = ex.emit_normality_csv(records, out / "normality.csv")
    _write_run(out, "normality", config)
    for r in records:
        print(f"{r.detector:12s} {r.hypothesis}  mean={r.mean:+.4f} var={r.variance:.4f} "
              f"ks={r.ks_stat:.4f} pass={r.ks_pass_1pct} mu={r.theoretical_mean:.4f}")
    print(f"wrote {path}")
    return 0


def cmd_equivalence(args):
    base = build_config(args, extra_keys=("qc", "ratio"))
    qc = args.qc or 100
    _warn_trials(base)
    out = _out_dir(args)
    result = ex.run_equivalence(base, qc, ratio=args.ratio, workers=args.workers)
    path = ex.emit_equivalence_csv(result, out / "equivalence.csv")
    _write_run(out, "equivalence", base, {"qc": qc, "ratio": args.ratio})
    print(f"Q_c = {qc}, Q_Im-1-bit = {result.q_quantized} (ratio {result.ratio:.4f})")
    print(f"max |dP_d| = {result.max_abs_pd_gap:.4f}")
    print(f"wrote {path}")
    return 0


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _common(p):
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--fast", action="store_true", help=f"use {FAST_TRIALS} trials per hypothesis")


def _experiment_flags(p):
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--trials", type=_positive_int, help="trials per hypothesis")
    p.add_argument("--pfa-grid", dest="pfa_grid", help="comma-separated nominal P_fa values")
    p.add_argument("--detectors", help="comma-separated kind[:Q] list")
    p.add_argument("--n-sensors", dest="n_sensors", type=_positive_int)
    p.add_argument("--dim", type=_positive_int)
    p.add_argument("--noise-var", dest="noise_var", type=float)
    p.add_argument("--sparsity", type=float)
    p.add_argument("--nonzero-var", dest="nonzero_var", type=float)
    p.add_argument("--generator", choices=["exact", "asymptotic"])
    p.add_argument("--tau", type=float)
    p.add_argument("--zeta", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="sparse-lmpt", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize-thresholds", help="Fisher-optimal 1-bit quantizer threshold")
    p.add_argument("--kind", choices=["lr", "direct", "im1bit", "onebit"], default="lr")
    p.add_argument("--sigma-w", dest="sigma_w", type=float, default=1.0)
    p.add_argument("--n-sensors", dest="n_sensors", type=_positive_int, default=300)
    _common(p)
    p.set_defaults(func=cmd_optimize_thresholds)

    p = sub.add_parser("simulate-roc", help="Monte Carlo ROC curves")
    _experiment_flags(p)
    p.add_argument("--qc", type=_positive_int, help="cLMPT sensor count for the fig2 preset")
    p.add_argument("--ratio", type=float, help="override the Im-1-bit/cLMPT sensor ratio (fig2)")
    _common(p)
    p.set_defaults(func=cmd_simulate_roc)

    p = sub.add_parser("check-asymptotics", help="normality diagnostics of the statistics")
    _experiment_flags(p)
    p.add_argument("--detector", help="restrict to one detector id")
    _common(p)
    p.set_defaults(func=cmd_check_asymptotics)

    p = sub.add_parser("equivalence", help="cLMPT vs Im-1-bit sensor-count equivalence")
    _experiment_flags(p)
    p.add_argument("--qc", type=_positive_int)
    p.add_argument("--ratio", type=float)
    _common(p)
    p.set_defaults(func=cmd_equivalence)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
