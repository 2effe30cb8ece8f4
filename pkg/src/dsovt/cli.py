"""``dsovt`` command line.

Every subcommand reads a manifest, applies ``--set`` overrides and flag
overrides, resolves the seed (flag, then DSOVT_SEED, then manifest) and
writes ``manifest.resolved.toml`` next to its outputs.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from dsovt import pipeline as P
from dsovt.data import write_tensor
from dsovt.errors import DsovtError, ManifestError, ValidationError
from dsovt.experiments import multistep_suite, rolling_runs_ced, rolling_runs_convlstm
from dsovt.forecast import (evaluate_suite, kriging2d_predictor, kriging3d_predictor, rolling_table,
                            write_rolling)
from dsovt.manifest import ExperimentManifest, load_manifest
from dsovt.models import load_model, save_model
from dsovt.sensors import tessellate_series, write_sensors
from dsovt.swe import generate_dataset
from dsovt.training import train_convlstm

log = logging.getLogger("dsovt")

EXIT_RUNTIME, EXIT_USAGE, EXIT_VALIDATION = 1, 2, 3
RESOLVED = "manifest.resolved.toml"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: usage: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _common(p):
    p.add_argument("--manifest", required=True, help="experiment manifest (TOML)")
    p.add_argument("--seed", type=int, help="overrides DSOVT_SEED and the manifest seed")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a manifest value, e.g. training_spec.epochs=5 (repeatable)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _training_flags(p, energy=False):
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    if energy:
        p.add_argument("--lambda-energy", type=float)


def build_parser():
    parser = _Parser(prog="dsovt", description="Sparse-sensor field forecasting pipeline")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate shallow-water simulations")
    _common(p)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sensors", help="sample sensor observations")
    _common(p)
    p.add_argument("--sensors-out", help="directory for the sensor text files (default: --out)")
    _common(sub.add_parser("tessellate", help="rasterize sensors into Voronoi fields"))

    p = sub.add_parser("train-ced", help="train the convolutional encoder-decoder")
    _common(p)
    _training_flags(p)

    p = sub.add_parser("train-ced-lstm", help="train the latent LSTM on a trained CED")
    _common(p)
    _training_flags(p, energy=True)
    p.add_argument("--ced", help="CED model file (default: evaluate.ced in the manifest)")

    p = sub.add_parser("train-convlstm", help="train the ConvLSTM")
    _common(p)
    _training_flags(p, energy=True)
    p.add_argument("--n-init", type=int)

    p = sub.add_parser("forecast", help="rolling forecast on one test simulation")
    _common(p)
    p.add_argument("--family", choices=("ced_lstm", "convlstm"), required=True)
    p.add_argument("--sim", type=int, default=0, help="index into the test split")
    p.add_argument("--start", type=int)
    p.add_argument("--iterations", type=int)

    p = sub.add_parser("evaluate", help="compare all methods on the test split")
    _common(p)
    p.add_argument("--no-kriging3d", action="store_true", help="skip the slow space-time baseline")

    p = sub.add_parser("baseline", help="score a Kriging baseline on the test split")
    p.add_argument("kind", choices=("kriging2d", "kriging3d"))
    _common(p)
    p.add_argument("--nlags", type=int)
    return parser


# --- manifest resolution -------------------------------------------------------------------

def resolve_manifest(args):
    manifest = load_manifest(args.manifest, check_paths=False)
    overrides = list(args.overrides)
    family = {"train-ced": "ced", "train-ced-lstm": "lstm", "train-convlstm": "convlstm"}.get(args.command)
    flag_keys = {"epochs": "epochs", "lr": "learning_rate", "batch": "batch_size"}
    for flag, key in flag_keys.items():
        value = getattr(args, flag, None)
        if value is not None and family:
            overrides.append(f"training_spec.{family}.{key}={value!r}")
    if getattr(args, "lambda_energy", None) is not None:
        overrides.append(f"training_spec.lambda_energy={args.lambda_energy!r}")
    if getattr(args, "n_init", None) is not None:
        overrides.append(f"training_spec.n_init={args.n_init}")
    if getattr(args, "nlags", None) is not None:
        key = "nlags" if args.kind == "kriging2d" else "nlags_3d"
        overrides.append(f"evaluate.{key}={args.nlags}")
    if overrides:
        manifest = manifest.with_overrides(overrides)
    manifest.seed = resolve_seed(args.seed, manifest.seed)
    # absolute dataset paths keep the resolved copy valid from any directory
    manifest.dataset_paths = [str(manifest.resolve(p).resolve()) for p in manifest.dataset_paths]
    manifest.validate(check_paths=args.command != "simulate")
    return manifest


def resolve_seed(flag, manifest_seed):
    if flag is not None:
        return int(flag)
    env = os.environ.get("DSOVT_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError as exc:
            raise ValidationError(f"DSOVT_SEED must be an integer, got {env!r}") from exc
    if manifest_seed is not None:
        return int(manifest_seed)
    raise ManifestError("no seed: pass --seed, set DSOVT_SEED or add seed to the manifest")


def _out(args, manifest):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest.save(out / RESOLVED)
    return out


def _require(section, key, where):
    value = section.get(key)
    if value in (None, ""):
        raise ManifestError(f"missing required key {where}.{key}")
    return value


# --- commands -----------------------------------------------------------------------------

def cmd_simulate(args, manifest):
    out = _out(args, manifest)
    split = manifest.split or {"train_count": 30, "test_count": 10}
    generated = generate_dataset(out, int(split["train_count"]), int(split["test_count"]),
                                 manifest.seed, manifest.solver_params, workers=args.workers)
    d = manifest.to_dict()
    d.update(dataset_paths=generated.dataset_paths, simulations=generated.simulations,
             solver_params=generated.solver_params, split=generated.split)
    ExperimentManifest.from_dict(d, base_dir=out).save(out / "manifest.toml")
    print(out / "manifest.toml")


def cmd_sensors(args, manifest):
    out = _out(args, manifest)
    data = P.prepare_data(manifest)
    target = Path(args.sensors_out) if args.sensors_out else out
    target.mkdir(parents=True, exist_ok=True)
    for sim in data.train + data.test:
        write_sensors(target / f"{Path(sim.name).stem}.sensors.txt", sim.sensors)
    print(target)


def cmd_tessellate(args, manifest):
    out = _out(args, manifest)
    data = P.prepare_data(manifest)
    for sim in data.train + data.test:
        nx, ny = sim.truth.shape[1:3]
        write_tensor(out / f"{Path(sim.name).stem}.tess.dsvt", tessellate_series(sim.sensors, nx, ny))
    print(out)


def cmd_train_ced(args, manifest):
    out = _out(args, manifest)
    data = P.prepare_data(manifest)
    bundle, report = P.fit_ced(manifest, data)
    save_model(bundle, out / "ced.dsvm")
    report.write_csv(out / "ced_report.csv")
    print(out / "ced.dsvm")


def _load_ced(path):
    return load_model(path, expect_kind="ced")


def cmd_train_ced_lstm(args, manifest):
    ced_path = args.ced or _require(manifest.evaluate, "ced", "evaluate")
    out = _out(args, manifest)
    data = P.prepare_data(manifest)
    ced = _load_ced(ced_path)
    physics = float(manifest.training_spec["lambda_energy"]) > 0
    bundle, report = P.fit_ced_lstm(manifest, data, ced, physics=physics)
    save_model(bundle, out / "lstm.dsvm")
    report.write_csv(out / "lstm_report.csv")
    print(out / "lstm.dsvm")


def cmd_train_convlstm(args, manifest):
    out = _out(args, manifest)
    data = P.prepare_data(manifest)
    physics = float(manifest.training_spec["lambda_energy"]) > 0
    cfg = P.train_config(manifest, "convlstm", manifest.seed, physics=physics)
    bundle, report = train_convlstm(
        [s.tess_norm for s in data.train], [s.truth_norm for s in data.train],
        P.convlstm_spec(manifest, data.shape), cfg, stats=data.stats,
        truth_phys=[s.truth for s in data.train], mask=None if data.mask.all() else data.mask)
    save_model(bundle, out / "convlstm.dsvm")
    report.write_csv(out / "convlstm_report.csv")
    print(out / "convlstm.dsvm")


def cmd_forecast(args, manifest):
    ev = manifest.evaluate
    if args.family == "ced_lstm":
        ced = _load_ced(_require(ev, "ced", "evaluate"))
        lstm = load_model(_require(ev, "lstm", "evaluate"), expect_kind="lstm")
    else:
        model = load_model(_require(ev, "convlstm", "evaluate"), expect_kind="convlstm")
    out = _out(args, manifest)
    data = P.prepare_data(manifest)
    if not 0 <= args.sim < len(data.test):
        raise ValidationError(f"--sim {args.sim} outside the {len(data.test)} test simulations")
    sims = [data.test[args.sim]]
    start = args.start if args.start is not None else int(ev.get("rolling_start", 75))
    iters = args.iterations if args.iterations is not None else int(ev.get("rolling_iterations", 20))
    mask = None if data.mask.all() else data.mask
    if args.family == "ced_lstm":
        runs = rolling_runs_ced(ced, lstm, sims, start, iters, mask)
    else:
        runs = rolling_runs_convlstm(model, sims, start, iters, mask)
    write_tensor(out / "rolling_pred.dsvt", np.concatenate(runs[0].windows))
    write_rolling(out / "rolling.csv", rolling_table({args.family: runs}))
    print(out / "rolling.csv")


def cmd_evaluate(args, manifest):
    ev = manifest.evaluate
    paths = {k: _require(ev, k, "evaluate") for k in ("ced", "lstm", "convlstm")}
    ced = _load_ced(paths["ced"])
    lstm = load_model(paths["lstm"], expect_kind="lstm")
    conv = load_model(paths["convlstm"], expect_kind="convlstm")
    out = _out(args, manifest)
    data = P.prepare_data(manifest)
    start, iters = int(ev.get("rolling_start", 75)), int(ev.get("rolling_iterations", 20))
    mask = None if data.mask.all() else data.mask
    rolling = {"ced_lstm": rolling_runs_ced(ced, lstm, data.test, start, iters, mask),
               "convlstm": rolling_runs_convlstm(conv, data.test, start, iters, mask)}
    multistep_suite(manifest, data, ced, lstm, conv, out, rolling, kriging3d=not args.no_kriging3d)
    print(out / "metrics.csv")


def cmd_baseline(args, manifest):
    out = _out(args, manifest)
    data = P.prepare_data(manifest)
    ev, t = manifest.evaluate, manifest.training_spec
    s_in, s_out = int(t["s_in"]), int(t["s_out"])
    if args.kind == "kriging2d":
        pred = kriging2d_predictor(data.stats, s_in, s_out, int(ev.get("nlags", 20)))
    else:
        pred = kriging3d_predictor(data.stats, s_in, s_out, int(ev.get("nlags_3d", 5)))
    evaluate_suite(data.test, [pred], s_in, s_out, int(ev.get("window_stride", 25)),
                   None if data.mask.all() else data.mask, out)
    print(out / "metrics.csv")


COMMANDS = {
    "simulate": cmd_simulate, "sensors": cmd_sensors, "tessellate": cmd_tessellate,
    "train-ced": cmd_train_ced, "train-ced-lstm": cmd_train_ced_lstm,
    "train-convlstm": cmd_train_convlstm, "forecast": cmd_forecast, "evaluate": cmd_evaluate,
    "baseline": cmd_baseline,
}


def run(argv=None):
    """Run one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = resolve_manifest(args)
        COMMANDS[args.command](args, manifest)
    except ValidationError as exc:
        _fail(exc.code, exc)
        return EXIT_VALIDATION
    except DsovtError as exc:
        _fail(exc.code, exc)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        _fail("load", exc)
        return EXIT_RUNTIME
    except (OSError, RuntimeError, ValueError) as exc:
        _fail("runtime", exc)
        return EXIT_RUNTIME
    return 0


def _fail(code, exc):
    msg = " ".join(str(exc).split())
    sys.stderr.write(f"error: {code}: {msg}\n")


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
