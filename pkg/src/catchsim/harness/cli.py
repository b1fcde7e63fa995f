"""Command line entry point: ``catchsim <command> [options]``.

Exit status is 0 on success, 2 when a ``--check`` (or the built-in TOF band
check) fails, and 1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ..models import (InterceptorRegressor, LocalizerRegressor, Split, augment_trajectories, gen_localizer_splits,
                      gen_trajectory_splits, load_localizer_dataset, load_trajectory_dataset, save_localizer_dataset,
                      save_trajectory_dataset)
from ..nn import WeightsFormatError
from ..sensors import write_detections_csv
from .config import ConfigError, PipelineConfig, parse_pipeline
from .episode import MissingWeightsError, load_localizer, load_models, run_episode
from .experiment import Metrics, _g, run_experiment
from .gradchecks import run_gradchecks
from .studies import ALL_PIPELINES, blur_study, blur_to_csv, compare_pipelines, metrics_to_csv, tof_report, tof_to_csv

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2

log = logging.getLogger("catchsim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, throws: int | None = None, pipeline: bool = False):
    p.add_argument("--config", type=Path, help="JSON pipeline configuration")
    p.add_argument("--seed", type=int, default=None, help="base seed (overrides the config)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--localizer-weights", type=Path, help="PGNN file for the CNN localizer")
    p.add_argument("--interceptor-weights", type=Path, help="PGNN file for the CNN interception predictor")
    if throws is not None:
        p.add_argument("--throws", type=int, default=throws, help="number of throws")
    if pipeline:
        p.add_argument("--pipeline", help="<color|cnn>+<ballistic|cnn>")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="catchsim", description="Simulated object catching with camera, radar and small CNNs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="one episode with full traces")
    _common(p, pipeline=True)
    p.add_argument("--episode", type=int, default=0, help="episode index within the seed")

    p = sub.add_parser("gen-localizer-data", help="rendered frames with true positions")
    _common(p)
    p.add_argument("--scale", type=float, default=1.0, help="fraction of the 5437/376/483 split sizes")

    p = sub.add_parser("gen-trajectory-data", help="simulated detection sequences with crossing labels")
    _common(p)
    p.add_argument("--splits", type=int, nargs=3, default=(379, 40, 40), metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--label-source", choices=("truth", "baseline"), default="truth")

    for name, what in (("train-localizer", "localizer"), ("train-interceptor", "interceptor")):
        p = sub.add_parser(name, help=f"train the {what} network")
        _common(p)
        p.add_argument("--data", type=Path, help="dataset directory (generated when omitted)")
        p.add_argument("--epochs", type=int, default=200)
        p.add_argument("--lr", type=float, default=1e-4)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--check", action="store_true", help="exit 2 if the held-out error misses its bound")
        if what == "localizer":
            p.add_argument("--scale", type=float, default=1.0, help="dataset scale when generating")
        else:
            p.add_argument("--augment", type=int, default=5, help="augmentation factor")
            p.add_argument("--shift", type=float, default=0.4, help="augmentation shift range (m)")
            p.add_argument("--splits", type=int, nargs=3, default=(379, 40, 40), metavar=("TRAIN", "VAL", "TEST"))

    p = sub.add_parser("eval", help="Monte Carlo catch experiment")
    _common(p, throws=20, pipeline=True)
    p.add_argument("--check-rate", type=float, help="exit 2 if the catch rate is below this")

    p = sub.add_parser("compare", help="all four pipelines on paired throws")
    _common(p, throws=300)
    p.add_argument("--check", action="store_true", help="exit 2 unless CNN prediction beats ballistic by 10 points "
                                                        "and cnn+cnn catches at least 60%%")

    p = sub.add_parser("tof", help="time-of-flight table per distance")
    _common(p, throws=200)
    p.add_argument("--distances", type=float, nargs="+", default=(5.12, 6.70))

    p = sub.add_parser("blur-study", help="localization error versus motion blur")
    _common(p)
    p.add_argument("--blur", type=int, nargs="+", default=(0, 10, 20))
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--check", action="store_true", help="exit 2 unless the CNN is more blur-resilient")

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    _common(p)
    p.add_argument("--tolerance", type=float, default=1e-4)
    return parser


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    d = cfg.to_dict()
    if args.seed is not None:
        d["seed"] = args.seed
    if getattr(args, "pipeline", None):
        d["localizer"], d["predictor"] = parse_pipeline(args.pipeline)
    if args.localizer_weights:
        d["localizer_weights"] = str(args.localizer_weights)
    if args.interceptor_weights:
        d["interceptor_weights"] = str(args.interceptor_weights)
    return PipelineConfig.from_dict(d)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode())


def _json(path: Path, obj):
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _losses_csv(train_loss, val_loss) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("epoch", "train_loss", "val_loss"))
    for i, tl in enumerate(train_loss):
        w.writerow([i + 1, _g(tl), _g(val_loss[i]) if i < len(val_loss) else ""])
    return buf.getvalue()


def cmd_simulate(args, cfg):
    res = run_episode(cfg, cfg.seed, seed_index=args.episode, keep_trace=True)
    out = args.out
    _write(out / "trace.csv", res.trace.to_csv())
    out.mkdir(parents=True, exist_ok=True)
    write_detections_csv(out / "detections.csv", res.detections)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "trigger_t", "n_points", "x", "y", "t_cross", "source"))
    for p in res.history:
        tc = "" if p.point.t_cross is None else _g(p.point.t_cross)
        w.writerow([_g(p.t), _g(p.trigger_t), p.n_points, _g(p.point.x), _g(p.point.y), tc, p.point.source.value])
    _write(out / "predictions.csv", buf.getvalue())
    o = res.outcome
    summary = {"pipeline": cfg.pipeline, "seed": cfg.seed, "episode": args.episode, "success": bool(o.success),
               "miss_distance": float(_g(o.miss_distance)), "tof": float(_g(res.tof)),
               "distance": res.distance, "travel": float(_g(res.travel)), "n_camera": res.n_camera,
               "n_radar": res.n_radar, "n_predictions": len(res.history), "config": cfg.to_dict()}
    _json(out / "summary.json", summary)
    print(f"{cfg.pipeline}: {'caught' if o.success else 'missed'} miss={o.miss_distance:.4f} m tof={res.tof:.3f} s")
    return EXIT_OK


def cmd_gen_localizer(args, cfg):
    splits = gen_localizer_splits(args.scale, seed=cfg.seed, profile=cfg.profile(), suite=cfg.sensor_suite(),
                                  dist=cfg.throw_distribution(), n_jobs=args.jobs)
    save_localizer_dataset(args.out, splits)
    print(" ".join(f"{s.value}={len(d)}" for s, d in splits.items()), f"-> {args.out}")
    return EXIT_OK


def _trajectory_splits(args, cfg, label_source="truth"):
    sizes = dict(zip((Split.TRAIN, Split.VAL, Split.TEST), args.splits))
    return gen_trajectory_splits(sizes, cfg.profile(), cfg.seed, dist=cfg.throw_distribution(),
                                 suite=cfg.sensor_suite(), label_source=label_source, z_plane=cfg.z_plane,
                                 gravity=cfg.gravity, n_jobs=args.jobs)


def cmd_gen_trajectory(args, cfg):
    splits = _trajectory_splits(args, cfg, args.label_source)
    save_trajectory_dataset(args.out, splits)
    print(" ".join(f"{s.value}={len(d)}" for s, d in splits.items()), f"-> {args.out}")
    return EXIT_OK


def interceptor_rmse(est, dataset) -> np.ndarray:
    """Per-axis RMSE over full 10-detection windows of a held-out split."""
    X, y = dataset.snapshots(full_only=True)
    err = est.predict(X) - y
    return np.sqrt(np.mean(err ** 2, axis=0))


def cmd_train_interceptor(args, cfg):
    splits = load_trajectory_dataset(args.data) if args.data else _trajectory_splits(args, cfg)
    train = augment_trajectories(splits[Split.TRAIN], args.augment, args.shift, seed=cfg.seed)
    X, y = train.snapshots()
    val = splits.get(Split.VAL)
    Xv, yv = val.snapshots() if val is not None else (None, None)
    est = InterceptorRegressor(epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, random_state=cfg.seed,
                               log_every=10 if args.verbose else 0)
    est.fit(X, y, Xv, yv)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    est.save(out / "interceptor.pgnn")
    _write(out / "losses.csv", _losses_csv(est.loss_curve_, est.val_loss_curve_))
    test = splits.get(Split.TEST)
    rmse = interceptor_rmse(est, test) if test is not None else None
    summary = {"n_train_trajectories": len(train), "n_snapshots": len(X), "epochs": args.epochs, "lr": args.lr,
               "test_rmse": None if rmse is None else [float(_g(v)) for v in rmse]}
    _json(out / "summary.json", summary)
    print(f"trained on {len(train)} trajectories ({len(X)} windows); test RMSE per axis: {summary['test_rmse']}")
    if args.check and (rmse is None or np.any(rmse > 0.05)):
        print("CHECK FAILED: held-out RMSE above 0.05 m", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_train_localizer(args, cfg):
    if args.data:
        splits = load_localizer_dataset(args.data)
    else:
        splits = gen_localizer_splits(args.scale, seed=cfg.seed, profile=cfg.profile(), suite=cfg.sensor_suite(),
                                      dist=cfg.throw_distribution(), n_jobs=args.jobs)
    tr, val, test = splits[Split.TRAIN], splits.get(Split.VAL), splits.get(Split.TEST)
    cam = cfg.sensor_suite().camera
    est = LocalizerRegressor(cam.height, cam.width, epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
                             random_state=cfg.seed, log_every=1 if args.verbose else 0)
    est.fit(tr.frames, tr.labels, *((val.frames, val.labels) if val is not None else ()))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    est.save(out / "localizer.pgnn")
    _write(out / "losses.csv", _losses_csv(est.loss_curve_, est.val_loss_curve_))
    summary = {"n_train": len(tr), "epochs": args.epochs, "lr": args.lr}
    ok = True
    if test is not None:
        err = np.linalg.norm(est.predict(test.frames) - test.labels, axis=1)
        clean = test.blur == 0
        summary["test_mean_error"] = float(_g(err.mean()))
        summary["test_mean_error_unblurred"] = float(_g(err[clean].mean())) if clean.any() else None
        ok = clean.any() and err[clean].mean() <= 0.10
    _json(out / "summary.json", summary)
    print(f"trained on {len(tr)} frames; test mean error {summary.get('test_mean_error')} m "
          f"(unblurred {summary.get('test_mean_error_unblurred')})")
    if args.check and not ok:
        print("CHECK FAILED: unblurred mean error above 0.10 m", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_eval(args, cfg):
    metrics, _ = run_experiment(cfg, args.throws, out_dir=args.out, n_jobs=args.jobs)
    print(_metrics_line(metrics))
    if args.check_rate is not None and metrics.catch_rate < args.check_rate:
        print(f"CHECK FAILED: catch rate {metrics.catch_rate:.3f} < {args.check_rate}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _metrics_line(m: Metrics) -> str:
    return (f"{m.label:16s} n={m.n} catch={m.catch_rate:.3f} [{m.ci_low:.3f}, {m.ci_high:.3f}] "
            f"miss mean={m.miss_mean:.3f} p50={m.miss_p50:.3f} p90={m.miss_p90:.3f} m")


def compare_check(metrics: list[Metrics]) -> tuple[bool, str]:
    rate = {m.label: m.catch_rate for m in metrics}
    cnn = [rate[p] for p in rate if p.endswith("+cnn")]
    bal = [rate[p] for p in rate if p.endswith("+ballistic")]
    gap = min(cnn) - max(bal)
    ok = gap >= 0.10 and rate.get("cnn+cnn", 0.0) >= 0.6
    return ok, f"cnn-predictor minus ballistic gap {gap:+.3f}; cnn+cnn {rate.get('cnn+cnn', float('nan')):.3f}"


def cmd_compare(args, cfg):
    models = load_models(cfg.with_pipeline("cnn+cnn"))
    metrics = compare_pipelines(cfg, args.throws, models, pipelines=ALL_PIPELINES, out_dir=args.out,
                                n_jobs=args.jobs)
    for m in metrics:
        print(_metrics_line(m))
    ok, msg = compare_check(metrics)
    print(msg)
    if args.check and not ok:
        print("CHECK FAILED", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_tof(args, cfg):
    rows = tof_report(args.distances, args.throws, cfg.seed, cfg.throw_distribution(), cfg.profile(), cfg.z_plane,
                      cfg.gravity)
    _write(args.out / "tof.csv", tof_to_csv(rows))
    _json(args.out / "summary.json", {"rows": [{"distance": r.distance, "n": r.n, "min_ms": float(_g(r.min_ms)),
                                                "max_ms": float(_g(r.max_ms)), "median_ms": float(_g(r.median_ms)),
                                                "band": r.band, "in_band": r.in_band} for r in rows]})
    for r in rows:
        band = "" if r.band is None else f" band [{r.band[0]:.0f}, {r.band[1]:.0f}] {'ok' if r.in_band else 'OUT'}"
        print(f"{r.distance:.2f} m: min {r.min_ms:.0f} max {r.max_ms:.0f} median {r.median_ms:.0f} ms{band}")
    if any(r.in_band is False for r in rows):
        print("CHECK FAILED: median outside band", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def blur_check(rows) -> tuple[bool, str]:
    color = [r for r in rows if r.method == "color"]
    cnn = [r for r in rows if r.method == "cnn"]
    inc = all(b.mean_error > a.mean_error for a, b in zip(color, color[1:]))
    if not cnn:
        return False, "no CNN localizer rows"
    d_color = color[-1].mean_error - color[0].mean_error
    d_cnn = cnn[-1].mean_error - cnn[0].mean_error
    ok = inc and d_cnn < d_color
    return ok, f"color increasing: {inc}; error increase color {d_color:+.4f} m, cnn {d_cnn:+.4f} m"


def cmd_blur(args, cfg):
    localizer = None
    if cfg.localizer_weights:
        cam = cfg.sensor_suite().camera
        localizer = load_localizer(cfg.localizer_weights, cam.height, cam.width)
    rows = blur_study(args.blur, args.frames, localizer, cfg.seed, cfg.sensor_suite(), cfg.profile())
    _write(args.out / "blur.csv", blur_to_csv(rows))
    for r in rows:
        print(f"blur {r.blur:3d} px {r.method:6s} mean error {r.mean_error:.4f} m  miss rate {r.miss_rate:.3f}")
    ok, msg = blur_check(rows)
    print(msg)
    if args.check and not ok:
        print("CHECK FAILED", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_gradcheck(args, cfg):
    reports = run_gradchecks(cfg.seed, args.tolerance)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("case", "passed", "max_rel_error", "n_checked", "n_kink_skipped"))
    for name, rep in reports:
        print(f"{name:20s} {rep}")
        w.writerow([name, int(rep.passed), _g(rep.max_rel_error), rep.n_checked, rep.n_kink_skipped])
    _write(args.out / "gradcheck.csv", buf.getvalue())
    return EXIT_OK if all(r.passed for _, r in reports) else EXIT_CHECK


COMMANDS = {
    "simulate": cmd_simulate, "gen-localizer-data": cmd_gen_localizer, "gen-trajectory-data": cmd_gen_trajectory,
    "train-localizer": cmd_train_localizer, "train-interceptor": cmd_train_interceptor, "eval": cmd_eval,
    "compare": cmd_compare, "tof": cmd_tof, "blur-study": cmd_blur, "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _config(args)
        if getattr(args, "throws", 1) < 1 or args.jobs < 1:
            raise UsageError("--throws and --jobs must be at least 1")
        with threadpool_limits(1):
            return COMMANDS[args.command](args, cfg)
    except (ConfigError, MissingWeightsError, UsageError, WeightsFormatError, FileNotFoundError) as e:
        print(f"catchsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
