"""Command-line entry point tying the modules into reproducible experiments.

Exit codes: 0 success, 1 check failed, 2 usage/config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .data import (GmmSpec, class_filter, gmm_sample, load_idx_images,
                   load_idx_labels, ring_gmm, uniform_source)
from .evaluation import (convexity_history, discriminator_balance,
                         js_from_samples)
from .training import (ConfigError, TrainConfig, load_checkpoint,
                       restore_networks, run_training, CheckpointError)
from .transport import GeneratorHandle, strong_convexity_scan

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _load_config(path, overrides):
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as e:
        raise IOError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    for key, val in overrides.items():
        if val is not None:
            raw[key] = val
    return TrainConfig.from_dict(raw)


def _build_dataset(config, data_path):
    spec = config.dataset or {}
    kind = spec.get("type")
    if kind == "gmm":
        gmm = ring_gmm(
            n_modes=spec.get("modes", 7),
            radius=spec.get("radius", 1.0),
            center=tuple(spec.get("center", (0.5, 0.5))),
            variance=spec.get("variance", 0.02),
        )
        n = spec.get("n_samples", 10_000)
        return gmm_sample(gmm, n, seed=config.seed + 1000).points
    if kind == "idx":
        if data_path is None:
            raise ConfigError("idx dataset requires --data pointing to a "
                              "directory with images/labels IDX files")
        images = load_idx_images(
            os.path.join(data_path, spec.get("images", "images.idx")),
            normalize_to=spec.get("normalize_to", "symmetric"),
            pad_to=spec.get("pad_to"))
        if "keep_class" in spec:
            labels = load_idx_labels(
                os.path.join(data_path, spec.get("labels", "labels.idx")))
            images = class_filter(images, labels, spec["keep_class"])
        limit = spec.get("limit")
        pts = images.points[:limit] if limit else images.points
        if pts.shape[0] == 0:
            raise ConfigError("dataset is empty after class filtering")
        return pts
    raise ConfigError(f"config dataset.type must be 'gmm' or 'idx', got {kind!r}")


def _write_samples_csv(path, points):
    np.savetxt(path, points, delimiter=",", fmt="%.17g")


def cmd_train(args):
    config = _load_config(args.config, {"seed": args.seed, "epochs": args.epochs})
    dataset = _build_dataset(config, args.data)
    phi, disc, _ = run_training(config, dataset, args.out)
    lo, hi = config.domain
    d = dataset.shape[1]
    src = uniform_source(2000, d, (lo, hi), seed=config.seed + 2000)
    handle = GeneratorHandle.from_net(phi)
    _write_samples_csv(os.path.join(args.out, "samples.csv"), handle.apply(src.points))
    return EXIT_OK


def cmd_generate(args):
    manifest, state = load_checkpoint(args.checkpoint)
    config, phi, _ = restore_networks(manifest, state)
    d = phi.spec.layer_widths[0]
    src = uniform_source(args.n, d, config.domain, seed=args.seed)
    handle = GeneratorHandle.from_net(phi)
    _write_samples_csv(args.out, handle.apply(src.points))
    return EXIT_OK


def cmd_verify_convexity(args):
    if args.points < 1:
        raise ConfigError("--points must be >= 1")
    manifest, state = load_checkpoint(args.checkpoint)
    config, phi, _ = restore_networks(manifest, state)
    handle = GeneratorHandle.from_net(phi)
    report = strong_convexity_scan(handle, args.points, seed=args.seed,
                                   domain=config.domain, kappa=args.kappa)
    print(f"samples_scanned: {report.samples_scanned}")
    print(f"min_eigenvalue_estimate: {report.min_eigenvalue_estimate:.6e}")
    print(f"worst_point: {np.array2string(report.worst_point, precision=4)}")
    print(f"kappa_certified: {report.kappa_certified}")
    ok = report.min_eigenvalue_estimate >= args.kappa
    print("certificate: PASS" if ok else "certificate: FAIL")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_probe(args):
    manifest, state = load_checkpoint(args.checkpoint)
    config, phi, disc = restore_networks(manifest, state)
    d = phi.spec.layer_widths[0]
    rows = []

    out_dir = args.out or os.path.dirname(os.path.abspath(args.checkpoint))
    os.makedirs(out_dir, exist_ok=True)

    handle = GeneratorHandle.from_net(phi)
    src = uniform_source(2000, d, config.domain, seed=args.seed)
    fake = handle.apply(src.points)

    if args.data is not None:
        real = np.loadtxt(args.data, delimiter=",", ndmin=2)
        mean_real, mean_fake = discriminator_balance(disc, real, fake)
        rows.append(("disc_mean_real", mean_real))
        rows.append(("disc_mean_fake", mean_fake))
        if d <= 2:
            est = js_from_samples(real[:5000], fake[:5000], bandwidth=0.1)
            rows.append(("js_divergence", est.value))
            rows.append(("js_divergence_2h", est.value_double_bandwidth))

    metrics_csv = os.path.join(os.path.dirname(os.path.abspath(args.checkpoint)),
                               "metrics.csv")
    if os.path.exists(metrics_csv):
        series = convexity_history(metrics_csv)
        rows.append(("final_penalty_floored", series[-1][1]))

    report = strong_convexity_scan(handle, 200, seed=args.seed,
                                   domain=config.domain)
    rows.append(("min_eigenvalue_estimate", report.min_eigenvalue_estimate))

    eval_path = os.path.join(out_dir, "eval.csv")
    with open(eval_path, "w", newline="\n") as f:
        f.write("metric,value\n")
        for name, value in rows:
            f.write(f"{name},{value!r}\n")
            print(f"{name}: {value}")

    if args.dump_potential_grid:
        n = args.dump_potential_grid
        lo, hi = config.domain
        pts = np.linspace(lo, hi, n)
        if d != 2:
            raise ConfigError("--dump-potential-grid requires a 2-D potential")
        A, B = np.meshgrid(pts, pts, indexing="ij")
        X = np.stack([A.reshape(-1), B.reshape(-1)], axis=1)
        vals = phi.forward(X).data.reshape(-1)
        grid = np.column_stack([X, vals])
        _write_samples_csv(os.path.join(out_dir, "potential_grid.csv"), grid)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cpgan",
        description="Train and probe a convex-potential generative model.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("generate", help="sample from a trained generator")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("verify-convexity",
                       help="empirical strong-convexity certificate")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_verify_convexity)

    p = sub.add_parser("probe", help="evaluation summary for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", default=None,
                   help="CSV of real samples for balance/JS probes")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-potential-grid", type=int, default=0)
    p.set_defaults(fn=cmd_probe)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ConfigError, CheckpointError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
