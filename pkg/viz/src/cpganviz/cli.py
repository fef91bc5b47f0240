"""Batch figure rendering from training CSV outputs."""

import argparse
import sys

from .plots import (plot_convexity, plot_density, plot_image_grid,
                    plot_surface)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cpgan-viz",
        description="Render figures from cpgan CSV outputs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="KDE heat map of 2-D samples")
    p.add_argument("samples_csv")
    p.add_argument("out_image")
    p.add_argument("--bandwidth", type=float, default=0.1)

    p = sub.add_parser("surface", help="contour plot of the potential grid")
    p.add_argument("grid_csv")
    p.add_argument("out_image")

    p = sub.add_parser("convexity", help="log-scale penalty curves")
    p.add_argument("metrics_csv", nargs="+")
    p.add_argument("out_image")
    p.add_argument("--label", action="append", default=None,
                   help="curve label, repeat once per metrics file")

    p = sub.add_parser("image-grid", help="grayscale tile sheet of samples")
    p.add_argument("samples_csv")
    p.add_argument("out_image")
    p.add_argument("--side", type=int, required=True)
    p.add_argument("--tiles", type=int, default=16)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "density":
            plot_density(args.samples_csv, args.bandwidth, args.out_image)
        elif args.command == "surface":
            plot_surface(args.grid_csv, args.out_image)
        elif args.command == "convexity":
            plot_convexity(args.metrics_csv, args.out_image,
                           labels=args.label)
        else:
            plot_image_grid(args.samples_csv, args.side, args.out_image,
                            tiles=args.tiles)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
