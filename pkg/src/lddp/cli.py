"""Command-line interface: ``lddp {segment,fit,synth,baseline,eval}``.

Every command writes fixed filenames under ``--out-dir``: labels.png,
labels.txt, report.txt, scores.tsv (whichever apply).
"""
import argparse
import json
import logging
from pathlib import Path
import sys

from .evaluation import SCENARIOS, compare_report, rand_index, synth_image, write_scores
from .kernel import KernelParams
from .pipeline import (dataset_from_image, kmeans, kmeans_5d_baseline, load_image,
                       load_labels_txt, load_table, run_lddp, save_label_image,
                       save_labels_txt)
from .vi import LddpConfig

log = logging.getLogger("lddp")


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    pass


def _add_model_flags(p):
    p.add_argument("--k", type=int, default=5, help="truncation level K0")
    p.add_argument("--alpha0", type=float, default=1.0, help="concentration")
    p.add_argument("--sigma-l", type=float, default=0.1, help="kernel length scale")
    p.add_argument("--sigma-f", type=float, default=1.0, help="kernel amplitude")
    p.add_argument("--iters", type=int, default=1000, help="maximum sweeps")
    p.add_argument("--tol", type=float, default=1e-6, help="relative ELBO change to stop at")
    p.add_argument("--landmark-frac", type=float, default=0.05,
                   help="fraction of points used as Nystrom landmarks")
    p.add_argument("--rho", type=float, default=0.1, help="GP step size")
    p.add_argument("--gp-steps", type=int, default=1, help="GP steps per sweep")
    p.add_argument("--no-backtracking", action="store_true",
                   help="take GP steps without step halving")
    p.add_argument("--gmm-mode", action="store_true",
                   help="freeze the GP fields at zero (plain mixture)")
    p.add_argument("--seed", type=int, default=0, help="root random seed")
    p.add_argument("--out-dir", default=".", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lddp", formatter_class=_Formatter,
        description="Location dependent DP mixtures for segmentation and clustering.")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", formatter_class=_Formatter,
                       help="segment an RGB image with the LDDP mixture")
    p.add_argument("image", help="input image (PNG, PPM, ...)")
    _add_model_flags(p)

    p = sub.add_parser("fit", formatter_class=_Formatter,
                       help="cluster a delimited table of features and locations")
    p.add_argument("table", help="delimited text file with a header row")
    p.add_argument("--features", required=True,
                   help="comma-separated feature columns (names or indices)")
    p.add_argument("--locations", required=True,
                   help="comma-separated location columns (names or indices)")
    p.add_argument("--delimiter", default=",", help="field delimiter")
    _add_model_flags(p)

    p = sub.add_parser("synth", formatter_class=_Formatter,
                       help="write a synthetic image with planted segments")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--size", type=int, default=64, help="image height and width")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out-dir", default=".", help="output directory")

    p = sub.add_parser("baseline", formatter_class=_Formatter,
                       help="k-means segmentation on [RGB, pixel location]")
    p.add_argument("image", help="input image")
    p.add_argument("--k", type=int, default=5, help="number of clusters")
    p.add_argument("--no-location", action="store_true", help="cluster on RGB only")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out-dir", default=".", help="output directory")

    p = sub.add_parser("eval", formatter_class=_Formatter,
                       help="Rand index of predicted labels against the truth")
    p.add_argument("pred", nargs="+", help="predicted label files (one integer per line)")
    p.add_argument("--truth", required=True, help="ground-truth label file")
    p.add_argument("--names", default=None, help="comma-separated method names")
    p.add_argument("--out-dir", default=".", help="output directory for scores.tsv")
    return parser


def _config(args):
    return LddpConfig(
        k0=args.k, alpha0=args.alpha0, step_rho=args.rho,
        gp_steps_per_iter=0 if args.gmm_mode else args.gp_steps,
        max_iters=args.iters, elbo_rel_tol=args.tol,
        backtracking=not args.no_backtracking)


def _progress(it, state, value):
    if it % 50 == 0:
        log.info("iteration %d  elbo %.6f", it, value)


def _run(dataset, args):
    params = KernelParams(sigma_f=args.sigma_f, sigma_l=args.sigma_l)
    report = run_lddp(dataset, _config(args), params, seed=args.seed,
                      landmark_frac=args.landmark_frac, out_dir=args.out_dir,
                      callback=_progress)
    summary = report.to_dict()
    print(f"{report.mode}: {summary['iterations']} iterations, "
          f"{summary['active_clusters']} active clusters, "
          f"final elbo {summary['elbo_trace'][-1]:.6f}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_segment(args):
    return _run(load_image(args.image), args)


def cmd_fit(args):
    dataset = load_table(args.table, args.features.split(","),
                         args.locations.split(","), delimiter=args.delimiter)
    return _run(dataset, args)


def cmd_synth(args):
    pixels, truth = synth_image(args.size, args.size, args.scenario, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from PIL import Image
    Image.fromarray(pixels, mode="RGB").save(out / "image.png", format="PNG")
    save_labels_txt(truth, out / "truth.txt")
    save_label_image(truth, pixels.shape[:2], out / "truth.png")
    print(f"wrote {out / 'image.png'} and {out / 'truth.txt'}")
    return 0


def cmd_baseline(args):
    dataset = load_image(args.image)
    k = min(args.k, len(dataset))
    if args.no_location:
        labels = kmeans(dataset.features, k, args.seed)
    else:
        labels = kmeans_5d_baseline(dataset, k, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_labels_txt(labels, out / "labels.txt")
    save_label_image(labels, dataset.source_shape, out / "labels.png")
    report = {"method": "kmeans-rgb" if args.no_location else "kmeans-rgb-location",
              "k": args.k, "seed": args.seed, "n_points": len(dataset)}
    (out / "report.txt").write_text(json.dumps(report, indent=2) + "\n")
    print(f"wrote {out / 'labels.txt'}")
    return 0


def cmd_eval(args):
    truth = load_labels_txt(args.truth)
    names = args.names.split(",") if args.names else [Path(p).stem for p in args.pred]
    if len(names) != len(args.pred):
        raise ValueError("--names must give one name per prediction file")
    runs = []
    for name, path in zip(names, args.pred):
        labels = load_labels_txt(path)
        if len(labels) != len(truth):
            raise ValueError(f"{path} has {len(labels)} labels but the truth has {len(truth)}")
        runs.append((name, labels))
    rows, table = compare_report(runs, truth)
    for name, labels in runs:
        print(f"{100 * rand_index(labels, truth):.2f}")
    print(table, file=sys.stderr)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_scores(rows, out / "scores.tsv")
    return 0


COMMANDS = {"segment": cmd_segment, "fit": cmd_fit, "synth": cmd_synth,
            "baseline": cmd_baseline, "eval": cmd_eval}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"lddp {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
