"""Command-line interface: ``patchpoly {synth,fit,render,eval,sweep,gradcheck}``.

Exit codes: 0 ok, 1 check failure, 2 usage, 3 I/O, 4 non-finite loss.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from . import io as pio
from .field import render_decoded
from .fit import FitConfig, binarize, fit
from .geometry import regular_polygon_triangulation
from .gradcheck import check_seed
from .metrics import evaluate
from .raster import SoftRasterConfig

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4

TRACE_HEADER = ["iteration", "bce", "dice", "total", "iou"]
EVAL_HEADER = ["iou", "dice", "f1", "wcov", "fbound", "occlusion_d"]
SWEEP_HEADER = ["k", "s", "iou", "dice_loss", "seconds"]


class UsageError(Exception):
    pass


def _err(msg):
    print(f"patchpoly: error: {msg}", file=sys.stderr)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_fit_options(p):
    d = FitConfig()
    p.add_argument("--iters", type=int, default=d.iters)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--gamma-start", type=float, default=d.gamma_start)
    p.add_argument("--gamma-end", type=float, default=d.gamma_end)
    p.add_argument("--seed", type=int, default=d.seed)


def _fit_config(args) -> FitConfig:
    try:
        return FitConfig(iters=args.iters, lr=args.lr, gamma_start=args.gamma_start,
                         gamma_end=args.gamma_end, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    params = {}
    for item in args.param:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--param {key}: not a number: {value!r}") from None
    try:
        mask = pio.synth(args.shape, args.height, args.width, **params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    pio.write_mask(args.out, mask)
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _fit_config(args)
    if args.k < 3:
        raise UsageError(f"--k must be >= 3, got {args.k}")
    gt = pio.read_mask(args.gt)
    y = pio.pad_to_multiple(gt, args.patch)
    try:
        report = fit(y, args.k, args.patch, cfg=cfg)
    except FloatingPointError as exc:
        _err(str(exc))
        return EXIT_NUMERIC
    tri = regular_polygon_triangulation(args.k)
    ff = pio.FieldFile.from_field(report.field)
    m_o = render_decoded(ff.verts, ff.gates, tri, cfg.raster(cfg.iters, args.patch), args.patch)[0]
    if args.out_mask:
        pio.write_mask(args.out_mask, m_o)
    if args.out_field:
        pio.write_field(args.out_field, ff)
    if args.out_trace:
        note = (f"input {gt.shape[0]}x{gt.shape[1]} padded {y.shape[0]}x{y.shape[1]} "
                f"s {args.patch} k {args.k}")
        rows = [(r.iteration, r.bce, r.dice, r.total, r.iou) for r in report.records]
        pio.write_csv(args.out_trace, TRACE_HEADER, rows, comments=[note])
    fin = report.final
    print(f"iterations {cfg.iters}  total {fin.total:.6f}  dice {fin.dice:.6f}  iou {fin.iou:.4f}")
    return EXIT_OK


def cmd_render(args) -> int:
    if not (math.isfinite(args.scale) and args.scale > 0):
        raise UsageError(f"--scale must be a positive number, got {args.scale}")
    ff = pio.read_field(args.field)
    side_f = args.scale * ff.s
    out_side = int(round(side_f))
    if out_side < 1 or abs(side_f - out_side) > 1e-9:
        raise UsageError(f"--scale {args.scale} times patch side {ff.s} is not a positive integer")
    try:
        cfg = SoftRasterConfig(gamma=args.gamma, side=out_side, supersample=args.supersample)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    tri = regular_polygon_triangulation(ff.k)
    m_o, _, r_p = render_decoded(ff.verts, ff.gates, tri, cfg, out_side)
    pio.write_mask(args.out, r_p if args.no_gate else m_o)
    return EXIT_OK


def cmd_eval(args) -> int:
    if not 0.0 < args.threshold < 1.0:
        raise UsageError(f"--threshold must be in (0, 1), got {args.threshold}")
    gt = pio.read_mask(args.gt)
    pred = pio.read_mask(args.pred, soft=True)
    if gt.shape != pred.shape:
        raise UsageError(f"shape mismatch: gt {gt.shape[0]}x{gt.shape[1]} vs "
                         f"pred {pred.shape[0]}x{pred.shape[1]}")
    rep = evaluate(gt, binarize(pred, args.threshold))
    row = [getattr(rep, name) for name in EVAL_HEADER]
    pio.write_csv(args.out, EVAL_HEADER, [row])
    print(",".join(EVAL_HEADER))
    print(",".join(pio.format_value(x) for x in row))
    return EXIT_OK


def _dedup(values, name):
    seen = []
    for v in values:
        if v in seen:
            print(f"patchpoly: warning: duplicate {name} {v} ignored", file=sys.stderr)
        else:
            seen.append(v)
    return sorted(seen)


def cmd_sweep(args) -> int:
    cfg = _fit_config(args)
    ks = _dedup(args.k_list, "k")
    ss = _dedup(args.s_list, "s")
    if min(ks) < 3 or min(ss) < 1:
        raise UsageError("k values must be >= 3 and s values >= 1")
    gt = pio.read_mask(args.gt)
    rows = []
    for k in ks:
        for s in ss:
            start = time.perf_counter()
            try:
                rep = fit(pio.pad_to_multiple(gt, s), k, s, cfg=cfg)
                iou, dice = rep.final.iou, rep.final.dice
            except (FloatingPointError, ValueError, MemoryError) as exc:
                print(f"patchpoly: warning: k={k} s={s} failed: {exc}", file=sys.stderr)
                iou = dice = float("nan")
            rows.append((k, s, iou, dice, time.perf_counter() - start))
            print(f"k={k} s={s} iou={iou:.4f} dice_loss={dice:.6f}")
    pio.write_csv(args.out, SWEEP_HEADER, rows)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.seeds < 1:
        raise UsageError(f"--seeds must be >= 1, got {args.seeds}")
    if not args.tol > 0:
        raise UsageError(f"--tol must be positive, got {args.tol}")
    failures = []
    worst = None
    for seed in range(args.seeds):
        res = check_seed(seed, h=args.h)
        print(f"seed {seed:3d}  worst relative error {res.worst_rel_error:.3e}  "
              f"(param {res.worst_index}, {res.n_checked} checked)")
        if worst is None or res.worst_rel_error > worst.worst_rel_error:
            worst = res
        if not res.passed(args.tol):
            failures.append(res)
    print(f"worst relative error {worst.worst_rel_error:.3e} (seed {worst.seed}, "
          f"param {worst.worst_index}); tolerance {args.tol:g}")
    for res in failures:
        print(f"FAIL seed {res.seed} param {res.worst_index}: "
              f"{res.worst_rel_error:.3e} > {args.tol:g}")
    return EXIT_CHECK if failures else EXIT_OK


# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="patchpoly", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic binary mask")
    p.add_argument("--shape", required=True, choices=pio.SHAPES)
    p.add_argument("--height", type=_positive_int, default=64)
    p.add_argument("--width", type=_positive_int, default=64)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="shape parameter in pixels (repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a polygon field to a ground-truth mask")
    p.add_argument("--gt", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--patch", type=_positive_int, default=8)
    _add_fit_options(p)
    p.add_argument("--out-mask")
    p.add_argument("--out-field")
    p.add_argument("--out-trace")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("render", help="render a field file at any resolution")
    p.add_argument("--field", required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=SoftRasterConfig.gamma)
    p.add_argument("--supersample", type=_positive_int, default=SoftRasterConfig.supersample)
    p.add_argument("--no-gate", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="score a prediction against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="fit over a grid of vertex counts and patch sizes")
    p.add_argument("--gt", required=True)
    p.add_argument("--k-list", type=_int_list, default=[4, 5, 8, 16, 24])
    p.add_argument("--s-list", type=_int_list, default=[4, 8, 16, 32])
    _add_fit_options(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference check of the loss gradient")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--h", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (pio.FormatError, OSError) as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
