"""Command-line entry point: ``stitchkit generate | stitch | evaluate``.

Exit codes: 0 success, 1 hard failure, 2 partial result (missing rows).
"""

import argparse
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io, report
from .dataset import generate_dataset, list_samples, load_sample
from .errors import StitchError
from .losses import DEFAULT_BUCKETS, assign_bucket, bucket_label, epe_report, warp_loss
from .pipeline import estimate_warp, stitch_pipeline
from .scene import LAYOUTS, PoseSampling, SceneSpec, TextureSpec

log = logging.getLogger("stitchkit")


def parse_buckets(text):
    """``"20-40,40-60"`` (percent) -> ``[(0.2, 0.4), (0.4, 0.6)]``."""
    out = []
    for part in text.split(","):
        lo, hi = part.strip().split("-")
        lo, hi = float(lo) / 100.0, float(hi) / 100.0
        if not 0 <= lo <= hi <= 1:
            raise argparse.ArgumentTypeError(f"bad bucket {part!r}")
        out.append((lo, hi))
    return out


def parse_size(text):
    w, h = text.lower().split("x")
    return int(w), int(h)


def parse_floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- generate -----------------------------------------------------------------

def cmd_generate(args):
    specs = [
        SceneSpec(layout=name, near=args.near, far=args.far, parallax=args.parallax,
                  texture=TextureSpec(args.texture, args.texture_freq, args.seed))
        for name in args.layout.split(",")
    ]
    sampling = PoseSampling(baseline=(args.baseline_min, args.baseline_max), max_yaw_deg=args.max_yaw)
    manifest = generate_dataset(args.out, args.count, args.buckets, specs, args.size, args.seed, sampling, args.jobs)
    skipped = len(manifest["skipped"])
    print(f"wrote {len(manifest['samples'])} samples to {args.out} ({skipped} skipped)")
    if args.count and skipped > args.count / 2:
        print(f"error: {skipped} of {args.count} samples could not reach their overlap bucket", file=sys.stderr)
        return 1
    return 0


# -- stitch -------------------------------------------------------------------

def _resolve_estimator(spec, name, data_dir=None):
    """Map a CLI estimator string onto what :func:`estimate_warp` accepts for sample ``name``."""
    if spec.startswith("file:"):
        path = spec[5:]
        if os.path.isdir(path):
            for cand in (os.path.join(path, name, "warp.flo"), os.path.join(path, name + ".flo")):
                if os.path.exists(cand):
                    return "file:" + cand
            raise FileNotFoundError(f"no prediction for {name} under {path}")
        return spec
    return spec


def _stitch_one(job):
    data_dir, name, args = job
    try:
        sample = load_sample(os.path.join(data_dir, name))
        estimator = _resolve_estimator(args["estimator"], name)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            canvas = stitch_pipeline(sample, estimator, blend=args["blend"], fill=args["fill"],
                                     estimator_kw={"seed": args["seed"]} if estimator == "homography" else None)
    except (StitchError, OSError, ValueError) as exc:
        return name, {"error": f"{type(exc).__name__}: {exc}"}
    out = io.ensure_dir(os.path.join(args["out"], name))
    io.write_png(os.path.join(out, "final.png"), canvas.stitched)
    io.write_flo(os.path.join(out, "warp.flo"), canvas.extras["warp"])
    if args["dump"]:
        io.write_png(os.path.join(out, "warped_target.png"), canvas.warped)
        io.write_mask(os.path.join(out, "holes.png"), canvas.holes)
        io.write_png(os.path.join(out, "blend.png"), canvas.extras["blend"])
    return name, canvas.extras["losses"]


def cmd_stitch(args):
    names = list_samples(args.data)
    io.ensure_dir(args.out)
    opts = {"estimator": args.estimator, "blend": args.blend, "fill": args.fill, "dump": args.dump_intermediates,
            "out": args.out, "seed": args.seed}
    results = dict(_map(_stitch_one, [(args.data, n, opts) for n in names], args.jobs))
    failed = [n for n, r in results.items() if "error" in r]
    for n in failed:
        log.error("%s: %s", n, results[n]["error"])
    io.dump_json(os.path.join(args.out, "losses.json"), results)
    print(f"stitched {len(names) - len(failed)} of {len(names)} samples into {args.out}")
    return 1 if names and len(failed) == len(names) else 0


# -- evaluate -----------------------------------------------------------------

def _evaluate_one(job):
    data_dir, name, method, pred_dir, want_psnr, seed = job
    sample = load_sample(os.path.join(data_dir, name))
    try:
        if method.startswith("pred:"):
            estimator = _resolve_estimator("file:" + pred_dir, name)
        else:
            estimator = _resolve_estimator(method, name)
        kw = {"seed": seed} if estimator == "homography" else None
        if want_psnr:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                canvas = stitch_pipeline(sample, estimator, estimator_kw=kw)
            warp, psnr = canvas.extras["warp"], canvas.extras["losses"]["masked_psnr"]
        else:
            warp, _ = estimate_warp(sample, estimator, **(kw or {}))
            psnr = None
    except (StitchError, OSError, ValueError) as exc:
        return {"name": name, "method": method, "error": f"{type(exc).__name__}: {exc}"}
    return {"name": name, "method": method, "warp": np.asarray(warp, dtype=np.float32), "psnr": psnr,
            "warp_gt": sample.warp_gt, "overlap": sample.overlap, "ratio": sample.overlap_ratio,
            "valid": sample.warp_valid}


def _alpha_rows(results, alphas, buckets):
    columns = [bucket_label(b) for b in buckets] + ["total mean"]
    rows = {}
    for a in alphas:
        per = {c: [] for c in columns}
        for r in results:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                loss = warp_loss(r["warp"], r["warp_gt"], r["overlap"], a, valid=r["valid"])
            i = assign_bucket(r["ratio"], buckets)
            if i is not None:
                per[columns[i]].append(loss)
            per["total mean"].append(loss)
        rows[a] = {c: (float(np.mean(v)) if v else None) for c, v in per.items()}
    return rows, columns


def _write_outputs(out, text, payload, csvs):
    if not out:
        return
    base, ext = os.path.splitext(out)
    text_path, json_path = (base + ".txt", out) if ext == ".json" else (out, base + ".json")
    parent = os.path.dirname(os.path.abspath(out))
    io.ensure_dir(parent)
    with open(text_path, "w", encoding="utf-8") as f:
        f.write(text + "\n")
    io.dump_json(json_path, payload)
    for method, body in csvs.items():
        safe = method.replace(":", "_").replace("/", "_")
        with open(f"{base}.psnr_{safe}.csv", "w", encoding="utf-8") as f:
            f.write(body)


def cmd_evaluate(args):
    names = list_samples(args.data)
    methods = []
    if args.pred:
        methods.append("pred:" + os.path.basename(os.path.normpath(args.pred)))
    if args.estimator:
        methods += [m.strip() for m in args.estimator.split(",") if m.strip()]
    if not methods:
        methods = ["oracle"]
    want_psnr = args.report in ("psnr", "all")
    jobs = [(args.data, n, m, args.pred, want_psnr, args.seed) for m in methods for n in names]
    results = _map(_evaluate_one, jobs, args.jobs)
    absent = [r for r in results if "error" in r]
    for r in absent:
        log.error("%s [%s]: %s", r["name"], r["method"], r["error"])

    texts, payload, csvs = [], {"data": os.path.abspath(args.data), "absent": [
        {"sample": r["name"], "method": r["method"], "error": r["error"]} for r in absent]}, {}
    ok = {m: [r for r in results if r["method"] == m and "error" not in r] for m in methods}
    if args.report in ("epe", "all"):
        reps = [epe_report([(r["warp"], r["warp_gt"], r["overlap"], r["ratio"], r["valid"]) for r in ok[m]],
                           DEFAULT_BUCKETS, label=m) for m in methods if ok[m]]
        if reps:
            texts.append(report.epe_text(reps))
            payload["epe"] = report.epe_json(reps)
    if want_psnr:
        dataset = os.path.basename(os.path.normpath(args.data))
        table = {dataset: {}}
        per_method = {}
        for m in methods:
            vals = {r["name"]: r["psnr"] for r in ok[m]}
            rows = [(n, vals.get(n)) for n in names]
            finite = [v for _, v in rows if v is not None]
            mean = float(np.mean(finite)) if finite else None
            table[dataset][m] = mean
            per_method[m] = {n: v for n, v in rows}
            csvs[m] = report.psnr_csv(rows, mean)
        texts.append(report.psnr_text(table))
        payload["psnr"] = report.psnr_json(table)
        payload["psnr_per_sample"] = per_method
    if args.alpha_sweep:
        sweeps = {}
        for m in methods:
            if not ok[m]:
                continue
            rows, cols = _alpha_rows(ok[m], args.alpha_sweep, DEFAULT_BUCKETS)
            texts.append(report.alpha_text(rows, cols, title=f"Warp loss by alpha [{m}]"))
            sweeps[m] = report.alpha_json(rows, cols)
        payload["alpha_sweep"] = sweeps
    if absent:
        texts.append("# absent rows\n" + "\n".join(f"{r['method']}\t{r['name']}\tabsent" for r in absent))
    text = "\n\n".join(texts)
    print(text)
    _write_outputs(args.out, text, payload, csvs)
    return 2 if absent else 0


# -- entry point --------------------------------------------------------------

def build_parser():
    default_jobs = int(os.environ.get("STITCHKIT_JOBS", "1"))
    p = argparse.ArgumentParser(prog="stitchkit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--jobs", type=int, default=default_jobs, help="parallel workers across samples (env STITCHKIT_JOBS)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a synthetic stitching dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--buckets", type=parse_buckets, default=list(DEFAULT_BUCKETS), help="e.g. 20-40,40-60,60-80")
    g.add_argument("--layout", default="two_plane", help=f"one or more of {', '.join(LAYOUTS)} (comma separated)")
    g.add_argument("--size", type=parse_size, default=(256, 256), help="WxH")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--near", type=float, default=2.0)
    g.add_argument("--far", type=float, default=4.0)
    g.add_argument("--parallax", type=float, default=1.0)
    g.add_argument("--texture", default="value_noise")
    g.add_argument("--texture-freq", type=float, default=6.0)
    g.add_argument("--baseline-min", type=float, default=0.1, help="baseline / near depth at zero yaw")
    g.add_argument("--baseline-max", type=float, default=0.3, help="baseline / near depth at maximum yaw")
    g.add_argument("--max-yaw", type=float, default=55.0)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("stitch", help="stitch every sample of a dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--estimator", default="oracle", help="oracle | homography | file:PATH")
    s.add_argument("--blend", choices=("average", "feather"), default="average")
    s.add_argument("--fill", action="store_true", help="diffuse colour into canvas holes")
    s.add_argument("--dump-intermediates", action="store_true")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_stitch)

    e = sub.add_parser("evaluate", help="EPE / PSNR reports")
    e.add_argument("--data", required=True)
    e.add_argument("--pred", help="directory of predicted warps (<sample>/warp.flo or <sample>.flo)")
    e.add_argument("--estimator", help="comma-separated estimators (oracle, homography, file:PATH)")
    e.add_argument("--report", choices=("epe", "psnr", "all"), default="all")
    e.add_argument("--alpha-sweep", type=parse_floats)
    e.add_argument("--out")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StitchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
