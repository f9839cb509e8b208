"""On-disk dataset: one ``sample_%06d/`` directory per stitching instance."""

import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io
from .errors import BucketUnreachable
from .scene import DatasetSample, PoseSampling, SceneSpec, generate_pair

log = logging.getLogger(__name__)

SAMPLE_FMT = "sample_%06d"
MANIFEST = "manifest.json"


def save_sample(sample: DatasetSample, directory):
    io.ensure_dir(directory)
    io.write_png(os.path.join(directory, "ref.png"), sample.image_ref)
    io.write_png(os.path.join(directory, "target.png"), sample.image_target)
    io.write_pfm(os.path.join(directory, "depth_ref.pfm"), sample.depth_ref)
    io.write_pfm(os.path.join(directory, "depth_target.pfm"), sample.depth_target)
    io.write_flo(os.path.join(directory, "warp_gt.flo"), sample.warp_gt)
    io.write_mask(os.path.join(directory, "overlap.png"), sample.overlap)
    io.write_cameras(os.path.join(directory, "cams.json"), {"ref": sample.cam_ref, "target": sample.cam_target})
    if sample.sample_stitched is not None:
        io.write_png(os.path.join(directory, "stitched_gt.png"), sample.sample_stitched)
    io.dump_json(os.path.join(directory, "meta.json"), {
        "overlap_ratio": sample.overlap_ratio,
        "seed": int(sample.seed),
        "spec": None if sample.spec is None else sample.spec.to_dict(),
        "bucket": None if sample.bucket is None else list(sample.bucket),
    })


def load_sample(directory) -> DatasetSample:
    cams = io.read_cameras(os.path.join(directory, "cams.json"))
    meta = io.load_json(os.path.join(directory, "meta.json"))
    stitched_path = os.path.join(directory, "stitched_gt.png")
    ref = io.read_png(os.path.join(directory, "ref.png"))
    return DatasetSample(
        image_ref=ref,
        image_target=io.read_png(os.path.join(directory, "target.png")),
        depth_ref=io.read_pfm(os.path.join(directory, "depth_ref.pfm")),
        depth_target=io.read_pfm(os.path.join(directory, "depth_target.pfm")),
        warp_gt=io.read_flo(os.path.join(directory, "warp_gt.flo"), expected_shape=ref.shape[:2]),
        overlap=io.read_mask(os.path.join(directory, "overlap.png")),
        cam_ref=cams["ref"],
        cam_target=cams["target"],
        overlap_ratio=float(meta["overlap_ratio"]),
        sample_stitched=io.read_png(stitched_path) if os.path.exists(stitched_path) else None,
        seed=int(meta.get("seed", 0)),
        spec=SceneSpec.from_dict(meta["spec"]) if meta.get("spec") else None,
        bucket=tuple(meta["bucket"]) if meta.get("bucket") else None,
        name=os.path.basename(os.path.normpath(directory)),
    )


def sample_seed(seed, index):
    """Per-sample seed split off the dataset seed."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _generate_one(args):
    index, spec, bucket, seed, size, sampling, out = args
    name = SAMPLE_FMT % index
    s = sample_seed(seed, index)
    try:
        sample = generate_pair(spec, bucket, s, size=size, sampling=sampling, name=name)
    except BucketUnreachable as exc:
        return {"index": index, "name": name, "seed": s, "bucket": list(bucket), "error": str(exc)}
    save_sample(sample, os.path.join(out, name))
    return {"index": index, "name": name, "seed": s, "bucket": list(bucket),
            "overlap_ratio": sample.overlap_ratio, "layout": spec.layout}


def generate_dataset(out, count, buckets, specs, size=(256, 256), seed=0, sampling=PoseSampling(), jobs=1):
    """Write ``count`` samples under ``out`` plus ``manifest.json``.

    Sample ``i`` targets ``buckets[i % len(buckets)]`` with layout
    ``specs[i % len(specs)]``. Samples whose bucket cannot be reached are
    skipped and listed in the manifest under ``skipped``.
    """
    io.ensure_dir(out)
    if isinstance(specs, SceneSpec):
        specs = [specs]
    jobs_args = [
        (i, specs[i % len(specs)], tuple(buckets[i % len(buckets)]), seed, tuple(size), sampling, out)
        for i in range(count)
    ]
    if jobs > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_generate_one, jobs_args))
    else:
        results = [_generate_one(a) for a in jobs_args]
    samples = [r for r in results if "error" not in r]
    skipped = [r for r in results if "error" in r]
    for r in skipped:
        log.warning("skipped %s (seed %d): %s", r["name"], r["seed"], r["error"])
    manifest = {
        "seed": int(seed),
        "size": list(size),
        "buckets": [list(b) for b in buckets],
        "samples": samples,
        "skipped": skipped,
    }
    io.dump_json(os.path.join(out, MANIFEST), manifest)
    return manifest


def list_samples(data_dir):
    """Sample directory names in manifest order (falls back to a directory scan)."""
    path = os.path.join(data_dir, MANIFEST)
    if os.path.exists(path):
        return [s["name"] for s in io.load_json(path)["samples"]]
    return sorted(d for d in os.listdir(data_dir) if os.path.isdir(os.path.join(data_dir, d)) and d.startswith("sample_"))
