import json
import os
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from geopredict.flowfiles import read_flow


def build_source_images(out_dir, count, width, height, seed):
    """Structured procedural sources: checkerboards, stripes and line grids
    whose straight edges make every distortion family visually distinct."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width]
    for i in range(count):
        kind = i % 3
        colors = rng.uniform(0.1, 0.9, (2, 3))
        if kind == 0:
            cell = int(rng.integers(10, 28))
            pattern = ((xs // cell) + (ys // cell)) % 2
        elif kind == 1:
            cell = int(rng.integers(8, 24))
            pattern = (xs // cell) % 2 if rng.random() < 0.5 else (ys // cell) % 2
        else:
            cell = int(rng.integers(14, 30))
            pattern = ((xs % cell) < 3) | ((ys % cell) < 3)
        img = np.where(pattern[..., None], colors[0], colors[1])
        # mild gradient so rows and columns are not interchangeable
        img = np.clip(img + 0.15 * (ys[..., None] / height) - 0.075, 0, 1)
        Image.fromarray(np.rint(img * 255).astype(np.uint8)).save(
            os.path.join(out_dir, f"src_{i:03d}.png"))


def run_geowarp(*args) -> subprocess.CompletedProcess:
    """Invoke the distortion toolkit's CLI in a subprocess."""
    return subprocess.run(
        [sys.executable, "-m", "geowarp.cli", *map(str, args)],
        capture_output=True, text=True,
    )


def build_desk_dataset(root, per_type=100, oversample=3, seed=5) -> str:
    """Desk-scale training corpus through the toolkit CLI only.

    Two synth runs: five families from square sources, wave from 64-px-tall
    sources (the valid region of a pure horizontal wave spans the full
    height, so the crop keeps the sinusoid's phase at zero, which the
    phase-free two-parameter wave model can represent). The strongest
    ``per_type`` pairs per family (by stored-flow magnitude) are kept.
    Returns the merged manifest path.
    """
    src_main = os.path.join(root, "src_main")
    src_wave = os.path.join(root, "src_wave")
    build_source_images(src_main, 30, 96, 96, seed=3)
    build_source_images(src_wave, 12, 96, 64, seed=4)
    ds_main = os.path.join(root, "ds_main")
    ds_wave = os.path.join(root, "ds_wave")
    count = per_type * oversample
    p1 = run_geowarp("synth", "--src", src_main, "--out", ds_main, "--count", count,
                     "--seed", seed, "--size", "64x64", "--types",
                     "barrel", "pincushion", "rotation", "shear", "perspective")
    assert p1.returncode == 0, p1.stderr
    p2 = run_geowarp("synth", "--src", src_wave, "--out", ds_wave, "--count", count,
                     "--seed", seed + 1, "--size", "64x64", "--types", "wave")
    assert p2.returncode == 0, p2.stderr

    merged = os.path.join(root, "dataset")
    os.makedirs(merged, exist_ok=True)
    records = []
    for ds in (ds_main, ds_wave):
        doc = json.load(open(os.path.join(ds, "manifest.json")))
        for r in doc["records"]:
            for key in ("image", "flow"):
                name = f"{os.path.basename(ds)}_{r[key]}"
                dst = os.path.join(merged, name)
                if not os.path.exists(dst):
                    os.link(os.path.join(ds, r[key]), dst)
                r[key] = name
            records.append(r)
    by_type = {}
    for r in records:
        f = read_flow(os.path.join(merged, r["flow"]))
        mag = float(np.hypot(f[..., 0], f[..., 1]).mean())
        by_type.setdefault(r["type"], []).append((mag, r))
    kept = []
    for rows in by_type.values():
        rows.sort(key=lambda x: -x[0])
        kept.extend(r for _, r in rows[:per_type])
    manifest = os.path.join(merged, "manifest.json")
    json.dump({"size": [64, 64], "seed": seed, "records": kept}, open(manifest, "w"))
    return manifest


@pytest.fixture(scope="session")
def desk_manifest(tmp_path_factory):
    """600 curated 64x64 pairs (100 per family)."""
    root = tmp_path_factory.mktemp("desk")
    return build_desk_dataset(str(root))


@pytest.fixture(scope="session")
def small_manifest(tmp_path_factory):
    """Quick corpus for unit tests: 10 pairs per family."""
    root = tmp_path_factory.mktemp("small")
    return build_desk_dataset(str(root), per_type=10, oversample=1, seed=11)
