#!/usr/bin/env python3
"""Convert public hyperspectral scenes (MATLAB .mat archives) to the dataset
directory layout this project reads.

The standard scenes (Indian Pines, Pavia University, Salinas) are published
as pairs of .mat files: one with the reflectance cube (H x W x C) and one
with the ground-truth label grid (H x W, 0 = unlabeled). Download them
yourself, then run e.g.:

    python3 scripts/convert_mat.py \
        --cube Indian_pines_corrected.mat --labels Indian_pines_gt.mat \
        --out data/indian_pines --name indian_pines

Output layout (all little-endian):
    header.json   {"width","height","bands","classes","dtype":"f32le",
                   "label_dtype":"u16le","name"}
    cube.f32      width*height*bands float32, ordered (row, col, band)
    labels.u16    width*height uint16, row-major

Values are min-max scaled to [0, 1] per cube, which is all the training
pipeline assumes about magnitudes.
"""

import argparse
import json
import pathlib

import numpy as np
import scipy.io


def largest_array(mat: dict) -> np.ndarray:
    arrays = {k: v for k, v in mat.items() if isinstance(v, np.ndarray) and v.size > 1}
    if not arrays:
        raise SystemExit("no array found in .mat file")
    return arrays[max(arrays, key=lambda k: arrays[k].size)]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cube", required=True, help=".mat file with the H x W x C cube")
    parser.add_argument("--labels", required=True, help=".mat file with the H x W label grid")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--name", default="converted")
    args = parser.parse_args()

    cube = largest_array(scipy.io.loadmat(args.cube)).astype(np.float64)
    labels = largest_array(scipy.io.loadmat(args.labels)).astype(np.uint16)
    if cube.ndim != 3 or labels.ndim != 2 or cube.shape[:2] != labels.shape:
        raise SystemExit(f"shape mismatch: cube {cube.shape}, labels {labels.shape}")

    height, width, bands = cube.shape
    cube = (cube - cube.min()) / (cube.max() - cube.min())

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = {
        "width": width,
        "height": height,
        "bands": bands,
        "classes": int(labels.max()),
        "dtype": "f32le",
        "label_dtype": "u16le",
        "name": args.name,
    }
    (out / "header.json").write_text(json.dumps(header, indent=2) + "\n")
    cube.astype("<f4").tofile(out / "cube.f32")  # (row, col, band), band fastest
    labels.astype("<u2").tofile(out / "labels.u16")
    print(f"wrote {out}: {width}x{height}x{bands}, {header['classes']} classes, "
          f"{int((labels > 0).sum())} labeled pixels")


if __name__ == "__main__":
    main()
