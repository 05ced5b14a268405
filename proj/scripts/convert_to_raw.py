#!/usr/bin/env python3
"""Convert USPS and SVHN distributions to the OSSLRAW1 interchange format.

OSSLRAW1 layout (little-endian): b"OSSLRAW1", u32 count, u32 C, u32 H, u32 W,
u32 class_count, count*C*H*W float32 pixels in [0, 1], count u16 labels.

    convert_to_raw.py usps-libsvm usps.t.bz2 usps_test.raw
    convert_to_raw.py usps-h5 usps.h5 usps_test.raw [--split test]
    convert_to_raw.py svhn-mat test_32x32.mat svhn_test.raw
    convert_to_raw.py cifar101-npy cifar10.1_v6_data.npy cifar101_test.raw --labels cifar10.1_v6_labels.npy
"""

import argparse
import bz2
import struct
import sys

import numpy as np

MAGIC = b"OSSLRAW1"


def write_raw(path, images, labels, class_count):
    images = np.ascontiguousarray(images, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<u2")
    if images.ndim != 4 or images.shape[0] != labels.shape[0]:
        raise ValueError(f"images {images.shape} and labels {labels.shape} disagree")
    if not np.isfinite(images).all() or images.min(initial=0) < 0 or images.max(initial=0) > 1:
        raise ValueError("pixels must be finite and within [0, 1]")
    if labels.size and labels.max() >= class_count:
        raise ValueError(f"label {labels.max()} >= class_count {class_count}")
    n, c, h, w = images.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<5I", n, c, h, w, class_count))
        f.write(images.tobytes())
        f.write(labels.tobytes())
    print(f"{path}: {n} images, {c}x{h}x{w}, {class_count} classes")


def usps_libsvm(path):
    # LIBSVM distribution: "label idx:value ..." with labels 1..10 for digits 0..9
    # and 256 features in [-1, 1].
    opener = bz2.open if path.endswith(".bz2") else open
    images, labels = [], []
    with opener(path, "rt") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            label = int(float(parts[0]))
            pixels = np.full(256, -1.0)
            for item in parts[1:]:
                idx, value = item.split(":")
                pixels[int(idx) - 1] = float(value)
            images.append(np.clip((pixels + 1.0) / 2.0, 0.0, 1.0).reshape(1, 16, 16))
            labels.append(label - 1)
    return np.stack(images), np.array(labels)


def usps_h5(path, split):
    import h5py

    with h5py.File(path, "r") as f:
        group = f[split]
        data = np.asarray(group["data"], dtype=np.float64)
        target = np.asarray(group["target"])
    return np.clip(data, 0.0, 1.0).reshape(-1, 1, 16, 16), target.astype(np.int64)


def svhn_mat(path):
    from scipy.io import loadmat

    mat = loadmat(path)
    x = mat["X"]  # [32, 32, 3, N] uint8
    y = mat["y"].reshape(-1).astype(np.int64)
    images = np.transpose(x, (3, 2, 0, 1)).astype(np.float64) / 255.0
    return images, y % 10  # digit 0 is stored as label 10


def cifar101_npy(path, labels_path):
    # [N, 32, 32, 3] uint8 images and a separate label vector.
    if labels_path is None:
        raise SystemExit("cifar101-npy needs --labels")
    x = np.load(path)
    y = np.load(labels_path).reshape(-1).astype(np.int64)
    return np.transpose(x, (0, 3, 1, 2)).astype(np.float64) / 255.0, y


def main(argv):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("source", choices=["usps-libsvm", "usps-h5", "svhn-mat", "cifar101-npy"])
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--split", default="test", help="group inside usps.h5 (default: test)")
    p.add_argument("--labels", help="label .npy for cifar101-npy")
    args = p.parse_args(argv)
    if args.source == "usps-libsvm":
        images, labels = usps_libsvm(args.input)
    elif args.source == "usps-h5":
        images, labels = usps_h5(args.input, args.split)
    elif args.source == "svhn-mat":
        images, labels = svhn_mat(args.input)
    else:
        images, labels = cifar101_npy(args.input, args.labels)
    write_raw(args.output, images, labels, 10)


if __name__ == "__main__":
    main(sys.argv[1:])
