#!/usr/bin/env python3
"""Builds the desk-scale digit fixture: a 196-64-32-32-10 MLP and a test set.

Produces under tests/fixtures/digits/:
  model.json, weights.bin  -- the trained network (tanh hidden, softmax out)
  manifest.json, samples.bin, labels.bin -- 14x14 test images + labels

The 8x8 sklearn digits are bilinearly upsampled to 14x14 so the network
keeps a 196-wide input layer. The output layer is rescaled (argmax-invariant)
so logits stay inside the fxp8 dynamic range.
"""

import json
import struct
import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split
from sklearn.neural_network import MLPClassifier

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "digits"
SEED = 0


def upsample(images8):
    out = np.stack([zoom(img, 14 / 8, order=1) for img in images8])
    return np.clip(out, 0.0, 1.0)


def write_weights_blob(path, tensors):
    with open(path, "wb") as f:
        f.write(b"CVTW")
        f.write(struct.pack("<I", len(tensors)))
        for t in tensors:
            t = np.asarray(t, dtype=np.float64)
            f.write(struct.pack("<I", t.ndim))
            for d in t.shape:
                f.write(struct.pack("<I", d))
            f.write(t.astype("<f8").tobytes())


def main():
    digits = load_digits()
    images = digits.images / 16.0
    x = upsample(images).reshape(len(images), -1)
    y = digits.target

    x_train, x_test, y_train, y_test = train_test_split(
        x, y, test_size=600, random_state=SEED, stratify=y
    )

    clf = MLPClassifier(
        hidden_layer_sizes=(64, 32, 32),
        activation="tanh",
        alpha=1e-3,
        max_iter=4000,
        random_state=SEED,
        tol=1e-6,
    )
    clf.fit(x_train, y_train)
    print(f"train accuracy: {clf.score(x_train, y_train) * 100:.2f}%")
    print(f"test accuracy:  {clf.score(x_test, y_test) * 100:.2f}%")

    weights = [w.T.copy() for w in clf.coefs_]  # -> out x in
    biases = [b.copy() for b in clf.intercepts_]

    # Rescale the output layer so logits fit the fxp8 range (argmax-safe).
    hidden = x_train
    for w, b in zip(weights[:-1], biases[:-1]):
        hidden = np.tanh(hidden @ w.T + b)
    logits = hidden @ weights[-1].T + biases[-1]
    peak = np.abs(logits).max()
    target = 1.5
    if peak > target:
        gamma = target / peak
        weights[-1] *= gamma
        biases[-1] *= gamma
        print(f"output layer rescaled by {gamma:.4f} (peak logit {peak:.2f})")

    # report hidden pre-activation peaks (fxp8 clips at ~2)
    hidden = x_train
    for i, (w, b) in enumerate(zip(weights[:-1], biases[:-1])):
        pre = hidden @ w.T + b
        print(f"layer {i} pre-activation peak: {np.abs(pre).max():.2f} "
              f"(99.9%: {np.quantile(np.abs(pre), 0.999):.2f})")
        hidden = np.tanh(pre)

    OUT.mkdir(parents=True, exist_ok=True)
    tensors = []
    for w, b in zip(weights, biases):
        tensors.append(w)
        tensors.append(b)
    write_weights_blob(OUT / "weights.bin", tensors)

    model = {
        "name": "digits-mlp-196",
        "input_dim": 196,
        "layers": [
            {"kind": "dense", "out": 64, "activation": "tanh",
             "format": "fxp8", "accuracy": "accurate"},
            {"kind": "dense", "out": 32, "activation": "tanh",
             "format": "fxp8", "accuracy": "accurate"},
            {"kind": "dense", "out": 32, "activation": "tanh",
             "format": "fxp8", "accuracy": "accurate"},
            {"kind": "dense", "out": 10, "activation": "softmax",
             "format": "fxp8", "accuracy": "accurate"},
        ],
        "weights_file": "weights.bin",
    }
    (OUT / "model.json").write_text(json.dumps(model, indent=2) + "\n")

    with open(OUT / "samples.bin", "wb") as f:
        f.write(x_test.astype("<f8").tobytes())
    with open(OUT / "labels.bin", "wb") as f:
        f.write(y_test.astype(np.uint8).tobytes())
    manifest = {
        "samples": "samples.bin",
        "labels": "labels.bin",
        "count": len(y_test),
        "input_dim": 196,
        "classes": 10,
    }
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"fixture written to {OUT} ({len(y_test)} test samples)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
