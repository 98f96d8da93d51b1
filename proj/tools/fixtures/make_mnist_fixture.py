#!/usr/bin/env python3
# Copyright 2026 The precis Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the bundled MNIST fixtures under data/.

Source digits come from the `mnist` npm package (10,000 MNIST digits stored
as per-class JSON arrays of 784 grayscale values). Fetch it with

    npm pack mnist && tar xzf mnist-*.tgz

and pass the extracted `package/src/digits` directory as --digits.

Outputs:
  data/mnist/test-images-idx3-ubyte   held-out digits (IDX, 2000 records)
  data/mnist/test-labels-idx1-ubyte
  data/lenet_toy.weights              PRECISW1 container
  data/mlp_toy.weights                PRECISW1 container

Training is a one-off fixture step; the C++ library only runs inference.
"""

import argparse
import json
import struct
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

SEED = 20161
TEST_COUNT = 2000


def load_digits(digits_dir: Path):
    images, labels = [], []
    for label in range(10):
        data = json.loads((digits_dir / f"{label}.json").read_text())["data"]
        arr = np.asarray(data, dtype=np.float64).reshape(-1, 28, 28)
        images.append(np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8))
        labels.append(np.full(arr.shape[0], label, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(SEED).permutation(len(labels))
    return images[order], labels[order]


def write_idx_images(path: Path, images: np.ndarray):
    with path.open("wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, images.shape[0], 28, 28))
        f.write(images.tobytes())


def write_idx_labels(path: Path, labels: np.ndarray):
    with path.open("wb") as f:
        f.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        f.write(labels.tobytes())


def write_container(path: Path, tensors):
    with path.open("wb") as f:
        f.write(b"PRECISW1")
        f.write(struct.pack("<I", len(tensors)))
        for name, value in tensors:
            arr = np.ascontiguousarray(value.detach().cpu().numpy(), dtype="<f4")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.tobytes())


def train(model, x, y, epochs):
    opt = torch.optim.Adam(model.parameters(), lr=2e-3)
    loss_fn = nn.CrossEntropyLoss()
    gen = torch.Generator().manual_seed(SEED)
    for epoch in range(epochs):
        perm = torch.randperm(x.shape[0], generator=gen)
        for start in range(0, x.shape[0], 64):
            idx = perm[start:start + 64]
            opt.zero_grad()
            loss = loss_fn(model(x[idx]), y[idx])
            loss.backward()
            opt.step()
    return model


def accuracy(model, x, y):
    with torch.no_grad():
        return (model(x).argmax(dim=1) == y).float().mean().item()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--digits", type=Path, required=True)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[2] / "data")
    args = parser.parse_args()

    torch.manual_seed(SEED)
    images, labels = load_digits(args.digits)
    train_images, train_labels = images[:-TEST_COUNT], labels[:-TEST_COUNT]
    test_images, test_labels = images[-TEST_COUNT:], labels[-TEST_COUNT:]

    (args.out / "mnist").mkdir(parents=True, exist_ok=True)
    write_idx_images(args.out / "mnist" / "test-images-idx3-ubyte", test_images)
    write_idx_labels(args.out / "mnist" / "test-labels-idx1-ubyte", test_labels)

    x = torch.from_numpy(train_images.astype(np.float32) / 255.0).unsqueeze(1)
    y = torch.from_numpy(train_labels.astype(np.int64))
    xt = torch.from_numpy(test_images.astype(np.float32) / 255.0).unsqueeze(1)
    yt = torch.from_numpy(test_labels.astype(np.int64))

    conv = nn.Conv2d(1, 4, kernel_size=5, stride=2)
    fc = nn.Linear(4 * 6 * 6, 10)
    lenet = nn.Sequential(conv, nn.ReLU(), nn.MaxPool2d(2), nn.Flatten(), fc)
    train(lenet, x, y, epochs=12)
    print(f"lenet_toy held-out top-1: {accuracy(lenet, xt, yt):.4f}")
    write_container(args.out / "lenet_toy.weights",
                    [("conv1.w", conv.weight), ("conv1.b", conv.bias),
                     ("fc1.w", fc.weight), ("fc1.b", fc.bias)])

    fc1 = nn.Linear(784, 16)
    fc2 = nn.Linear(16, 10)
    mlp = nn.Sequential(nn.Flatten(), fc1, nn.ReLU(), fc2)
    train(mlp, x, y, epochs=12)
    print(f"mlp_toy held-out top-1: {accuracy(mlp, xt, yt):.4f}")
    write_container(args.out / "mlp_toy.weights",
                    [("fc1.w", fc1.weight), ("fc1.b", fc1.bias),
                     ("fc2.w", fc2.weight), ("fc2.b", fc2.bias)])


if __name__ == "__main__":
    main()
