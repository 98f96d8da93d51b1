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
"""Writes data/accumulate_toy.weights: a fully connected layer with 100
inputs, two neurons and no bias. Fed with an all-ones input (`--data fill:1`):

  neuron 0: every weight is 4.0, so each MAC adds 4.0 to the running sum.
  neuron 1: the first weight is 256.0 and the other 99 are 4.0, so the sum
            starts at 256 and then receives 99 increments of 4.0.
"""

import struct
from pathlib import Path


def main():
    out = Path(__file__).resolve().parents[2] / "data" / "accumulate_toy.weights"
    name = b"fc1.w"
    blob = bytearray(b"PRECISW1")
    blob += struct.pack("<I", 1)
    blob += struct.pack("<H", len(name)) + name
    blob += struct.pack("<B", 2) + struct.pack("<II", 2, 100)
    blob += struct.pack("<100f", *([4.0] * 100))
    blob += struct.pack("<100f", *([256.0] + [4.0] * 99))
    out.write_bytes(bytes(blob))
    print(f"wrote {out} ({len(blob)} bytes)")


if __name__ == "__main__":
    main()
