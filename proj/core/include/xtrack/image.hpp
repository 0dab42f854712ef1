// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "xtrack/tensor.hpp"

namespace xtrack {

// Images are plain tensors [channels, h, w] with values in [0, 1] and no
// gradient tracking. Files use the binary netpbm formats: P6 (3 channels)
// and P5 (1 channel), always 8-bit with maxval 255.
//
// The byte mapping is fixed so renders are byte-identical across runs:
// write: round(clamp(v, 0, 1) * 255), read: byte / 255.

// Throws ShapeError unless image is [3, h, w] (PPM) / [1, h, w] (PGM);
// IoError when the file cannot be created.
void write_ppm(const std::string& path, const Tensor& image);
void write_pgm(const std::string& path, const Tensor& image);

// Throw IoError on missing files, bad magic, maxval != 255, or truncated
// pixel data. Comments (#) and arbitrary whitespace in headers are accepted.
Tensor read_ppm(const std::string& path);  // [3, h, w]
Tensor read_pgm(const std::string& path);  // [1, h, w]

// Square window of side `side` pixels centered at (cx, cy), bilinearly
// resampled to [channels, out, out]. Samples outside the image read as 0.
// Throws ShapeError on a non-image tensor, DomainError when side or out is
// not positive or any geometry argument is non-finite.
Tensor crop_resize(const Tensor& image, double cx, double cy, double side, int out);

}  // namespace xtrack
