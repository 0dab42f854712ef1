// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "xtrack/error.hpp"

namespace xtrack {

namespace {

uint8_t quantize(double v) {
    double c = std::clamp(v, 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

void check_image(const Tensor& image, int channels, const char* what) {
    if (image.rank() != 3 || image.dim(0) != channels)
        throw ShapeError(std::string(what) + " expects [" + std::to_string(channels) +
                         ", h, w], got " + shape_str(image.shape()));
    if (image.dim(1) < 1 || image.dim(2) < 1)
        throw ShapeError(std::string(what) + ": empty image " + shape_str(image.shape()));
}

// Interleaves [channels, h, w] planes into the netpbm pixel stream.
void write_netpbm(const std::string& path, const Tensor& image, const char* magic) {
    int ch = image.dim(0), h = image.dim(1), w = image.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << magic << "\n" << w << " " << h << "\n255\n";
    const std::vector<double>& v = image.values();
    std::vector<uint8_t> row(static_cast<size_t>(w) * ch);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k)
                row[static_cast<size_t>(c) * ch + k] =
                    quantize(v[(static_cast<size_t>(k) * h + r) * w + c]);
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("short write to " + path);
}

// Reads one whitespace-delimited header token, skipping # comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

int parse_dim(const std::string& tok, const std::string& path) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
        throw IoError("bad header field '" + tok + "' in " + path);
    long v = std::stol(tok);
    if (v < 1 || v > 1 << 20) throw IoError("header value out of range in " + path);
    return static_cast<int>(v);
}

Tensor read_netpbm(const std::string& path, const char* magic, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    if (next_token(in) != magic)
        throw IoError("bad magic in " + path + ", expected " + magic);
    int w = parse_dim(next_token(in), path);
    int h = parse_dim(next_token(in), path);
    if (parse_dim(next_token(in), path) != 255) throw IoError("unsupported maxval in " + path);
    // The header ends with exactly one whitespace byte, already consumed by
    // next_token's terminating isspace read.
    size_t count = static_cast<size_t>(w) * h * channels;
    std::vector<uint8_t> bytes(count);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
    if (static_cast<size_t>(in.gcount()) != count)
        throw IoError("truncated pixel data in " + path);
    std::vector<double> v(count);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < channels; ++k)
                v[(static_cast<size_t>(k) * h + r) * w + c] =
                    bytes[(static_cast<size_t>(r) * w + c) * channels + k] / 255.0;
    return Tensor::from_data({channels, h, w}, v);
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
    check_image(image, 3, "write_ppm");
    write_netpbm(path, image, "P6");
}

void write_pgm(const std::string& path, const Tensor& image) {
    check_image(image, 1, "write_pgm");
    write_netpbm(path, image, "P5");
}

Tensor read_ppm(const std::string& path) { return read_netpbm(path, "P6", 3); }

Tensor read_pgm(const std::string& path) { return read_netpbm(path, "P5", 1); }

Tensor crop_resize(const Tensor& image, double cx, double cy, double side, int out) {
    if (image.rank() != 3)
        throw ShapeError("crop_resize expects [channels, h, w], got " + shape_str(image.shape()));
    if (!(side > 0.0) || !std::isfinite(side) || !std::isfinite(cx) || !std::isfinite(cy))
        throw DomainError("crop_resize: bad window center/side");
    if (out < 1) throw DomainError("crop_resize: output size must be positive");
    int ch = image.dim(0), h = image.dim(1), w = image.dim(2);
    const std::vector<double>& src = image.values();
    auto sample = [&](int k, int r, int c) -> double {
        if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;
        return src[(static_cast<size_t>(k) * h + r) * w + c];
    };
    double scale = side / out;
    double x0 = cx - side / 2.0, y0 = cy - side / 2.0;
    std::vector<double> dst(static_cast<size_t>(ch) * out * out);
    for (int r = 0; r < out; ++r) {
        // Pixel-center convention: output sample (r, c) maps to the source
        // coordinate of the window point ((c + 0.5) scale, (r + 0.5) scale).
        double sy = y0 + (r + 0.5) * scale - 0.5;
        int ry = static_cast<int>(std::floor(sy));
        double fy = sy - ry;
        for (int c = 0; c < out; ++c) {
            double sx = x0 + (c + 0.5) * scale - 0.5;
            int rx = static_cast<int>(std::floor(sx));
            double fx = sx - rx;
            for (int k = 0; k < ch; ++k) {
                double v00 = sample(k, ry, rx), v01 = sample(k, ry, rx + 1);
                double v10 = sample(k, ry + 1, rx), v11 = sample(k, ry + 1, rx + 1);
                double top = v00 + (v01 - v00) * fx;
                double bot = v10 + (v11 - v10) * fx;
                dst[(static_cast<size_t>(k) * out + r) * out + c] = top + (bot - top) * fy;
            }
        }
    }
    return Tensor::from_data({ch, out, out}, dst);
}

}  // namespace xtrack
