// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "json.hpp"
#include "xtrack/error.hpp"
#include "xtrack/image.hpp"
#include "xtrack/rng.hpp"

namespace xtrack {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Color = std::array<double, 3>;

// Static scene properties, always derived from the seed in this order so a
// frame renders identically no matter which frames were rendered before it.
struct Palette {
    Color target_a{}, target_b{};
    double occluder_gray = 0.0;
    struct Distractor {
        bool ellipse = false;
        Color color{};
        double size = 0.0;
        Trajectory traj;
    };
    std::vector<Distractor> distractors;
};

Palette derive_palette(const SceneScript& s) {
    Rng rng(s.seed);
    Palette p;
    for (double& v : p.target_a) v = rng.uniform(0.65, 0.95);
    for (double& v : p.target_b) v = rng.uniform(0.05, 0.35);
    p.occluder_gray = rng.uniform(0.38, 0.50);
    p.distractors.reserve(static_cast<size_t>(s.distractors));
    for (int i = 0; i < s.distractors; ++i) {
        Palette::Distractor d;
        d.ellipse = (i % 2 == 0);
        for (double& v : d.color) v = rng.uniform(0.35, 0.80);
        d.size = s.target.size * rng.uniform(0.6, 1.1);
        d.traj.amp_x = rng.uniform(0.3, 0.9);
        d.traj.amp_y = rng.uniform(0.3, 0.9);
        d.traj.freq_x = rng.uniform(0.4, 1.6);
        d.traj.freq_y = rng.uniform(0.4, 1.6);
        d.traj.phase_x = rng.uniform(0.0, 2 * kPi);
        d.traj.phase_y = rng.uniform(0.0, 2 * kPi);
        p.distractors.push_back(d);
    }
    return p;
}

struct Extent {
    double w = 0.0, h = 0.0;
};

// Deformation: a slow size cycle plus a faster aspect skew.
Extent target_extent(const SceneScript& s, int t) {
    double scale = 1.0 + s.deform.scale_amp * std::sin(2 * kPi * t / s.deform.period);
    double aspect = 1.0 + s.deform.aspect_amp * std::sin(4 * kPi * t / s.deform.period + 1.0);
    return {s.target.size * scale * aspect, s.target.size * scale / aspect};
}

Extent max_target_extent(const SceneScript& s) {
    double grow = (1.0 + s.deform.scale_amp);
    return {s.target.size * grow * (1.0 + s.deform.aspect_amp),
            s.target.size * grow / (1.0 - s.deform.aspect_amp)};
}

double axis_center(double image_extent, double box_extent, double max_box_extent, double amp,
                   double freq, double phase, int t, int frames) {
    double range = std::max(0.0, (image_extent - max_box_extent) / 2.0);
    double raw = image_extent / 2.0 + amp * range * std::sin(2 * kPi * freq * t / frames + phase);
    double half = std::min(box_extent, image_extent) / 2.0;
    return std::clamp(raw, half, image_extent - half);
}

BBox traj_box(const SceneScript& s, const Trajectory& traj, Extent e, Extent e_max, int t) {
    BBox b;
    b.w = e.w;
    b.h = e.h;
    b.cx = axis_center(s.width, e.w, e_max.w, traj.amp_x, traj.freq_x, traj.phase_x, t, s.frames);
    b.cy = axis_center(s.height, e.h, e_max.h, traj.amp_y, traj.freq_y, traj.phase_y, t, s.frames);
    return b;
}

double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

struct Canvas {
    int w = 0, h = 0;
    std::vector<double> pix;  // 3 planes
    double& at(int k, int r, int c) { return pix[(static_cast<size_t>(k) * h + r) * w + c]; }
    double at(int k, int r, int c) const { return pix[(static_cast<size_t>(k) * h + r) * w + c]; }
};

// Paints a shape over the box; color_fn maps box-local pixel offsets (u, v)
// to a color. Pixels are covered when their centers fall inside the shape.
template <typename ColorFn>
void paint(Canvas& cv, const BBox& b, bool ellipse, ColorFn color_fn) {
    int r0 = std::max(0, static_cast<int>(std::floor(b.cy - b.h / 2)));
    int r1 = std::min(cv.h, static_cast<int>(std::ceil(b.cy + b.h / 2)) + 1);
    int c0 = std::max(0, static_cast<int>(std::floor(b.cx - b.w / 2)));
    int c1 = std::min(cv.w, static_cast<int>(std::ceil(b.cx + b.w / 2)) + 1);
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) {
            double px = c + 0.5, py = r + 0.5;
            bool inside;
            if (ellipse) {
                double dx = (px - b.cx) / (b.w / 2), dy = (py - b.cy) / (b.h / 2);
                inside = dx * dx + dy * dy <= 1.0;
            } else {
                inside = std::abs(px - b.cx) <= b.w / 2 && std::abs(py - b.cy) <= b.h / 2;
            }
            if (!inside) continue;
            Color col = color_fn(px - (b.cx - b.w / 2), py - (b.cy - b.h / 2));
            for (int k = 0; k < 3; ++k) cv.at(k, r, c) = col[k];
        }
}

Color texture_color(const SceneScript& s, const Palette& pal, double u, double v) {
    if (s.target.texture == "solid") return pal.target_a;
    double cell = std::max(2.0, s.target.size / 4.0);
    if (s.target.texture == "checker") {
        long idx = static_cast<long>(std::floor(u / cell)) + static_cast<long>(std::floor(v / cell));
        return ((idx % 2 + 2) % 2) == 0 ? pal.target_a : pal.target_b;
    }
    double stripe = std::max(2.0, s.target.size / 5.0);
    long band = static_cast<long>(std::floor(v / stripe));
    return ((band % 2 + 2) % 2) == 0 ? pal.target_a : pal.target_b;
}

void require_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                  const char* where) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (item.key() == a) ok = true;
        if (!ok)
            throw ValidationError("unknown key '" + item.key() + "' in " + where);
    }
}

}  // namespace

BBox scene_target_box(const SceneScript& script, int t) {
    return traj_box(script, script.target.traj, target_extent(script, t),
                    max_target_extent(script), t);
}

double max_scripted_speed(const SceneScript& script) {
    const SceneScript& s = script;
    Extent e_max = max_target_extent(s);
    double range_x = std::max(0.0, (s.width - e_max.w) / 2.0);
    double range_y = std::max(0.0, (s.height - e_max.h) / 2.0);
    // Per-frame phase steps bound |sin(a) - sin(b)| <= |a - b|.
    double vx = s.target.traj.amp_x * range_x * 2 * kPi * s.target.traj.freq_x / s.frames;
    double vy = s.target.traj.amp_y * range_y * 2 * kPi * s.target.traj.freq_y / s.frames;
    // Deformation shifts the clamp bounds by at most half the extent change.
    double dscale = s.deform.scale_amp * 2 * kPi / s.deform.period;
    double daspect = s.deform.aspect_amp * 4 * kPi / s.deform.period;
    double grow = 1.0 + s.deform.scale_amp;
    double shrink = 1.0 - s.deform.aspect_amp;
    double dw = s.target.size * (dscale * (1.0 + s.deform.aspect_amp) + grow * daspect);
    double dh = s.target.size * (dscale / shrink + grow * daspect / (shrink * shrink));
    return std::hypot(vx + dw / 2.0, vy + dh / 2.0);
}

bool occluded_at(const SceneScript& script, int t) {
    for (const OccluderSpec& o : script.occluders)
        if (t >= o.start && t < o.end) return true;
    return false;
}

RenderedFrame render_frame(const SceneScript& script, int t) {
    script.validate();
    if (t < 0 || t >= script.frames)
        throw DomainError("render_frame: frame " + std::to_string(t) + " outside clip of " +
                          std::to_string(script.frames));
    Palette pal = derive_palette(script);
    int W = script.width, H = script.height;
    Canvas cv{W, H, std::vector<double>(static_cast<size_t>(3) * H * W)};

    // Background: a vertical gradient with slightly warm top-to-bottom tint.
    const Color base = {0.32, 0.30, 0.28};
    for (int k = 0; k < 3; ++k)
        for (int r = 0; r < H; ++r) {
            double v = base[k] + 0.25 * (H > 1 ? static_cast<double>(r) / (H - 1) : 0.0);
            for (int c = 0; c < W; ++c) cv.at(k, r, c) = v;
        }

    Extent d_e;
    for (const Palette::Distractor& d : pal.distractors) {
        d_e.w = d_e.h = d.size;
        BBox db = traj_box(script, d.traj, d_e, d_e, t);
        paint(cv, db, d.ellipse, [&](double, double) { return d.color; });
    }

    RenderedFrame out;
    out.box = scene_target_box(script, t);
    out.occluded = occluded_at(script, t);
    bool ellipse = script.target.shape == "ellipse";
    paint(cv, out.box, ellipse,
          [&](double u, double v) { return texture_color(script, pal, u, v); });

    if (out.occluded) {
        // One opaque patch sized to hide `coverage` of the target area, using
        // the widest active interval's coverage.
        double cov = 0.0;
        for (const OccluderSpec& o : script.occluders)
            if (t >= o.start && t < o.end) cov = std::max(cov, o.coverage);
        BBox ob = out.box;
        ob.w = out.box.w * std::sqrt(cov);
        ob.h = out.box.h * std::sqrt(cov);
        Color oc = {pal.occluder_gray, pal.occluder_gray, pal.occluder_gray};
        paint(cv, ob, false, [&](double, double) { return oc; });
    }

    // The auxiliary modality reads the clean render, not the sensor noise.
    std::vector<double> xs(static_cast<size_t>(H) * W);
    auto lum_at = [&](int r, int c) {
        r = std::clamp(r, 0, H - 1);
        c = std::clamp(c, 0, W - 1);
        return luminance(cv.at(0, r, c), cv.at(1, r, c), cv.at(2, r, c));
    };
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double v;
            if (script.x_transform == "invert") {
                v = 1.0 - lum_at(r, c);
            } else if (script.x_transform == "edge") {
                double gx = (lum_at(r, c + 1) - lum_at(r, c - 1)) / 2.0;
                double gy = (lum_at(r + 1, c) - lum_at(r - 1, c)) / 2.0;
                v = std::clamp(2.0 * (std::abs(gx) + std::abs(gy)), 0.0, 1.0);
            } else {  // threshold
                v = lum_at(r, c) > 0.5 ? 1.0 : 0.0;
            }
            xs[static_cast<size_t>(r) * W + c] = v;
        }

    if (script.noise_std > 0.0) {
        Rng noise(script.seed ^ (0x9e3779b97f4a7c15ull * (static_cast<uint64_t>(t) + 1)));
        for (double& v : cv.pix) v = std::clamp(v + script.noise_std * noise.normal(), 0.0, 1.0);
        for (double& v : xs) v = std::clamp(v + script.noise_std * noise.normal(), 0.0, 1.0);
    }

    out.rgb = Tensor::from_data({3, H, W}, cv.pix);
    out.x = Tensor::from_data({1, H, W}, xs);
    return out;
}

void SceneScript::validate() const {
    if (frames < 1 || frames > 100000) throw ValidationError("frames out of range");
    if (width < 16 || width > 2048 || height < 16 || height > 2048)
        throw ValidationError("image extent out of range [16, 2048]");
    if (target.shape != "rect" && target.shape != "ellipse")
        throw ValidationError("unknown target shape '" + target.shape + "'");
    if (target.texture != "solid" && target.texture != "checker" && target.texture != "stripes")
        throw ValidationError("unknown target texture '" + target.texture + "'");
    if (x_transform != "invert" && x_transform != "edge" && x_transform != "threshold")
        throw ValidationError("unknown x_transform '" + x_transform + "'");
    if (deform.scale_amp < 0.0 || deform.scale_amp > 0.8 || deform.aspect_amp < 0.0 ||
        deform.aspect_amp > 0.5 || deform.period < 2.0)
        throw ValidationError("deformation parameters out of range");
    Extent e_max = max_target_extent(*this);
    if (target.size < 4.0 || e_max.w > std::min(width, height) || e_max.h > std::min(width, height))
        throw ValidationError("target size does not fit the image");
    double floor_w = target.size * (1.0 - deform.scale_amp) * (1.0 - deform.aspect_amp);
    if (floor_w < 2.0) throw ValidationError("deformation collapses the target");
    auto check_traj = [](const Trajectory& tr) {
        if (tr.amp_x < 0 || tr.amp_x > 1 || tr.amp_y < 0 || tr.amp_y > 1)
            throw ValidationError("trajectory amplitude outside [0, 1]");
        if (tr.freq_x < 0 || tr.freq_x > 64 || tr.freq_y < 0 || tr.freq_y > 64)
            throw ValidationError("trajectory frequency outside [0, 64]");
    };
    check_traj(target.traj);
    if (distractors < 0 || distractors > 8) throw ValidationError("distractors outside [0, 8]");
    for (const OccluderSpec& o : occluders) {
        if (o.start < 0 || o.end > frames || o.start >= o.end)
            throw ValidationError("occluder interval [" + std::to_string(o.start) + ", " +
                                  std::to_string(o.end) + ") invalid for " +
                                  std::to_string(frames) + " frames");
        if (!(o.coverage > 0.0) || o.coverage > 1.0)
            throw ValidationError("occluder coverage outside (0, 1]");
    }
    if (noise_std < 0.0 || noise_std > 0.5) throw ValidationError("noise_std outside [0, 0.5]");
}

SceneScript SceneScript::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed scene script: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("scene script must be a JSON object");
    SceneScript s;
    try {
        require_keys(j,
                     {"seed", "frames", "width", "height", "target", "distractors", "occluders",
                      "deform", "x_transform", "noise_std"},
                     "scene script");
        s.seed = j.value("seed", s.seed);
        s.frames = j.value("frames", s.frames);
        s.width = j.value("width", s.width);
        s.height = j.value("height", s.height);
        if (j.contains("target")) {
            const nlohmann::json& jt = j.at("target");
            require_keys(jt, {"shape", "texture", "size", "trajectory"}, "target");
            s.target.shape = jt.value("shape", s.target.shape);
            s.target.texture = jt.value("texture", s.target.texture);
            s.target.size = jt.value("size", s.target.size);
            if (jt.contains("trajectory")) {
                const nlohmann::json& jj = jt.at("trajectory");
                require_keys(jj, {"amp_x", "amp_y", "freq_x", "freq_y", "phase_x", "phase_y"},
                             "trajectory");
                Trajectory& tr = s.target.traj;
                tr.amp_x = jj.value("amp_x", tr.amp_x);
                tr.amp_y = jj.value("amp_y", tr.amp_y);
                tr.freq_x = jj.value("freq_x", tr.freq_x);
                tr.freq_y = jj.value("freq_y", tr.freq_y);
                tr.phase_x = jj.value("phase_x", tr.phase_x);
                tr.phase_y = jj.value("phase_y", tr.phase_y);
            }
        }
        s.distractors = j.value("distractors", s.distractors);
        if (j.contains("occluders")) {
            if (!j.at("occluders").is_array())
                throw ValidationError("occluders must be an array");
            for (const nlohmann::json& jo : j.at("occluders")) {
                require_keys(jo, {"start", "end", "coverage"}, "occluder");
                OccluderSpec o;
                o.start = jo.value("start", o.start);
                o.end = jo.value("end", o.end);
                o.coverage = jo.value("coverage", o.coverage);
                s.occluders.push_back(o);
            }
        }
        if (j.contains("deform")) {
            const nlohmann::json& jd = j.at("deform");
            require_keys(jd, {"scale_amp", "aspect_amp", "period"}, "deform");
            s.deform.scale_amp = jd.value("scale_amp", s.deform.scale_amp);
            s.deform.aspect_amp = jd.value("aspect_amp", s.deform.aspect_amp);
            s.deform.period = jd.value("period", s.deform.period);
        }
        s.x_transform = j.value("x_transform", s.x_transform);
        s.noise_std = j.value("noise_std", s.noise_std);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed scene script: ") + e.what());
    }
    s.validate();
    return s;
}

std::string SceneScript::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["frames"] = frames;
    j["width"] = width;
    j["height"] = height;
    j["target"] = {{"shape", target.shape},
                   {"texture", target.texture},
                   {"size", target.size},
                   {"trajectory",
                    {{"amp_x", target.traj.amp_x},
                     {"amp_y", target.traj.amp_y},
                     {"freq_x", target.traj.freq_x},
                     {"freq_y", target.traj.freq_y},
                     {"phase_x", target.traj.phase_x},
                     {"phase_y", target.traj.phase_y}}}};
    j["distractors"] = distractors;
    j["occluders"] = nlohmann::json::array();
    for (const OccluderSpec& o : occluders)
        j["occluders"].push_back({{"start", o.start}, {"end", o.end}, {"coverage", o.coverage}});
    j["deform"] = {{"scale_amp", deform.scale_amp},
                   {"aspect_amp", deform.aspect_amp},
                   {"period", deform.period}};
    j["x_transform"] = x_transform;
    j["noise_std"] = noise_std;
    return j.dump(2) + "\n";
}

namespace {

std::string frame_name(int t, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d.%s", t, ext);
    return buf;
}

}  // namespace

Sequence gen_sequence(const SceneScript& script, const std::string& dir) {
    script.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "rgb", ec);
    fs::create_directories(fs::path(dir) / "x", ec);
    if (ec) throw IoError("cannot create sequence directories under " + dir);

    Sequence seq;
    seq.width = script.width;
    seq.height = script.height;
    nlohmann::json frames = nlohmann::json::array();
    for (int t = 0; t < script.frames; ++t) {
        RenderedFrame f = render_frame(script, t);
        SequenceFrame sf;
        sf.rgb_path = "rgb/" + frame_name(t, "ppm");
        sf.x_path = "x/" + frame_name(t, "pgm");
        sf.box = f.box;
        sf.occluded = f.occluded;
        write_ppm((fs::path(dir) / sf.rgb_path).string(), f.rgb);
        write_pgm((fs::path(dir) / sf.x_path).string(), f.x);
        frames.push_back({{"rgb", sf.rgb_path},
                          {"x", sf.x_path},
                          {"box", {f.box.cx - f.box.w / 2, f.box.cy - f.box.h / 2, f.box.w, f.box.h}},
                          {"occluded", sf.occluded}});
        seq.frames.push_back(sf);
    }
    nlohmann::json j;
    j["width"] = seq.width;
    j["height"] = seq.height;
    j["frames"] = frames;
    std::ofstream out(fs::path(dir) / "anno.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + dir + "/anno.json");
    out << j.dump(2) << "\n";
    return seq;
}

Sequence load_sequence(const std::string& dir) {
    std::ifstream in(std::filesystem::path(dir) / "anno.json", std::ios::binary);
    if (!in) throw IoError("cannot open " + dir + "/anno.json");
    std::string text(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
    try {
        nlohmann::json j = nlohmann::json::parse(text);
        Sequence seq;
        seq.width = j.at("width").get<int>();
        seq.height = j.at("height").get<int>();
        for (const nlohmann::json& jf : j.at("frames")) {
            SequenceFrame sf;
            sf.rgb_path = jf.at("rgb").get<std::string>();
            sf.x_path = jf.at("x").get<std::string>();
            const nlohmann::json& b = jf.at("box");
            if (!b.is_array() || b.size() != 4)
                throw ValidationError("annotation box must be [x, y, w, h]");
            double x = b[0].get<double>(), y = b[1].get<double>();
            double w = b[2].get<double>(), h = b[3].get<double>();
            sf.box = BBox{x + w / 2, y + h / 2, w, h};
            sf.occluded = jf.value("occluded", false);
            seq.frames.push_back(sf);
        }
        if (seq.frames.empty()) throw ValidationError("annotation lists no frames");
        if (seq.width < 1 || seq.height < 1) throw ValidationError("bad annotation extent");
        return seq;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed annotations in " + dir + ": " + e.what());
    }
}

}  // namespace xtrack
