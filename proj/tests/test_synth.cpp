// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "xtrack/error.hpp"
#include "xtrack/image.hpp"
#include "xtrack/metrics.hpp"
#include "xtrack/synth.hpp"

using namespace xtrack;

namespace {

SceneScript static_script() {
    SceneScript s;
    s.seed = 11;
    s.frames = 4;
    s.width = 64;
    s.height = 64;
    s.target.size = 16;
    s.target.traj.amp_x = 0.0;
    s.target.traj.amp_y = 0.0;
    return s;
}

double px(const Tensor& img, int k, int r, int c) {
    return img.at(static_cast<size_t>((k * img.dim(1) + r) * img.dim(2) + c));
}

double bg(int k, int r, int h) {
    const double base[3] = {0.32, 0.30, 0.28};
    return base[k] + 0.25 * static_cast<double>(r) / (h - 1);
}

std::filesystem::path tmp_dir(const std::string& leaf) {
    auto dir = std::filesystem::temp_directory_path() / "xtrack_synth_tests" / leaf;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<uint8_t> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("static solid target renders as one bright patch on the analytic background") {
    SceneScript s = static_script();
    RenderedFrame f = render_frame(s, 0);
    REQUIRE(f.rgb.shape() == Shape{3, 64, 64});
    REQUIRE(f.x.shape() == Shape{1, 64, 64});
    CHECK(f.box.cx == 32.0);
    CHECK(f.box.cy == 32.0);
    CHECK(f.box.w == 16.0);
    CHECK(f.box.h == 16.0);
    // Box spans pixel columns/rows 24..39; everything else is background.
    double target_r = px(f.rgb, 0, 32, 32);
    CHECK(target_r >= 0.65);
    CHECK(target_r <= 0.95);
    for (int r = 24; r < 40; ++r)
        for (int c = 24; c < 40; ++c) {
            CHECK(px(f.rgb, 0, r, c) == target_r);  // solid texture: single color
        }
    for (int k = 0; k < 3; ++k) {
        CHECK(px(f.rgb, k, 0, 0) == doctest::Approx(bg(k, 0, 64)).epsilon(1e-15));
        CHECK(px(f.rgb, k, 63, 5) == doctest::Approx(bg(k, 63, 64)).epsilon(1e-15));
        CHECK(px(f.rgb, k, 23, 32) == doctest::Approx(bg(k, 23, 64)).epsilon(1e-15));
        CHECK(px(f.rgb, k, 32, 40) == doctest::Approx(bg(k, 32, 64)).epsilon(1e-15));
    }
}

TEST_CASE("ellipse leaves the box corners uncovered, rect fills them") {
    SceneScript s = static_script();
    RenderedFrame rect = render_frame(s, 0);
    s.target.shape = "ellipse";
    RenderedFrame ell = render_frame(s, 0);
    // Corner pixel of the box: inside for the rect, background for the ellipse.
    CHECK(px(rect.rgb, 0, 24, 24) != doctest::Approx(bg(0, 24, 64)).epsilon(1e-12));
    CHECK(px(ell.rgb, 0, 24, 24) == doctest::Approx(bg(0, 24, 64)).epsilon(1e-15));
    CHECK(px(ell.rgb, 0, 32, 32) == px(rect.rgb, 0, 32, 32));  // same palette center
}

TEST_CASE("checker texture alternates two colors anchored at the box origin") {
    SceneScript s = static_script();
    s.target.texture = "checker";
    RenderedFrame f = render_frame(s, 0);
    // Cell size = 16 / 4 = 4: (24..27) vs (28..31) columns flip parity.
    double a = px(f.rgb, 0, 25, 25), b = px(f.rgb, 0, 25, 29);
    CHECK(a != b);
    CHECK(px(f.rgb, 0, 29, 29) == a);  // diagonal cell returns to the first color
    CHECK(px(f.rgb, 0, 29, 25) == b);
    // Bright and dark palettes are disjoint ranges.
    CHECK(std::max(a, b) >= 0.65);
    CHECK(std::min(a, b) <= 0.35);
}

TEST_CASE("stripes vary along y only") {
    SceneScript s = static_script();
    s.target.texture = "stripes";
    RenderedFrame f = render_frame(s, 0);
    for (int c = 25; c < 39; ++c) CHECK(px(f.rgb, 0, 25, c) == px(f.rgb, 0, 25, 25));
    bool found_band = false;
    for (int r = 25; r < 39; ++r)
        if (px(f.rgb, 0, r, 25) != px(f.rgb, 0, 25, 25)) found_band = true;
    CHECK(found_band);
}

TEST_CASE("x modality transforms are exact functions of the clean luminance") {
    SceneScript s = static_script();
    SUBCASE("invert") {
        RenderedFrame f = render_frame(s, 0);
        for (int r = 0; r < 64; r += 7)
            for (int c = 0; c < 64; c += 7) {
                double lum = 0.299 * px(f.rgb, 0, r, c) + 0.587 * px(f.rgb, 1, r, c) +
                             0.114 * px(f.rgb, 2, r, c);
                CHECK(px(f.x, 0, r, c) == 1.0 - lum);
            }
    }
    SUBCASE("edge responds at the target boundary, not inside a solid fill") {
        s.x_transform = "edge";
        RenderedFrame f = render_frame(s, 0);
        CHECK(px(f.x, 0, 32, 32) == 0.0);  // constant color, zero gradient
        CHECK(px(f.x, 0, 32, 24) > 0.1);   // left edge of the box
    }
    SUBCASE("threshold is binary") {
        s.x_transform = "threshold";
        RenderedFrame f = render_frame(s, 0);
        bool saw0 = false, saw1 = false;
        for (double v : f.x.values()) {
            CHECK((v == 0.0 || v == 1.0));
            (v == 0.0 ? saw0 : saw1) = true;
        }
        CHECK(saw0);
        CHECK(saw1);
    }
}

TEST_CASE("occluder hides the scripted fraction of the target during its interval") {
    SceneScript s = static_script();
    s.frames = 6;
    s.occluders = {{2, 4, 0.5}};
    SceneScript clear = s;
    clear.occluders.clear();
    for (int t = 0; t < 6; ++t) {
        RenderedFrame with = render_frame(s, t);
        RenderedFrame without = render_frame(clear, t);
        CHECK(with.occluded == (t >= 2 && t < 4));
        CHECK(without.occluded == false);
        int diff = 0;
        for (size_t i = 0; i < with.rgb.values().size(); ++i)
            if (with.rgb.values()[i] != without.rgb.values()[i]) ++diff;
        diff /= 3;  // planes
        double area = with.box.w * with.box.h;
        if (with.occluded) {
            CHECK(diff >= 0.40 * area);
            CHECK(diff <= 0.60 * area);
        } else {
            CHECK(diff == 0);
        }
    }
}

TEST_CASE("per-frame drift never exceeds the scripted speed bound") {
    SceneScript fast;
    fast.seed = 5;
    fast.frames = 30;
    fast.width = 96;
    fast.height = 96;
    fast.target.size = 12;
    fast.target.traj = {0.8, 0.6, 1.5, 1.0, 0.3, 1.1};
    fast.deform = {0.3, 0.2, 12.0};
    SceneScript slow = fast;
    slow.target.traj = {0.2, 0.2, 0.5, 0.25, 0.0, 0.0};
    slow.deform = {0.0, 0.0, 24.0};
    for (const SceneScript& s : {fast, slow}) {
        double bound = max_scripted_speed(s);
        double worst = 0.0;
        for (int t = 1; t < s.frames; ++t) {
            BBox a = scene_target_box(s, t - 1), b = scene_target_box(s, t);
            worst = std::max(worst, std::hypot(b.cx - a.cx, b.cy - a.cy));
        }
        CHECK(worst <= bound + 1e-9);
        CHECK(worst > 0.0);
    }
    CHECK(max_scripted_speed(slow) < max_scripted_speed(fast));
}

TEST_CASE("deformation sweeps the scripted size swing and boxes stay inside") {
    SceneScript s = static_script();
    s.frames = 24;
    s.deform = {0.4, 0.0, 24.0};
    double wmin = 1e9, wmax = 0.0;
    for (int t = 0; t < s.frames; ++t) {
        BBox b = scene_target_box(s, t);
        wmin = std::min(wmin, b.w);
        wmax = std::max(wmax, b.w);
        CHECK(b.w == b.h);  // no aspect skew
        CHECK(b.cx - b.w / 2 >= 0.0);
        CHECK(b.cx + b.w / 2 <= s.width);
    }
    CHECK(wmax / wmin >= 2.0);
    CHECK(wmax == doctest::Approx(16.0 * 1.4).epsilon(1e-12));
    CHECK(wmin == doctest::Approx(16.0 * 0.6).epsilon(1e-12));

    SUBCASE("full-amplitude trajectories stay clamped inside the image") {
        s.target.traj = {1.0, 1.0, 3.0, 2.0, 0.7, 0.2};
        for (int t = 0; t < s.frames; ++t) {
            BBox b = scene_target_box(s, t);
            CHECK(b.cx - b.w / 2 >= -1e-12);
            CHECK(b.cx + b.w / 2 <= s.width + 1e-12);
            CHECK(b.cy - b.h / 2 >= -1e-12);
            CHECK(b.cy + b.h / 2 <= s.height + 1e-12);
        }
    }
}

TEST_CASE("rendering is deterministic and distractors/noise actually draw") {
    SceneScript s = static_script();
    s.distractors = 2;
    s.noise_std = 0.03;
    RenderedFrame a = render_frame(s, 1);
    RenderedFrame b = render_frame(s, 1);
    CHECK(a.rgb.values() == b.rgb.values());
    CHECK(a.x.values() == b.x.values());

    SceneScript plain = s;
    plain.distractors = 0;
    plain.noise_std = 0.0;
    RenderedFrame c = render_frame(plain, 1);
    CHECK(a.rgb.values() != c.rgb.values());

    SceneScript just_noise = plain;
    just_noise.noise_std = 0.03;
    RenderedFrame d = render_frame(just_noise, 1);
    CHECK(d.rgb.values() != c.rgb.values());
    //

    SceneScript just_distractors = s;
    just_distractors.noise_std = 0.0;
    RenderedFrame e = render_frame(just_distractors, 1);
    CHECK(e.rgb.values() != c.rgb.values());
}

TEST_CASE("gen_sequence writes the documented layout and is byte-identical across runs") {
    SceneScript s = static_script();
    s.frames = 3;
    s.target.traj.amp_x = 0.4;
    s.noise_std = 0.02;
    auto dir_a = tmp_dir("seq_a");
    auto dir_b = tmp_dir("seq_b");
    Sequence seq = gen_sequence(s, dir_a.string());
    gen_sequence(s, dir_b.string());

    REQUIRE(seq.frames.size() == 3);
    CHECK(seq.width == 64);
    CHECK(seq.frames[2].rgb_path == "rgb/000002.ppm");
    CHECK(seq.frames[2].x_path == "x/000002.pgm");
    for (const char* name : {"rgb/000000.ppm", "rgb/000001.ppm", "rgb/000002.ppm",
                             "x/000000.pgm", "x/000001.pgm", "x/000002.pgm", "anno.json"}) {
        CAPTURE(name);
        REQUIRE(std::filesystem::exists(dir_a / name));
        CHECK(file_bytes(dir_a / name) == file_bytes(dir_b / name));
    }

    SUBCASE("annotations round-trip through load_sequence") {
        Sequence back = load_sequence(dir_a.string());
        REQUIRE(back.frames.size() == 3);
        CHECK(back.width == seq.width);
        CHECK(back.height == seq.height);
        for (int t = 0; t < 3; ++t) {
            BBox want = scene_target_box(s, t);
            CHECK(back.frames[t].box.cx == doctest::Approx(want.cx).epsilon(1e-12));
            CHECK(back.frames[t].box.cy == doctest::Approx(want.cy).epsilon(1e-12));
            CHECK(back.frames[t].box.w == doctest::Approx(want.w).epsilon(1e-12));
            CHECK(back.frames[t].box.h == doctest::Approx(want.h).epsilon(1e-12));
            CHECK(back.frames[t].rgb_path == seq.frames[t].rgb_path);
        }
    }

    SUBCASE("written pixels match a fresh render after quantization") {
        Tensor file_img = read_ppm((dir_a / "rgb/000001.ppm").string());
        RenderedFrame f = render_frame(s, 1);
        REQUIRE(file_img.shape() == f.rgb.shape());
        for (size_t i = 0; i < file_img.values().size(); ++i) {
            double q = std::lround(std::clamp(f.rgb.values()[i], 0.0, 1.0) * 255.0) / 255.0;
            CHECK(file_img.values()[i] == q);
        }
    }
}

TEST_CASE("scene scripts parse strictly") {
    SUBCASE("empty object gives the documented defaults") {
        SceneScript s = SceneScript::from_json("{}");
        CHECK(s.frames == 16);
        CHECK(s.width == 128);
        CHECK(s.target.shape == "rect");
        CHECK(s.x_transform == "invert");
    }
    SUBCASE("full round trip preserves every field") {
        SceneScript s = static_script();
        s.distractors = 3;
        s.occluders = {{1, 3, 0.4}};
        s.deform = {0.2, 0.1, 12.0};
        s.x_transform = "edge";
        s.noise_std = 0.05;
        s.target.texture = "checker";
        s.target.traj.phase_y = 0.25;
        SceneScript back = SceneScript::from_json(s.to_json());
        CHECK(back.to_json() == s.to_json());
        CHECK(back.seed == s.seed);
        CHECK(back.occluders.size() == 1);
        CHECK(back.occluders[0].coverage == 0.4);
        CHECK(back.target.traj.phase_y == 0.25);
    }
    SUBCASE("unknown keys anywhere are rejected") {
        CHECK_THROWS_AS(SceneScript::from_json(R"({"typo": 1})"), ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"({"target": {"color": "red"}})"), ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"({"target": {"trajectory": {"speed": 2}}})"),
                        ValidationError);
        CHECK_THROWS_AS(
            SceneScript::from_json(R"({"occluders": [{"start": 0, "end": 1, "mass": 9}]})"),
            ValidationError);
    }
    SUBCASE("malformed JSON and wrong types are rejected") {
        CHECK_THROWS_AS(SceneScript::from_json("not json at all"), ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"([1, 2])"), ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"({"frames": "many"})"), ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"({"occluders": 3})"), ValidationError);
    }
    SUBCASE("semantic validation") {
        CHECK_THROWS_AS(SceneScript::from_json(R"({"frames": 0})"), ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"({"target": {"shape": "star"}})"), ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"({"target": {"size": 200}})"), ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"({"x_transform": "sobel"})"), ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"({"noise_std": 0.9})"), ValidationError);
        CHECK_THROWS_AS(
            SceneScript::from_json(R"({"occluders": [{"start": 5, "end": 5, "coverage": 0.5}]})"),
            ValidationError);
        CHECK_THROWS_AS(
            SceneScript::from_json(R"({"occluders": [{"start": 0, "end": 99, "coverage": 0.5}]})"),
            ValidationError);
        CHECK_THROWS_AS(
            SceneScript::from_json(R"({"target": {"trajectory": {"amp_x": 1.5}}})"),
            ValidationError);
        CHECK_THROWS_AS(SceneScript::from_json(R"({"distractors": 99})"), ValidationError);
        SceneScript s = static_script();
        s.deform.scale_amp = 0.9;
        CHECK_THROWS_AS(s.validate(), ValidationError);
    }
}

TEST_CASE("render_frame rejects out-of-range frame indices") {
    SceneScript s = static_script();
    CHECK_THROWS_AS(render_frame(s, -1), DomainError);
    CHECK_THROWS_AS(render_frame(s, s.frames), DomainError);
}

TEST_CASE("load_sequence reports missing or malformed annotations") {
    auto dir = tmp_dir("bad_seq");
    CHECK_THROWS_AS(load_sequence(dir.string()), IoError);
    std::ofstream(dir / "anno.json") << "{\"width\": 64}";
    CHECK_THROWS_AS(load_sequence(dir.string()), ValidationError);
    std::ofstream(dir / "anno.json") << "nonsense";
    CHECK_THROWS_AS(load_sequence(dir.string()), ValidationError);
}
