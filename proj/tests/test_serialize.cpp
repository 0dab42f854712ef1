// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "xtrack/error.hpp"
#include "xtrack/serialize.hpp"

using namespace xtrack;

namespace {

std::filesystem::path tmp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "xtrack_serialize_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<uint8_t> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.d_model = 6;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.layers = 3;
    c.d_inner = 8;
    c.state_size = 2;
    c.conv_kernel = 2;
    c.patch = 4;
    c.template_size = 8;
    c.search_size = 12;
    c.queue_capacity = 2;
    return c;
}

nlohmann::json read_manifest(const std::filesystem::path& p) {
    std::ifstream in(p);
    REQUIRE(bool(in));
    return nlohmann::json::parse(in);
}

void write_manifest(const std::filesystem::path& p, const nlohmann::json& j) {
    std::ofstream out(p, std::ios::binary);
    out << j.dump(2) << "\n";
}

}  // namespace

TEST_CASE("blob layout is packed little-endian float32 in enumeration order") {
    auto path = (tmp_dir() / "pinned.bin").string();
    NamedTensors params = {{"a", Tensor::from_data({2}, {1.0, -2.5})},
                           {"b", Tensor::from_data({1, 2}, {0.5, 3.25})}};
    save_tensors(path, params);

    std::vector<uint8_t> blob = file_bytes(path);
    // IEEE-754 single precision, least significant byte first.
    std::vector<uint8_t> want = {0x00, 0x00, 0x80, 0x3f,   // 1.0f
                                 0x00, 0x00, 0x20, 0xc0,   // -2.5f
                                 0x00, 0x00, 0x00, 0x3f,   // 0.5f
                                 0x00, 0x00, 0x50, 0x40};  // 3.25f
    CHECK(blob == want);

    nlohmann::json man = read_manifest(path + ".json");
    CHECK(man.at("total_bytes").get<size_t>() == 16);
    REQUIRE(man.at("params").size() == 2);
    CHECK(man.at("params")[0].at("name") == "a");
    CHECK(man.at("params")[0].at("offset").get<size_t>() == 0);
    CHECK(man.at("params")[0].at("shape").get<Shape>() == Shape{2});
    CHECK(man.at("params")[1].at("name") == "b");
    CHECK(man.at("params")[1].at("offset").get<size_t>() == 8);
    CHECK(man.at("params")[1].at("shape").get<Shape>() == Shape{1, 2});
}

TEST_CASE("model weights round-trip through the float32 blob") {
    Rng ra(1), rb(2);
    ModelWeights a = ModelWeights::init(ra, tiny_config());
    ModelWeights b = ModelWeights::init(rb, tiny_config());
    auto path = (tmp_dir() / "model.bin").string();
    save_weights(path, a);
    load_weights(path, b);

    auto pa = a.named_params(), pb = b.named_params();
    REQUIRE(pa.size() == pb.size());
    bool rounding_mattered = false;
    for (size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i].second.numel() == pb[i].second.numel());
        for (size_t k = 0; k < pa[i].second.numel(); ++k) {
            double v = pa[i].second.at(k);
            double want = static_cast<double>(static_cast<float>(v));
            CHECK(pb[i].second.at(k) == want);
            if (want != v) rounding_mattered = true;
        }
    }
    CHECK(rounding_mattered);  // doubles do not survive float32 untouched

    SUBCASE("a second save of the loaded weights is byte-identical") {
        auto path2 = (tmp_dir() / "model2.bin").string();
        save_weights(path2, b);
        CHECK(file_bytes(path) == file_bytes(path2));
        CHECK(file_bytes(path + ".json") == file_bytes(path2 + ".json"));
    }
}

TEST_CASE("loading validates blob length and manifest consistency") {
    auto dir = tmp_dir();
    NamedTensors params = {{"w", Tensor::from_data({3}, {1, 2, 3})},
                           {"v", Tensor::from_data({2, 2}, {4, 5, 6, 7})}};
    auto path = (dir / "val.bin").string();
    save_tensors(path, params);

    SUBCASE("truncated blob") {
        std::vector<uint8_t> blob = file_bytes(path);
        std::ofstream(path, std::ios::binary)
            .write(reinterpret_cast<const char*>(blob.data()), static_cast<long>(blob.size() - 4));
        CHECK_THROWS_AS(load_tensors(path, params), ValidationError);
    }
    SUBCASE("total_bytes disagreeing with the entry extents") {
        nlohmann::json man = read_manifest(path + ".json");
        man["total_bytes"] = 24;
        write_manifest(path + ".json", man);
        CHECK_THROWS_AS(load_tensors(path, params), ValidationError);
    }
    SUBCASE("missing parameter entry") {
        nlohmann::json man = read_manifest(path + ".json");
        man["params"].erase(1);
        man["total_bytes"] = 12;
        write_manifest(path + ".json", man);
        std::vector<uint8_t> blob = file_bytes(path);
        std::ofstream(path, std::ios::binary)
            .write(reinterpret_cast<const char*>(blob.data()), 12);
        CHECK_THROWS_AS(load_tensors(path, params), ValidationError);
    }
    SUBCASE("renamed parameter") {
        nlohmann::json man = read_manifest(path + ".json");
        man["params"][0]["name"] = "typo";
        write_manifest(path + ".json", man);
        CHECK_THROWS_AS(load_tensors(path, params), ValidationError);
    }
    SUBCASE("wrong shape") {
        nlohmann::json man = read_manifest(path + ".json");
        man["params"][1]["shape"] = {4};
        write_manifest(path + ".json", man);
        CHECK_THROWS_AS(load_tensors(path, params), ValidationError);
    }
    SUBCASE("offset overrunning the blob") {
        nlohmann::json man = read_manifest(path + ".json");
        man["params"][1]["offset"] = 16;
        write_manifest(path + ".json", man);
        CHECK_THROWS_AS(load_tensors(path, params), ValidationError);
    }
    SUBCASE("duplicate names") {
        nlohmann::json man = read_manifest(path + ".json");
        man["params"][1]["name"] = "w";
        write_manifest(path + ".json", man);
        CHECK_THROWS_AS(load_tensors(path, params), ValidationError);
    }
    SUBCASE("malformed manifest JSON") {
        std::ofstream(path + ".json") << "{broken";
        CHECK_THROWS_AS(load_tensors(path, params), ValidationError);
    }
    SUBCASE("missing files raise IoError") {
        CHECK_THROWS_AS(load_tensors((dir / "nope.bin").string(), params), IoError);
        std::filesystem::remove(path + ".json");
        CHECK_THROWS_AS(load_tensors(path, params), IoError);
    }
}

TEST_CASE("manifest entries may appear in any order") {
    auto dir = tmp_dir();
    NamedTensors params = {{"w", Tensor::from_data({3}, {1, 2, 3})},
                           {"v", Tensor::from_data({2, 2}, {4, 5, 6, 7})}};
    auto path = (dir / "perm.bin").string();
    save_tensors(path, params);
    nlohmann::json man = read_manifest(path + ".json");
    std::swap(man["params"][0], man["params"][1]);
    write_manifest(path + ".json", man);

    NamedTensors dest = {{"w", Tensor::zeros({3})}, {"v", Tensor::zeros({2, 2})}};
    load_tensors(path, dest);
    CHECK(dest[0].second.values() == std::vector<double>{1, 2, 3});
    CHECK(dest[1].second.values() == std::vector<double>{4, 5, 6, 7});
}
