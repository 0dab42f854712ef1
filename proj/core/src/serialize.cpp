// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "xtrack/error.hpp"

namespace xtrack {

namespace {

void put_f32_le(std::string& out, float f) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    out.push_back(static_cast<char>(u & 0xff));
    out.push_back(static_cast<char>((u >> 8) & 0xff));
    out.push_back(static_cast<char>((u >> 16) & 0xff));
    out.push_back(static_cast<char>((u >> 24) & 0xff));
}

float get_f32_le(const std::string& blob, size_t at) {
    uint32_t u = (static_cast<uint32_t>(static_cast<uint8_t>(blob[at]))) |
                 (static_cast<uint32_t>(static_cast<uint8_t>(blob[at + 1])) << 8) |
                 (static_cast<uint32_t>(static_cast<uint8_t>(blob[at + 2])) << 16) |
                 (static_cast<uint32_t>(static_cast<uint8_t>(blob[at + 3])) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

}  // namespace

void save_tensors(const std::string& path, const NamedTensors& params) {
    std::string blob;
    nlohmann::json manifest;
    manifest["params"] = nlohmann::json::array();
    for (const auto& [name, t] : params) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = t.shape();
        e["offset"] = blob.size();
        manifest["params"].push_back(e);
        for (double v : t.values()) put_f32_le(blob, static_cast<float>(v));
    }
    manifest["total_bytes"] = blob.size();

    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw IoError("cannot open " + path + " for writing");
    bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!bin) throw IoError("short write to " + path);
    std::ofstream man(path + ".json", std::ios::binary);
    if (!man) throw IoError("cannot open " + path + ".json for writing");
    man << manifest.dump(2) << "\n";
}

void load_tensors(const std::string& path, const NamedTensors& params) {
    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw IoError("cannot open " + path);
    std::string blob(std::istreambuf_iterator<char>(bin), std::istreambuf_iterator<char>{});
    std::ifstream man(path + ".json", std::ios::binary);
    if (!man) throw IoError("cannot open " + path + ".json");
    std::string text(std::istreambuf_iterator<char>(man), std::istreambuf_iterator<char>{});

    struct Entry {
        Shape shape;
        size_t offset = 0;
    };
    std::map<std::string, Entry> entries;
    size_t total_bytes = 0, summed = 0;
    try {
        nlohmann::json j = nlohmann::json::parse(text);
        total_bytes = j.at("total_bytes").get<size_t>();
        for (const nlohmann::json& e : j.at("params")) {
            std::string name = e.at("name").get<std::string>();
            Entry ent{e.at("shape").get<Shape>(), e.at("offset").get<size_t>()};
            if (!entries.emplace(name, ent).second)
                throw ValidationError("duplicate parameter '" + name + "' in manifest");
            summed += 4 * shape_numel(ent.shape);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed weight manifest " + path + ".json: " + e.what());
    }

    if (blob.size() != total_bytes)
        throw ValidationError("weight blob " + path + " holds " + std::to_string(blob.size()) +
                              " bytes, manifest declares " + std::to_string(total_bytes));
    if (summed != total_bytes)
        throw ValidationError("manifest parameter extents sum to " + std::to_string(summed) +
                              " bytes, total_bytes says " + std::to_string(total_bytes));
    if (entries.size() != params.size())
        throw ValidationError("manifest lists " + std::to_string(entries.size()) +
                              " parameters, model has " + std::to_string(params.size()));

    for (const auto& [name, t] : params) {
        auto it = entries.find(name);
        if (it == entries.end())
            throw ValidationError("manifest is missing parameter '" + name + "'");
        const Entry& ent = it->second;
        if (ent.shape != t.shape())
            throw ValidationError("parameter '" + name + "' has shape " + shape_str(ent.shape) +
                                  " in the manifest, expected " + shape_str(t.shape()));
        size_t bytes = 4 * t.numel();
        if (ent.offset + bytes > blob.size())
            throw ValidationError("parameter '" + name + "' overruns the blob");
        Tensor h = t;
        std::vector<double>& dst = h.values();
        for (size_t i = 0; i < t.numel(); ++i)
            dst[i] = static_cast<double>(get_f32_le(blob, ent.offset + 4 * i));
    }
}

void save_weights(const std::string& path, const ModelWeights& w) {
    save_tensors(path, w.named_params());
}

void load_weights(const std::string& path, ModelWeights& w) {
    load_tensors(path, w.named_params());
}

}  // namespace xtrack
