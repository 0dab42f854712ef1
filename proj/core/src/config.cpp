// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>

#include "json.hpp"
#include "xtrack/error.hpp"

namespace xtrack {

namespace {

void require_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                  const char* where) {
    if (!j.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (item.key() == a) ok = true;
        if (!ok) throw ValidationError("unknown key '" + item.key() + "' in " + where);
    }
}

void parse_model(const nlohmann::json& j, ModelConfig& m) {
    require_keys(j,
                 {"d_model", "heads", "mlp_ratio", "layers", "d_inner", "state_size",
                  "conv_kernel", "patch", "template_size", "search_size", "queue_capacity",
                  "lambda_stages"},
                 "model");
    m.d_model = j.value("d_model", m.d_model);
    m.heads = j.value("heads", m.heads);
    m.mlp_ratio = j.value("mlp_ratio", m.mlp_ratio);
    m.layers = j.value("layers", m.layers);
    m.d_inner = j.value("d_inner", m.d_inner);
    m.state_size = j.value("state_size", m.state_size);
    m.conv_kernel = j.value("conv_kernel", m.conv_kernel);
    m.patch = j.value("patch", m.patch);
    m.template_size = j.value("template_size", m.template_size);
    m.search_size = j.value("search_size", m.search_size);
    m.queue_capacity = j.value("queue_capacity", m.queue_capacity);
    if (j.contains("lambda_stages")) {
        const nlohmann::json& s = j.at("lambda_stages");
        if (!s.is_array() || s.size() != 3)
            throw ValidationError("model.lambda_stages must be an array of 3 fractions");
        for (int i = 0; i < 3; ++i) m.lambda_stages[i] = s[i].get<double>();
    }
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
    RunConfig c;
    try {
        nlohmann::json j = nlohmann::json::parse(text);
        require_keys(j, {"seed", "model", "tracker", "train", "loss"}, "run config");
        c.seed = j.value("seed", c.seed);
        if (j.contains("model")) parse_model(j.at("model"), c.model);
        if (j.contains("tracker")) {
            const nlohmann::json& t = j.at("tracker");
            require_keys(t, {"update_interval", "score_threshold", "search_context"}, "tracker");
            c.tracker.update_interval = t.value("update_interval", c.tracker.update_interval);
            c.tracker.score_threshold = t.value("score_threshold", c.tracker.score_threshold);
            c.tracker.search_context = t.value("search_context", c.tracker.search_context);
        }
        if (j.contains("train")) {
            const nlohmann::json& t = j.at("train");
            require_keys(t, {"lr", "momentum", "steps", "clip_len"}, "train");
            c.train.lr = t.value("lr", c.train.lr);
            c.train.momentum = t.value("momentum", c.train.momentum);
            c.train.steps = t.value("steps", c.train.steps);
            c.train.clip_len = t.value("clip_len", c.train.clip_len);
        }
        if (j.contains("loss")) {
            const nlohmann::json& l = j.at("loss");
            require_keys(l, {"alpha", "beta"}, "loss");
            c.loss.alpha = l.value("alpha", c.loss.alpha);
            c.loss.beta = l.value("beta", c.loss.beta);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed run config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path);
    std::string text(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
    return from_json(text);
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["model"] = {{"d_model", model.d_model},
                  {"heads", model.heads},
                  {"mlp_ratio", model.mlp_ratio},
                  {"layers", model.layers},
                  {"d_inner", model.d_inner},
                  {"state_size", model.state_size},
                  {"conv_kernel", model.conv_kernel},
                  {"patch", model.patch},
                  {"template_size", model.template_size},
                  {"search_size", model.search_size},
                  {"queue_capacity", model.queue_capacity},
                  {"lambda_stages", model.lambda_stages}};
    j["tracker"] = {{"update_interval", tracker.update_interval},
                    {"score_threshold", tracker.score_threshold},
                    {"search_context", tracker.search_context}};
    j["train"] = {{"lr", train.lr},
                  {"momentum", train.momentum},
                  {"steps", train.steps},
                  {"clip_len", train.clip_len}};
    j["loss"] = {{"alpha", loss.alpha}, {"beta", loss.beta}};
    return j.dump(2) + "\n";
}

void RunConfig::validate() const {
    model.validate();
    tracker.validate();
    train.validate();
    if (!(loss.alpha >= 0.0) || !std::isfinite(loss.alpha)) {
        throw ConfigError("loss.alpha must be finite and >= 0");
    }
    if (!(loss.beta >= 0.0) || !std::isfinite(loss.beta)) {
        throw ConfigError("loss.beta must be finite and >= 0");
    }
}

}  // namespace xtrack
