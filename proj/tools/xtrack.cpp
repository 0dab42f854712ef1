// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "xtrack/commands.hpp"

using namespace xtrack;

int main(int argc, char** argv) {
    CLI::App app{"xtrack: multimodal spatial-temporal tracking toolkit"};
    app.require_subcommand(1);

    CliOptions opts;
    uint64_t seed_val = 0;

    auto add_common = [&](CLI::App* cmd, bool with_precision) {
        cmd->add_option("--config", opts.config_path, "run config JSON (defaults when omitted)");
        cmd->add_option("--seed", seed_val, "override the config/script seed");
        if (with_precision) {
            cmd->add_option("--precision", opts.precision, "weight precision")
                ->check(CLI::IsMember({"f32", "f64"}));
        }
    };

    std::string script_path, out_dir;
    CLI::App* gen = app.add_subcommand("gen", "render a scene script into a sequence directory");
    gen->add_option("script", script_path, "scene script JSON")->required();
    gen->add_option("out-dir", out_dir, "output sequence directory")->required();
    add_common(gen, false);

    std::string data_dir, out_weights;
    CLI::App* train =
        app.add_subcommand("train-toy", "seeded toy training loop over generated sequences");
    train->add_option("data-dir", data_dir, "directory of generated sequences")->required();
    train->add_option("out-weights", out_weights, "output weight blob path")->required();
    add_common(train, true);

    std::string weights_path, seq_dir, out_file;
    DumpOptions dumps;
    CLI::App* track = app.add_subcommand("track", "run the tracker over a sequence");
    track->add_option("weights", weights_path, "weight blob (with .json manifest)")->required();
    track->add_option("seq-dir", seq_dir, "sequence directory")->required();
    track->add_option("out-file", out_file, "JSON-lines results path")->required();
    track->add_flag("--dump-attention", dumps.attention, "write per-frame attention heatmaps");
    track->add_flag("--dump-masks", dumps.masks, "write per-frame suppression masks");
    add_common(track, true);

    std::string results_path, eval_seq_dir, report_path;
    CLI::App* eval = app.add_subcommand("eval", "score tracker results against annotations");
    eval->add_option("results", results_path, "JSON-lines tracker output")->required();
    eval->add_option("seq-dir", eval_seq_dir, "annotated sequence directory")->required();
    eval->add_option("report", report_path, "optional metrics JSON output path");

    CLI::App* check = app.add_subcommand("check", "run the built-in invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadInput;
    }

    auto seed_override = [&]() -> std::optional<uint64_t> {
        for (CLI::App* cmd : {gen, train, track}) {
            if (cmd->parsed() && cmd->count("--seed") > 0) return seed_val;
        }
        return std::nullopt;
    };
    opts.seed = seed_override();

    if (gen->parsed()) return cmd_gen(script_path, out_dir, opts.seed, std::cout);
    if (train->parsed()) return cmd_train_toy(opts, data_dir, out_weights, std::cout);
    if (track->parsed()) return cmd_track(opts, weights_path, seq_dir, out_file, dumps, std::cout);
    if (eval->parsed()) return cmd_eval(results_path, eval_seq_dir, report_path, std::cout);
    if (check->parsed()) return cmd_check(std::cout);
    return kExitBadInput;  // unreachable: a subcommand is required
}
