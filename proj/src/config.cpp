#include "ergo/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ergo/dataset.hpp"
#include "ergo/evalharness.hpp"
#include "ergo/grpo.hpp"
#include "ergo/imaging.hpp"

namespace ergo::config {

namespace fs = std::filesystem;

void EngineConfig::validate() const {
    weights.validate();
    pipeline.validate();
    policy_backend.validate();
    reward_backend.validate();
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (group_size < 2) throw ConfigError("group size must be >= 2");
    evalharness::parse_mode(mode);
    if (backend_kind != "remote" && backend_kind != "scripted") {
        throw ConfigError("backend must be 'remote' or 'scripted', got '" + backend_kind + "'");
    }
    if (!script_path.empty() && !fs::exists(script_path)) {
        throw ConfigError("script file not found: " + script_path);
    }
    if (!dataset_path.empty() && !fs::exists(dataset_path)) {
        throw ConfigError("dataset file not found: " + dataset_path);
    }
}

nlohmann::json EngineConfig::to_json() const {
    nlohmann::json j;
    j["pipeline"] = {
        {"coarse_max_tokens", pipeline.coarse_constraint.max_tokens},
        {"crop_max_tokens", pipeline.crop_constraint
                                ? nlohmann::json(pipeline.crop_constraint->max_tokens)
                                : nlohmann::json(nullptr)},
        {"stage1_system", pipeline.stage1_system},
        {"stage2_user_template", pipeline.stage2_user_template},
        {"direct_answer_allowed", pipeline.direct_answer_allowed},
    };
    j["weights"] = {{"alpha", weights.alpha},
                    {"beta", weights.beta},
                    {"gamma", weights.gamma},
                    {"epsilon", weights.epsilon}};
    auto backend_json = [](const backend::BackendConfig& b) {
        return nlohmann::json{{"endpoint", b.endpoint},
                              {"model", b.model},
                              {"temperature", b.temperature},
                              {"max_output_tokens", b.max_output_tokens},
                              {"timeout_seconds", b.timeout_seconds},
                              {"retries", b.retries},
                              {"max_inflight", b.max_inflight}};
    };
    j["policy_backend"] = backend_json(policy_backend);
    j["reward_backend"] = backend_json(reward_backend);
    j["reward_system_prompt"] = reward_prompt.system;
    j["dataset"] = dataset_path;
    j["out_dir"] = out_dir;
    j["parallelism"] = parallelism;
    j["group_size"] = group_size;
    j["mode"] = mode;
    j["backend"] = backend_kind;
    j["script"] = script_path;
    return j;
}

std::unique_ptr<backend::Backend> EngineConfig::make_backend(
    const backend::BackendConfig& cfg) const {
    if (backend_kind == "scripted") {
        if (script_path.empty()) throw ConfigError("scripted backend requires --script");
        return std::make_unique<backend::ScriptedBackend>(
            backend::ScriptedBackend::from_json_file(script_path));
    }
    return backend::make_remote_backend(cfg);
}

CliInvocation parse_cli(const std::vector<std::string>& args) {
    CliInvocation inv;
    EngineConfig& cfg = inv.config;

    CLI::App app{"Coarse-to-fine VQA engine: two-stage inference, reward scoring, "
                 "grouped rollouts and benchmark analyses",
                 "ergo"};
    app.fallthrough();
    app.set_config("--config", "", "configuration file (key=value lines mirroring the flags)");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(0, 1);

    int crop_tokens = 0;
    std::string stage1_system;
    std::string stage2_user;

    app.add_option("--dataset", cfg.dataset_path, "dataset JSONL file");
    app.add_option("--out", cfg.out_dir, "output directory");
    app.add_option("--tokens", cfg.pipeline.coarse_constraint.max_tokens,
                   "coarse-stage vision token budget N");
    app.add_option("--crop-tokens", crop_tokens,
                   "optional crop-stage token budget (0 = original resolution)");
    app.add_option("--gamma", cfg.weights.gamma, "crop area-ratio threshold");
    app.add_option("--alpha", cfg.weights.alpha, "region reward weight");
    app.add_option("--beta", cfg.weights.beta, "box reward weight");
    app.add_option("--epsilon", cfg.weights.epsilon, "advantage stability constant");
    app.add_option("--group-size", cfg.group_size, "rollouts per sample G");
    app.add_option("--mode", cfg.mode, "eval mode: coarse_to_fine | oracle_region | no_crop");
    app.add_option("--parallel", cfg.parallelism, "max concurrent samples");
    app.add_option("--backend-url", cfg.policy_backend.endpoint, "policy backend endpoint");
    app.add_option("--reward-backend-url", cfg.reward_backend.endpoint,
                   "reward backend endpoint");
    app.add_option("--temperature", cfg.policy_backend.temperature,
                   "policy sampling temperature");
    app.add_option("--backend", cfg.backend_kind, "backend kind: remote | scripted");
    app.add_option("--script", cfg.script_path, "scripted-backend fixture file (JSON)");
    app.add_option("--model", cfg.policy_backend.model, "policy model name");
    app.add_option("--reward-model", cfg.reward_backend.model, "reward model name");
    app.add_option("--timeout", cfg.policy_backend.timeout_seconds,
                   "backend request timeout seconds");
    app.add_option("--retries", cfg.policy_backend.retries, "backend retry count");
    app.add_option("--max-output-tokens", cfg.policy_backend.max_output_tokens,
                   "completion token cap");
    app.add_option("--stage1-system-prompt", stage1_system, "override the stage-1 system prompt");
    app.add_option("--stage2-user-prompt", stage2_user, "override the stage-2 user template");
    app.add_option("--reward-system-prompt", cfg.reward_prompt.system,
                   "override the reward-model system prompt");

    app.add_subcommand("eval", "run a benchmark and write reports");
    app.add_subcommand("rollout", "score grouped rollouts and export JSONL records");
    app.add_subcommand("reward-audit", "score each sample once and print reward breakdowns");
    app.add_subcommand("stats", "GT-region area-ratio histogram of a dataset");
    app.add_subcommand("mask-exp", "paired masked/unmasked coverage experiment");
    auto* resize_info = app.add_subcommand("resize-info", "print resized dims and token count");
    resize_info->add_option("--width", inv.width, "input width")->required();
    resize_info->add_option("--height", inv.height, "input height")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested{app.help()};
    } catch (const CLI::ParseError& e) {
        throw UsageError(std::string(e.what()) + "\n\n" + app.help());
    }

    if (crop_tokens > 0) {
        cfg.pipeline.crop_constraint = imaging::PixelConstraint{crop_tokens};
    }
    if (!stage1_system.empty()) cfg.pipeline.stage1_system = stage1_system;
    if (!stage2_user.empty()) cfg.pipeline.stage2_user_template = stage2_user;

    // Reward and rollout calls reuse the transport settings of the policy
    // backend unless separately overridden.
    cfg.reward_backend.timeout_seconds = cfg.policy_backend.timeout_seconds;
    cfg.reward_backend.retries = cfg.policy_backend.retries;

    const auto subcommands = app.get_subcommands();
    if (!subcommands.empty()) inv.subcommand = subcommands.front()->get_name();

    cfg.validate();
    return inv;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

dataset::Dataset load_and_report(const EngineConfig& cfg) {
    if (cfg.dataset_path.empty()) {
        throw ConfigError("this subcommand requires --dataset");
    }
    dataset::Dataset ds = dataset::load_dataset(cfg.dataset_path);
    for (const std::string& w : ds.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    return ds;
}

int cmd_eval(const EngineConfig& cfg) {
    const dataset::Dataset ds = load_and_report(cfg);
    const auto backend = cfg.make_backend(cfg.policy_backend);

    evalharness::HarnessOptions options;
    options.mode = evalharness::parse_mode(cfg.mode);
    options.parallelism = cfg.parallelism;
    options.config_metadata = cfg.to_json();

    const evalharness::EvalReport report =
        evalharness::run_benchmark(ds.samples, cfg.pipeline, *backend, options);

    fs::create_directories(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / "report.json",
               evalharness::emit_report(report, evalharness::ReportFormat::json));
    write_file(fs::path(cfg.out_dir) / "report.csv",
               evalharness::emit_report(report, evalharness::ReportFormat::csv));
    write_file(fs::path(cfg.out_dir) / "plot.csv",
               evalharness::emit_report(report, evalharness::ReportFormat::plot_csv));
    std::string traces;
    for (const auto& t : report.traces) traces += t.to_json().dump() + "\n";
    write_file(fs::path(cfg.out_dir) / "traces.jsonl", traces);
    write_file(fs::path(cfg.out_dir) / "run_meta.json", cfg.to_json().dump(2) + "\n");

    long failed = 0;
    for (const auto& t : report.traces) {
        for (const std::string& f : t.flags) {
            if (f.rfind("sample_failed", 0) == 0) {
                ++failed;
                std::cerr << "sample " << t.sample_id << ": " << f << "\n";
            }
        }
    }
    std::cout << "mode=" << report.mode << " samples=" << report.total
              << " accuracy=" << report.accuracy
              << " mean_tokens=" << report.mean_total_tokens
              << " mean_latency_s=" << report.mean_latency_seconds;
    if (report.mean_coverage) std::cout << " mean_coverage=" << *report.mean_coverage;
    std::cout << "\n";
    return failed == 0 ? 0 : 1;
}

int cmd_rollout(const EngineConfig& cfg) {
    const dataset::Dataset ds = load_and_report(cfg);
    const auto policy = cfg.make_backend(cfg.policy_backend);
    const auto reward = cfg.make_backend(cfg.reward_backend);

    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / "rollouts.jsonl", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write rollouts.jsonl");

    for (const dataset::Sample& sample : ds.samples) {
        const grpo::RolloutGroup group = grpo::build_group(sample, cfg.group_size, *policy,
                                                           *reward, cfg.weights, cfg.pipeline);
        grpo::export_rollouts_jsonl(out, group);
        std::cout << sample.id << " mean_reward=" << group.mean_reward
                  << " std=" << group.std_reward << "\n";
    }
    write_file(fs::path(cfg.out_dir) / "rollouts.meta.json", cfg.to_json().dump(2) + "\n");
    return 0;
}

int cmd_reward_audit(const EngineConfig& cfg) {
    const dataset::Dataset ds = load_and_report(cfg);
    const auto policy = cfg.make_backend(cfg.policy_backend);
    const auto reward = cfg.make_backend(cfg.reward_backend);

    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / "reward_audit.jsonl", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write reward_audit.jsonl");

    for (const dataset::Sample& sample : ds.samples) {
        const pipeline::PipelineTrace trace = pipeline::run_sample(sample, cfg.pipeline, *policy);
        const rewards::RewardBreakdown b =
            rewards::score_rollout(trace, sample.gt_answer, cfg.weights, *reward,
                                   cfg.reward_prompt);
        nlohmann::json line;
        line["sample_id"] = sample.id;
        line["rewards"] = b.to_json();
        line["region_valid"] = b.region_valid;
        line["area_ratio"] =
            b.area_ratio ? nlohmann::json(*b.area_ratio) : nlohmann::json(nullptr);
        line["flags"] = b.flags;
        out << line.dump() << "\n";
        std::cout << sample.id << " region=" << b.r_region << " box=" << b.r_box
                  << " acc=" << b.r_acc << " format=" << b.r_format << " tce=" << b.r_tce
                  << " total=" << b.total << (b.region_valid ? "" : " (invalid region)") << "\n";
    }
    write_file(fs::path(cfg.out_dir) / "reward_audit.meta.json", cfg.to_json().dump(2) + "\n");
    return 0;
}

int cmd_stats(const EngineConfig& cfg) {
    const dataset::Dataset ds = load_and_report(cfg);
    const evalharness::AreaRatioStats stats = evalharness::area_ratio_stats(ds.samples);
    for (const std::string& w : stats.warnings) std::cerr << "warning: " << w << "\n";

    for (int i = 0; i < 10; ++i) {
        std::cout << "[" << i / 10.0 << "," << (i + 1) / 10.0 << (i == 9 ? "]" : ")") << " "
                  << stats.bins[i] << "\n";
    }
    fs::create_directories(cfg.out_dir);
    nlohmann::json j = stats.to_json();
    j["config"] = cfg.to_json();
    write_file(fs::path(cfg.out_dir) / "area_ratio_stats.json", j.dump(2) + "\n");
    return 0;
}

int cmd_mask_exp(const EngineConfig& cfg) {
    const dataset::Dataset ds = load_and_report(cfg);
    const auto backend = cfg.make_backend(cfg.policy_backend);
    const evalharness::MaskedCoverageResult result = evalharness::masked_coverage_experiment(
        ds.samples, cfg.pipeline, *backend, cfg.parallelism);

    std::cout << "unmasked_mean=" << result.unmasked_mean
              << " masked_mean=" << result.masked_mean << "\n";
    fs::create_directories(cfg.out_dir);
    nlohmann::json j = result.to_json();
    j["config"] = cfg.to_json();
    write_file(fs::path(cfg.out_dir) / "masked_coverage.json", j.dump(2) + "\n");
    return 0;
}

int cmd_resize_info(const CliInvocation& inv) {
    const imaging::ResizedDims dims = imaging::smart_resize(
        inv.width, inv.height, inv.config.pipeline.coarse_constraint);
    std::cout << dims.width << "x" << dims.height << " "
              << imaging::token_count(dims.width, dims.height) << "\n";
    return 0;
}

} // namespace

int dispatch(const CliInvocation& inv) {
    if (inv.subcommand.empty()) {
        throw UsageError("no subcommand given (expected eval, rollout, reward-audit, stats, "
                         "mask-exp or resize-info)");
    }
    if (inv.subcommand == "eval") return cmd_eval(inv.config);
    if (inv.subcommand == "rollout") return cmd_rollout(inv.config);
    if (inv.subcommand == "reward-audit") return cmd_reward_audit(inv.config);
    if (inv.subcommand == "stats") return cmd_stats(inv.config);
    if (inv.subcommand == "mask-exp") return cmd_mask_exp(inv.config);
    if (inv.subcommand == "resize-info") return cmd_resize_info(inv);
    throw UsageError("unknown subcommand '" + inv.subcommand + "'");
}

int run_cli(const std::vector<std::string>& args) {
    try {
        return dispatch(parse_cli(args));
    } catch (const HelpRequested& h) {
        std::cout << h.text;
        return 0;
    } catch (const UsageError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace ergo::config
