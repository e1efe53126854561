#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergo/backend.hpp"
#include "ergo/errors.hpp"
#include "ergo/pipeline.hpp"
#include "ergo/rewards.hpp"

namespace ergo::config {

/// Everything a run needs, resolved from defaults, the config file and
/// command-line flags (in that order of precedence, last wins).
struct EngineConfig {
    pipeline::PipelineConfig pipeline;
    rewards::RewardWeights weights;
    rewards::RewardPrompt reward_prompt;
    backend::BackendConfig policy_backend;
    backend::BackendConfig reward_backend;
    std::string dataset_path;
    std::string out_dir = "out";
    int parallelism = 4;
    int group_size = 8;
    std::string mode = "coarse_to_fine";
    std::string backend_kind = "remote"; // remote | scripted
    std::string script_path;

    void validate() const;
    /// Resolved snapshot echoed into every output artifact.
    nlohmann::json to_json() const;

    /// Builds the configured backend. Scripted backends are read from
    /// script_path; both policy and reward roles share the script file.
    std::unique_ptr<backend::Backend> make_backend(const backend::BackendConfig& cfg) const;
};

/// Command-line usage problem (unknown subcommand, unknown flag or config
/// key, missing value). Callers exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// --help was requested; `text` is the help screen. Callers exit 0.
struct HelpRequested {
    std::string text;
};

struct CliInvocation {
    EngineConfig config;
    std::string subcommand;
    // resize-info arguments
    int width = 0;
    int height = 0;
};

/// Parses flags and the optional config file (args exclude argv[0]).
/// Defaults follow the training recipe: gamma 0.6, alpha 1, beta 0.5,
/// epsilon 1e-4, 640 coarse tokens.
CliInvocation parse_cli(const std::vector<std::string>& args);

/// Runs the chosen subcommand. Returns the process exit status.
int dispatch(const CliInvocation& invocation);

/// parse_cli + dispatch with the error-to-exit-code policy applied.
int run_cli(const std::vector<std::string>& args);

} // namespace ergo::config
