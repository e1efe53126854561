#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ergo/backend.hpp"
#include "ergo/dataset.hpp"
#include "ergo/pipeline.hpp"
#include "ergo/rewards.hpp"

namespace ergo::grpo {

/// One scored rollout, ready for export to an external trainer.
struct RolloutRecord {
    std::string sample_id;
    int g = 0; // 1-based rollout index within the group
    std::string stage1_text;
    std::optional<std::string> stage2_text;
    std::optional<geometry::BBox> region;
    rewards::RewardBreakdown breakdown;
    double advantage = 0.0;
    std::vector<std::string> flags;

    nlohmann::json to_json() const;
};

struct RolloutGroup {
    std::string sample_id;
    std::vector<RolloutRecord> records;
    double mean_reward = 0.0;
    double std_reward = 0.0; // population standard deviation (1/G)
};

/// Group-relative advantages: (R_g - mean) / (epsilon + sigma) with the
/// population standard deviation. Throws GroupSizeError when G < 2.
std::vector<double> group_advantages(std::span<const double> group_rewards, double epsilon);

/// Runs the two-stage pipeline G times for one sample, scores every rollout
/// and attaches advantages. Per-rollout backend failures become zero-reward
/// records with a flag so the group keeps exactly G entries.
RolloutGroup build_group(const dataset::Sample& sample, int group_size,
                         backend::Backend& policy_backend, backend::Backend& reward_backend,
                         const rewards::RewardWeights& weights,
                         const pipeline::PipelineConfig& cfg);

/// One JSON object per line per record.
void export_rollouts_jsonl(std::ostream& out, const RolloutGroup& group);

} // namespace ergo::grpo
