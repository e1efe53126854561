#include "ergo/grpo.hpp"

#include <cmath>
#include <exception>
#include <ostream>

namespace ergo::grpo {

nlohmann::json RolloutRecord::to_json() const {
    nlohmann::json j;
    j["sample_id"] = sample_id;
    j["g"] = g;
    j["stage1_text"] = stage1_text;
    j["stage2_text"] = stage2_text ? nlohmann::json(*stage2_text) : nlohmann::json(nullptr);
    if (region) {
        j["region"] = {region->x1, region->y1, region->x2, region->y2};
    } else {
        j["region"] = nullptr;
    }
    j["rewards"] = breakdown.to_json();
    j["advantage"] = advantage;
    j["area_ratio"] = breakdown.area_ratio ? nlohmann::json(*breakdown.area_ratio)
                                           : nlohmann::json(nullptr);
    j["flags"] = flags;
    return j;
}

std::vector<double> group_advantages(std::span<const double> group_rewards, double epsilon) {
    const std::size_t g = group_rewards.size();
    if (g < 2) {
        throw GroupSizeError("group_advantages: need at least 2 rollouts, got " +
                             std::to_string(g));
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("group_advantages: epsilon must be > 0");
    }
    double sum = 0.0;
    for (double r : group_rewards) sum += r;
    const double mean = sum / static_cast<double>(g);

    double sq = 0.0;
    for (double r : group_rewards) sq += (r - mean) * (r - mean);
    const double sigma = std::sqrt(sq / static_cast<double>(g));

    std::vector<double> advantages(g);
    for (std::size_t i = 0; i < g; ++i) {
        advantages[i] = (group_rewards[i] - mean) / (epsilon + sigma);
    }
    return advantages;
}

RolloutGroup build_group(const dataset::Sample& sample, int group_size,
                         backend::Backend& policy_backend, backend::Backend& reward_backend,
                         const rewards::RewardWeights& weights,
                         const pipeline::PipelineConfig& cfg) {
    if (group_size < 2) {
        throw GroupSizeError("build_group: group size must be >= 2, got " +
                             std::to_string(group_size));
    }
    if (sample.gt_answer.empty()) {
        throw std::invalid_argument("build_group: sample '" + sample.id + "' has no gt answer");
    }
    weights.validate();
    cfg.validate();

    RolloutGroup group;
    group.sample_id = sample.id;
    group.records.resize(group_size);
    std::vector<std::exception_ptr> errors(group_size);

#pragma omp parallel for schedule(dynamic)
    for (int g = 1; g <= group_size; ++g) {
        RolloutRecord& rec = group.records[g - 1];
        rec.sample_id = sample.id;
        rec.g = g;
        try {
            const pipeline::PipelineTrace trace =
                pipeline::run_sample(sample, cfg, policy_backend, "#g" + std::to_string(g));
            rec.stage1_text = trace.stage1_text;
            rec.stage2_text = trace.stage2_text;
            rec.region = trace.region;
            rec.breakdown = rewards::score_rollout(trace, sample.gt_answer, weights,
                                                   reward_backend);
            rec.flags = trace.flags;
            rec.flags.insert(rec.flags.end(), rec.breakdown.flags.begin(),
                             rec.breakdown.flags.end());
        } catch (const BackendError&) {
            rec.breakdown = {}; // zero rewards, group size preserved
            rec.flags.push_back("rollout_backend_failed");
        } catch (...) {
            errors[g - 1] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e); // dataset-level failure: abort with context
    }

    std::vector<double> totals(group_size);
    for (int i = 0; i < group_size; ++i) totals[i] = group.records[i].breakdown.total;
    const std::vector<double> advantages = group_advantages(totals, weights.epsilon);

    double sum = 0.0;
    for (double t : totals) sum += t;
    group.mean_reward = sum / group_size;
    double sq = 0.0;
    for (double t : totals) sq += (t - group.mean_reward) * (t - group.mean_reward);
    group.std_reward = std::sqrt(sq / group_size);

    for (int i = 0; i < group_size; ++i) group.records[i].advantage = advantages[i];
    return group;
}

void export_rollouts_jsonl(std::ostream& out, const RolloutGroup& group) {
    for (const RolloutRecord& rec : group.records) {
        out << rec.to_json().dump() << "\n";
    }
}

} // namespace ergo::grpo
