#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ergo/backend.hpp"
#include "ergo/geometry.hpp"
#include "ergo/imaging.hpp"
#include "ergo/pipeline.hpp"
#include "ergo/protocol.hpp"

namespace ergo::rewards {

/// Reward weighting: total = alpha * r_region + beta * r_box + r_acc + r_format,
/// with the crop-size threshold gamma and the advantage stability constant
/// epsilon used by the group scorer.
struct RewardWeights {
    double alpha = 1.0;
    double beta = 0.5;
    double gamma = 0.6;
    double epsilon = 1e-4;

    void validate() const {
        if (alpha < 0) throw ConfigError("alpha must be >= 0");
        if (beta < 0) throw ConfigError("beta must be >= 0");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
        if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    }
};

struct RewardBreakdown {
    int r_region = 0;
    int r_box = 0;
    int r_acc = 0;
    int r_format = 0;
    double r_tce = 0.0;
    double total = 0.0;
    bool region_valid = false;
    std::optional<std::string> reward_model_answer;
    std::optional<double> area_ratio;
    std::vector<std::string> flags;

    nlohmann::json to_json() const;
};

/// System prompt for the region-verification judge. Fixed template, exposed
/// as a config key so fixtures stay stable.
struct RewardPrompt {
    std::string system = "Answer the question using only the provided image.";
};

/// 1 iff the crop's share of the original image is at most gamma (inclusive).
int box_reward(const geometry::BBox& region, const geometry::CoordSpace& orig,
               const RewardWeights& w);

/// Asks the reward backend to answer the query from the crop alone (no
/// original image, no extra hints) and matches its answer against gt.
/// Backend failures propagate as BackendError.
std::pair<int, std::string> region_reward(backend::Backend& reward_backend,
                                          const imaging::RasterImage& crop,
                                          const std::string& query, const std::string& gt,
                                          const RewardPrompt& prompt = {},
                                          const backend::CallContext& ctx = {"reward", 1,
                                                                              "reward"});

/// 1 iff the turn carries an <answer> block that matches gt.
int accuracy_reward(const protocol::StageOutput& answer_out, const std::string& gt);

/// Scores one rollout. A trace whose region is invalid-for-crop zeroes every
/// component; reward-backend failures degrade r_region to 0 with a
/// "reward_backend_failed" flag so the group keeps its size.
RewardBreakdown score_rollout(const pipeline::PipelineTrace& trace, const std::string& gt,
                              const RewardWeights& w, backend::Backend& reward_backend,
                              const RewardPrompt& prompt = {});

} // namespace ergo::rewards
