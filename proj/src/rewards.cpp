#include "ergo/rewards.hpp"

namespace ergo::rewards {

nlohmann::json RewardBreakdown::to_json() const {
    nlohmann::json j;
    j["region"] = r_region;
    j["box"] = r_box;
    j["acc"] = r_acc;
    j["format"] = r_format;
    j["tce"] = r_tce;
    j["total"] = total;
    return j;
}

int box_reward(const geometry::BBox& region, const geometry::CoordSpace& orig,
               const RewardWeights& w) {
    return geometry::area_ratio(region, orig) <= w.gamma ? 1 : 0;
}

std::pair<int, std::string> region_reward(backend::Backend& reward_backend,
                                          const imaging::RasterImage& crop,
                                          const std::string& query, const std::string& gt,
                                          const RewardPrompt& prompt,
                                          const backend::CallContext& ctx) {
    if (crop.width < 1 || crop.height < 1) {
        throw std::invalid_argument("region_reward: degenerate crop");
    }
    std::vector<backend::ChatMessage> messages;
    messages.push_back(backend::ChatMessage::text("system", prompt.system));
    messages.push_back(pipeline::image_and_text_user_message(crop, query));

    const std::string raw = reward_backend.complete(ctx, messages);
    // The judge may or may not use the tag grammar; take its answer block if
    // present, the whole reply otherwise.
    const protocol::StageOutput parsed = protocol::parse_output(raw);
    const std::string answer = parsed.answer.value_or(raw);
    return {protocol::match_answer(answer, gt) ? 1 : 0, answer};
}

int accuracy_reward(const protocol::StageOutput& answer_out, const std::string& gt) {
    if (!answer_out.answer) return 0;
    return protocol::match_answer(*answer_out.answer, gt) ? 1 : 0;
}

RewardBreakdown score_rollout(const pipeline::PipelineTrace& trace, const std::string& gt,
                              const RewardWeights& w, backend::Backend& reward_backend,
                              const RewardPrompt& prompt) {
    w.validate();
    RewardBreakdown b;

    // Region not valid for crop: every component stays zero.
    if (!trace.region || !trace.crop_image) {
        b.region_valid = false;
        return b;
    }
    b.region_valid = true;
    b.area_ratio = geometry::area_ratio(*trace.region, trace.orig_space);

    b.r_box = box_reward(*trace.region, trace.orig_space, w);

    try {
        auto [r, answer] = region_reward(reward_backend, *trace.crop_image, trace.question, gt,
                                         prompt, {trace.sample_id, 1, "reward"});
        b.r_region = r;
        b.reward_model_answer = answer;
    } catch (const BackendError&) {
        b.r_region = 0;
        b.flags.push_back("reward_backend_failed");
    }

    const protocol::StageOutput region_out = protocol::parse_output(trace.stage1_text);
    std::optional<protocol::StageOutput> answer_out;
    if (trace.stage2_text) {
        answer_out = protocol::parse_output(*trace.stage2_text);
        b.r_acc = accuracy_reward(*answer_out, gt);
    }
    b.r_format = protocol::format_reward(region_out, answer_out);

    b.r_tce = w.alpha * b.r_region + w.beta * b.r_box;
    b.total = b.r_tce + b.r_acc + b.r_format;
    return b;
}

} // namespace ergo::rewards
