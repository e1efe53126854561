#include "ergo/pipeline.hpp"

#include <algorithm>
#include <chrono>

namespace ergo::pipeline {

const char* const kDefaultStage1System =
    "You answer questions about images. Reason step by step inside <think></think> tags first. "
    "If a closer look at part of the image would help, output the region to magnify as "
    "<zoom>[x1, y1, x2, y2]</zoom> in pixel coordinates of the image you were shown. "
    "If you can already answer, give the final answer inside <answer></answer> tags.";

const char* const kDefaultStage2UserTemplate =
    "Here is the selected region at higher resolution. Reason inside <think></think> tags, "
    "then give the final answer inside <answer></answer> tags.\nQuestion: {question}";

namespace {

double real_clock_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string substitute(std::string templ, const std::string& key, const std::string& value) {
    const std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = templ.find(needle, pos)) != std::string::npos) {
        templ.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return templ;
}

nlohmann::json space_json(const geometry::CoordSpace& s) {
    return {{"width", s.width}, {"height", s.height}};
}

} // namespace

void PipelineConfig::validate() const {
    if (coarse_constraint.max_tokens < 1) {
        throw ConfigError("pipeline: coarse pixel constraint must be >= 1 token");
    }
    if (crop_constraint && crop_constraint->max_tokens < 1) {
        throw ConfigError("pipeline: crop pixel constraint must be >= 1 token");
    }
    if (stage1_system.find("<think>") == std::string::npos ||
        stage1_system.find("<zoom>") == std::string::npos) {
        throw ConfigError("pipeline: stage-1 template lacks the <think>/<zoom> tag instructions");
    }
    if (stage2_user_template.find("<answer>") == std::string::npos) {
        throw ConfigError("pipeline: stage-2 template lacks the <answer> tag instruction");
    }
}

nlohmann::json PipelineTrace::to_json() const {
    nlohmann::json j;
    j["sample_id"] = sample_id;
    j["question"] = question;
    j["orig_space"] = space_json(orig_space);
    j["coarse_space"] = space_json(coarse_space);
    j["coarse_tokens"] = coarse_tokens;
    if (region) {
        j["region"] = {region->x1, region->y1, region->x2, region->y2};
    } else {
        j["region"] = nullptr;
    }
    if (crop_space) {
        j["crop_space"] = space_json(*crop_space);
    } else {
        j["crop_space"] = nullptr;
    }
    j["crop_tokens"] = crop_tokens;
    j["stage1_text"] = stage1_text;
    j["stage2_text"] = stage2_text ? nlohmann::json(*stage2_text) : nlohmann::json(nullptr);
    j["final_answer"] = final_answer ? nlohmann::json(*final_answer) : nlohmann::json(nullptr);
    j["total_tokens"] = total_tokens;
    j["latency_seconds"] = latency_seconds;
    j["flags"] = flags;
    return j;
}

backend::ChatMessage image_and_text_user_message(const imaging::RasterImage& img,
                                                 const std::string& text) {
    backend::ChatMessage m;
    m.role = "user";
    m.parts.push_back(backend::MessagePart::make_image(img));
    m.parts.push_back(backend::MessagePart::make_text(text));
    return m;
}

std::vector<backend::ChatMessage> build_stage1_messages(const dataset::Sample& sample,
                                                        const imaging::RasterImage& coarse,
                                                        const PipelineConfig& cfg) {
    if (sample.question.empty()) {
        throw std::invalid_argument("build_stage1_messages: empty question for sample '" +
                                    sample.id + "'");
    }
    cfg.validate();
    std::string question = sample.question;
    if (!sample.options.empty()) {
        question += "\nOptions:";
        char letter = 'A';
        for (const std::string& opt : sample.options) {
            question += "\n";
            question.push_back(letter++);
            question += ". " + opt;
        }
    }
    std::vector<backend::ChatMessage> messages;
    messages.push_back(backend::ChatMessage::text("system", cfg.stage1_system));
    messages.push_back(image_and_text_user_message(coarse, question));
    return messages;
}

std::vector<backend::ChatMessage> build_stage2_messages(std::vector<backend::ChatMessage> history,
                                                        const imaging::RasterImage& crop,
                                                        const std::string& question,
                                                        const PipelineConfig& cfg) {
    const bool has_assistant =
        !history.empty() &&
        std::any_of(history.begin(), history.end(),
                    [](const backend::ChatMessage& m) { return m.role == "assistant"; });
    if (!has_assistant) {
        throw std::invalid_argument("build_stage2_messages: history lacks the stage-1 assistant turn");
    }
    history.push_back(image_and_text_user_message(
        crop, substitute(cfg.stage2_user_template, "question", question)));
    return history;
}

PipelineTrace run_sample(const dataset::Sample& sample, const PipelineConfig& cfg,
                         backend::Backend& be, const std::string& call_id_suffix) {
    cfg.validate();
    const auto now = cfg.now_seconds ? cfg.now_seconds : real_clock_seconds;
    const double t0 = now();

    PipelineTrace trace;
    trace.sample_id = sample.id;
    trace.question = sample.question;
    const std::string call_id = sample.id + call_id_suffix;

    imaging::RasterImage orig = imaging::decode_image(sample.image_path);
    trace.orig_space = orig.space();

    const imaging::RasterImage coarse = imaging::downsample(orig, cfg.coarse_constraint);
    trace.coarse_space = coarse.space();
    trace.coarse_tokens = imaging::token_count(coarse.width, coarse.height);

    std::vector<backend::ChatMessage> stage1 = build_stage1_messages(sample, coarse, cfg);
    try {
        trace.stage1_text = be.complete({call_id, 1, "policy"}, stage1);
    } catch (const BackendError& e) {
        throw BackendUnavailableError("sample '" + sample.id + "' stage 1: " + e.what());
    }
    const protocol::StageOutput out1 = protocol::parse_output(trace.stage1_text);

    auto finish = [&](PipelineTrace& t) {
        t.total_tokens = t.coarse_tokens + t.crop_tokens;
        t.latency_seconds = now() - t0;
        return t;
    };
    auto fall_back_to_direct = [&] {
        if (cfg.direct_answer_allowed && out1.answer) {
            trace.final_answer = out1.answer;
        } else {
            trace.flags.push_back("answer_missing");
        }
    };

    if (out1.zooms.empty()) {
        if (!out1.well_formed) trace.flags.push_back("stage1_malformed");
        fall_back_to_direct();
        return finish(trace);
    }

    // Zoom coordinates are interpreted in the coarse image's pixel space
    // (what the policy saw) and mapped onto the original for cropping. Only
    // the first zoom box drives the crop.
    const auto& z = out1.zooms.front();
    const auto coarse_box =
        geometry::clamp_and_validate(z[0], z[1], z[2], z[3], trace.coarse_space);
    const auto region = coarse_box
                            ? geometry::scale_box(*coarse_box, trace.coarse_space, trace.orig_space)
                            : std::nullopt;
    if (!region) {
        trace.flags.push_back("invalid_region");
        fall_back_to_direct();
        return finish(trace);
    }
    trace.region = region;

    const imaging::RasterImage cropped = imaging::crop(orig, *region);
    const imaging::RasterImage sent = imaging::downsample(
        cropped, cfg.crop_constraint.value_or(imaging::PixelConstraint::unbounded()));
    trace.crop_space = sent.space();
    trace.crop_tokens = imaging::token_count(sent.width, sent.height);
    trace.crop_image = sent;

    std::vector<backend::ChatMessage> history = std::move(stage1);
    history.push_back(backend::ChatMessage::text("assistant", trace.stage1_text));
    const std::vector<backend::ChatMessage> stage2 =
        build_stage2_messages(std::move(history), sent, sample.question, cfg);
    try {
        trace.stage2_text = be.complete({call_id, 2, "policy"}, stage2);
    } catch (const BackendError& e) {
        throw BackendUnavailableError("sample '" + sample.id + "' stage 2: " + e.what());
    }
    const protocol::StageOutput out2 = protocol::parse_output(*trace.stage2_text);
    if (out2.answer) {
        trace.final_answer = out2.answer;
    } else {
        trace.flags.push_back("answer_missing");
    }
    if (!out2.well_formed) trace.flags.push_back("stage2_malformed");
    return finish(trace);
}

} // namespace ergo::pipeline
