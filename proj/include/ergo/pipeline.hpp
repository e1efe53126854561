#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergo/backend.hpp"
#include "ergo/dataset.hpp"
#include "ergo/geometry.hpp"
#include "ergo/imaging.hpp"
#include "ergo/protocol.hpp"

namespace ergo::pipeline {

/// Default prompt templates. Stage-1 instructs the tag grammar (think, then
/// zoom or answer); stage-2 asks for the final answer given the crop.
/// "{question}" in the stage-2 template is substituted.
extern const char* const kDefaultStage1System;
extern const char* const kDefaultStage2UserTemplate;

struct PipelineConfig {
    imaging::PixelConstraint coarse_constraint{640};
    /// When set, the stage-2 crop is resized under this budget; by default
    /// the crop goes in at original resolution (aligned down to whole
    /// patches before encoding).
    std::optional<imaging::PixelConstraint> crop_constraint;
    std::string stage1_system = kDefaultStage1System;
    std::string stage2_user_template = kDefaultStage2UserTemplate;
    bool direct_answer_allowed = true;
    /// Injectable wall clock (seconds). Tests replace it to make latency
    /// fields, and therefore whole traces, deterministic.
    std::function<double()> now_seconds;

    void validate() const;
};

/// Full record of one two-stage inference.
struct PipelineTrace {
    std::string sample_id;
    std::string question;
    geometry::CoordSpace orig_space;
    geometry::CoordSpace coarse_space;
    long coarse_tokens = 0;
    std::optional<geometry::BBox> region; // original-image coordinates
    std::optional<geometry::CoordSpace> crop_space; // dims of the image sent to stage 2
    long crop_tokens = 0;
    std::string stage1_text;
    std::optional<std::string> stage2_text;
    std::optional<std::string> final_answer;
    long total_tokens = 0;
    double latency_seconds = 0.0;
    std::vector<std::string> flags;

    /// The stage-2 crop exactly as sent to the backend; kept in memory for
    /// reward scoring, not serialized.
    std::optional<imaging::RasterImage> crop_image;

    nlohmann::json to_json() const;
};

backend::ChatMessage image_and_text_user_message(const imaging::RasterImage& img,
                                                 const std::string& text);

/// System turn with the tag-grammar instructions plus a user turn holding the
/// coarse image and the question.
std::vector<backend::ChatMessage> build_stage1_messages(const dataset::Sample& sample,
                                                        const imaging::RasterImage& coarse,
                                                        const PipelineConfig& cfg);

/// Appends the stage-1 assistant turn verbatim, then a user turn with the
/// crop and the answer instruction. `history` must already contain the
/// assistant turn.
std::vector<backend::ChatMessage> build_stage2_messages(std::vector<backend::ChatMessage> history,
                                                        const imaging::RasterImage& crop,
                                                        const std::string& question,
                                                        const PipelineConfig& cfg);

/// The two-stage run: downsample, stage-1 region prediction, crop at
/// original resolution, stage-2 answer. Invalid regions fall back to the
/// stage-1 direct answer when allowed; every outcome still produces a trace.
PipelineTrace run_sample(const dataset::Sample& sample, const PipelineConfig& cfg,
                         backend::Backend& be, const std::string& call_id_suffix = "");

} // namespace ergo::pipeline
