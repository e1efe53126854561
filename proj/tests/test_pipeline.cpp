#include <doctest.h>

#include <algorithm>
#include <memory>
#include <set>

#include "ergo/pipeline.hpp"
#include "testutil.hpp"

using namespace ergo;
using backend::CallContext;
using pipeline::PipelineConfig;
using pipeline::PipelineTrace;

namespace {

struct PipelineFixture {
    testutil::TempDir dir;
    dataset::Sample sample;
    backend::ScriptedBackend scripted;
    PipelineConfig cfg;

    explicit PipelineFixture(int w = 400, int h = 300, int tokens = 64) {
        const auto img = testutil::gradient_image(w, h);
        sample.id = "s1";
        sample.image_path = testutil::write_png(dir, "s1.png", img);
        sample.question = "what letter?";
        sample.gt_answer = "B";
        sample.image_space = img.space();
        cfg.coarse_constraint = imaging::PixelConstraint{tokens};
        cfg.now_seconds = [n = std::make_shared<int>(0)]() mutable {
            return static_cast<double>((*n)++);
        };
    }
};

long probed_tokens_of_wire_images(const backend::RecordingBackend& rec) {
    long total = 0;
    std::set<std::string> seen;
    for (const auto& record : rec.records()) {
        for (const auto& msg : record.wire["messages"]) {
            if (!msg["content"].is_array()) continue;
            for (const auto& part : msg["content"]) {
                if (part["type"] != "image_url") continue;
                const std::string url = part["image_url"]["url"].get<std::string>();
                if (!seen.insert(url).second) continue; // history repeats earlier images
                const std::string prefix = "data:image/png;base64,";
                REQUIRE(url.rfind(prefix, 0) == 0);
                const auto png = imaging::base64_decode(url.substr(prefix.size()));
                const auto dims = imaging::probe_image_dims_bytes(png);
                total += imaging::token_count(dims.width, dims.height);
            }
        }
    }
    return total;
}

} // namespace

TEST_CASE("build_stage1_messages: shape, options and validation") {
    PipelineFixture fx;
    const auto coarse = imaging::downsample(imaging::decode_image(fx.sample.image_path),
                                            fx.cfg.coarse_constraint);
    SUBCASE("system + user(image, question)") {
        const auto msgs = pipeline::build_stage1_messages(fx.sample, coarse, fx.cfg);
        REQUIRE(msgs.size() == 2);
        CHECK(msgs[0].role == "system");
        CHECK(msgs[0].parts[0].text == fx.cfg.stage1_system);
        CHECK(msgs[1].role == "user");
        REQUIRE(msgs[1].parts.size() == 2);
        CHECK(msgs[1].parts[0].kind == backend::MessagePart::Kind::image);
        CHECK(msgs[1].parts[1].text == "what letter?");
    }
    SUBCASE("multiple-choice options are lettered") {
        fx.sample.options = {"red", "blue"};
        const auto msgs = pipeline::build_stage1_messages(fx.sample, coarse, fx.cfg);
        CHECK(msgs[1].parts[1].text == "what letter?\nOptions:\nA. red\nB. blue");
    }
    SUBCASE("empty question is a precondition error") {
        fx.sample.question.clear();
        CHECK_THROWS_AS(pipeline::build_stage1_messages(fx.sample, coarse, fx.cfg),
                        std::invalid_argument);
    }
    SUBCASE("template without zoom instruction fails validation") {
        fx.cfg.stage1_system = "just <think> about it";
        CHECK_THROWS_AS(pipeline::build_stage1_messages(fx.sample, coarse, fx.cfg), ConfigError);
    }
}

TEST_CASE("build_stage2_messages: appends assistant turn then crop turn") {
    PipelineFixture fx;
    const auto img = imaging::decode_image(fx.sample.image_path);
    const auto coarse = imaging::downsample(img, fx.cfg.coarse_constraint);
    auto history = pipeline::build_stage1_messages(fx.sample, coarse, fx.cfg);

    SUBCASE("history without assistant turn is rejected") {
        const auto crop = testutil::gradient_image(28, 28);
        CHECK_THROWS_AS(pipeline::build_stage2_messages(history, crop, "q", fx.cfg),
                        std::invalid_argument);
    }
    SUBCASE("question substitution and ordering") {
        history.push_back(backend::ChatMessage::text("assistant", "<think>t</think>"));
        const auto crop = testutil::gradient_image(28, 28);
        const auto msgs = pipeline::build_stage2_messages(history, crop, "what letter?", fx.cfg);
        REQUIRE(msgs.size() == 4);
        CHECK(msgs[2].role == "assistant");
        CHECK(msgs[3].role == "user");
        CHECK(msgs[3].parts[0].kind == backend::MessagePart::Kind::image);
        CHECK(msgs[3].parts[1].text.find("what letter?") != std::string::npos);
        CHECK(msgs[3].parts[1].text.find("{question}") == std::string::npos);
    }
    SUBCASE("degenerate 1x1 crop is accepted") {
        history.push_back(backend::ChatMessage::text("assistant", "<think>t</think>"));
        const auto crop = testutil::gradient_image(1, 1);
        CHECK_NOTHROW(pipeline::build_stage2_messages(history, crop, "q", fx.cfg));
    }
}

TEST_CASE("run_sample: scripted two-turn run with token accounting") {
    PipelineFixture fx; // 400x300 at N=64 -> coarse 252x168 = 54 tokens
    fx.scripted.add({"s1", 1, "policy"}, "<think>t</think><zoom>[0, 0, 126, 84]</zoom>");
    fx.scripted.add({"s1", 2, "policy"}, "<think>t</think><answer>B</answer>");
    backend::RecordingBackend rec(fx.scripted);

    const PipelineTrace trace = pipeline::run_sample(fx.sample, fx.cfg, rec);
    CHECK(trace.coarse_space == geometry::CoordSpace{252, 168});
    CHECK(trace.coarse_tokens == 54);
    REQUIRE(trace.region.has_value());
    // (126,84) in 252x168 maps to exactly half of 400x300.
    CHECK(*trace.region == geometry::BBox{0, 0, 200, 150, {400, 300}});
    CHECK(trace.crop_space == geometry::CoordSpace{196, 140});
    CHECK(trace.crop_tokens == 35);
    CHECK(trace.total_tokens == 54 + 35);
    CHECK(trace.final_answer == "B");
    CHECK(trace.flags.empty());
    CHECK(trace.latency_seconds == 1.0); // fake clock ticks once per call

    SUBCASE("trace totals equal token_count of the actual images sent") {
        CHECK(probed_tokens_of_wire_images(rec) == trace.total_tokens);
    }
    SUBCASE("stage-2 history carries the stage-1 turns verbatim") {
        const auto records = rec.records();
        REQUIRE(records.size() == 2);
        REQUIRE(records[1].messages.size() == 4);
        CHECK(records[1].messages[2].role == "assistant");
        CHECK(records[1].messages[2].parts[0].text == trace.stage1_text);
        // The coarse image stays in the turn-1 user message.
        CHECK(records[1].messages[1].parts[0].png == records[0].messages[1].parts[0].png);
    }
}

TEST_CASE("run_sample: direct answer path uses only coarse tokens") {
    PipelineFixture fx;
    fx.scripted.add({"s1", 1, "policy"}, "<think>easy</think><answer>B</answer>");
    const PipelineTrace trace = pipeline::run_sample(fx.sample, fx.cfg, fx.scripted);
    CHECK_FALSE(trace.region.has_value());
    CHECK(trace.crop_tokens == 0);
    CHECK(trace.total_tokens == trace.coarse_tokens);
    CHECK(trace.final_answer == "B");
    CHECK_FALSE(trace.stage2_text.has_value());
}

TEST_CASE("run_sample: malformed stage-1 still emits a trace") {
    PipelineFixture fx;
    fx.scripted.add({"s1", 1, "policy"}, "garbled output with no tags");
    const PipelineTrace trace = pipeline::run_sample(fx.sample, fx.cfg, fx.scripted);
    CHECK_FALSE(trace.final_answer.has_value());
    CHECK(std::count(trace.flags.begin(), trace.flags.end(), "answer_missing") == 1);
    CHECK(std::count(trace.flags.begin(), trace.flags.end(), "stage1_malformed") == 1);
    CHECK(trace.total_tokens == trace.coarse_tokens);
}

TEST_CASE("run_sample: invalid zoom falls back to the direct answer") {
    PipelineFixture fx;
    fx.scripted.add({"s1", 1, "policy"},
                    "<think>t</think><zoom>[50, 50, 10, 10]</zoom><answer>B</answer>");
    const PipelineTrace trace = pipeline::run_sample(fx.sample, fx.cfg, fx.scripted);
    CHECK_FALSE(trace.region.has_value());
    CHECK(std::count(trace.flags.begin(), trace.flags.end(), "invalid_region") == 1);
    CHECK(trace.final_answer == "B");

    SUBCASE("without a direct answer the trace is flagged answer_missing") {
        fx.scripted.add({"s1", 1, "policy"}, "<think>t</think><zoom>[50, 50, 10, 10]</zoom>");
        backend::ScriptedBackend only_bad;
        only_bad.add({"s1", 1, "policy"}, "<think>t</think><zoom>[50, 50, 10, 10]</zoom>");
        const PipelineTrace t2 = pipeline::run_sample(fx.sample, fx.cfg, only_bad);
        CHECK(std::count(t2.flags.begin(), t2.flags.end(), "answer_missing") == 1);
    }
}

TEST_CASE("run_sample: full-frame zoom crops the original image exactly") {
    PipelineFixture fx(112, 112, 16); // aligned and within budget: coarse == original
    fx.scripted.add({"s1", 1, "policy"}, "<think>t</think><zoom>[0, 0, 112, 112]</zoom>");
    fx.scripted.add({"s1", 2, "policy"}, "<think>t</think><answer>B</answer>");
    const PipelineTrace trace = pipeline::run_sample(fx.sample, fx.cfg, fx.scripted);
    REQUIRE(trace.region.has_value());
    CHECK(*trace.region == geometry::BBox{0, 0, 112, 112, {112, 112}});
    REQUIRE(trace.crop_image.has_value());
    CHECK(*trace.crop_image == imaging::decode_image(fx.sample.image_path));
}

TEST_CASE("run_sample: optional crop constraint caps crop tokens") {
    PipelineFixture fx;
    fx.cfg.crop_constraint = imaging::PixelConstraint{9};
    fx.scripted.add({"s1", 1, "policy"}, "<think>t</think><zoom>[0, 0, 126, 84]</zoom>");
    fx.scripted.add({"s1", 2, "policy"}, "<think>t</think><answer>B</answer>");
    const PipelineTrace trace = pipeline::run_sample(fx.sample, fx.cfg, fx.scripted);
    CHECK(trace.crop_tokens <= 9);
    CHECK(trace.crop_tokens > 0);
}

TEST_CASE("run_sample: bit-deterministic with the scripted backend") {
    PipelineFixture fx;
    fx.scripted.add({"s1", 1, "policy"}, "<think>t</think><zoom>[10, 10, 80, 60]</zoom>");
    fx.scripted.add({"s1", 2, "policy"}, "<think>t</think><answer>B</answer>");

    std::string first;
    for (int rep = 0; rep < 10; ++rep) {
        PipelineConfig cfg = fx.cfg;
        cfg.now_seconds = [n = std::make_shared<int>(0)]() mutable {
            return static_cast<double>((*n)++);
        };
        const std::string serialized =
            pipeline::run_sample(fx.sample, cfg, fx.scripted).to_json().dump();
        if (rep == 0) {
            first = serialized;
        } else {
            REQUIRE(serialized == first);
        }
    }
}

TEST_CASE("run_sample: backend failure propagates with sample context") {
    PipelineFixture fx; // no script entries at all
    try {
        pipeline::run_sample(fx.sample, fx.cfg, fx.scripted);
        FAIL("expected BackendUnavailableError");
    } catch (const BackendUnavailableError& e) {
        CHECK(std::string(e.what()).find("s1") != std::string::npos);
        CHECK(std::string(e.what()).find("stage 1") != std::string::npos);
    }
}

TEST_CASE("trace json: schema fields") {
    PipelineFixture fx;
    fx.scripted.add({"s1", 1, "policy"}, "<think>t</think><zoom>[0, 0, 126, 84]</zoom>");
    fx.scripted.add({"s1", 2, "policy"}, "<think>t</think><answer>B</answer>");
    const nlohmann::json j = pipeline::run_sample(fx.sample, fx.cfg, fx.scripted).to_json();
    for (const char* key :
         {"sample_id", "question", "orig_space", "coarse_space", "coarse_tokens", "region",
          "crop_space", "crop_tokens", "stage1_text", "stage2_text", "final_answer",
          "total_tokens", "latency_seconds", "flags"}) {
        CHECK(j.contains(key));
    }
    REQUIRE(j["region"].is_array());
    CHECK(j["region"].size() == 4);
}
