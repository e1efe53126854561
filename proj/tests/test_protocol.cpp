#include <doctest.h>

#include <random>

#include "ergo/protocol.hpp"

using namespace ergo;
using protocol::StageOutput;

TEST_CASE("parse_output: grammar fixtures") {
    SUBCASE("think + zoom") {
        const StageOutput out = protocol::parse_output("<think>t</think><zoom>[10, 20, 110, 220]</zoom>");
        CHECK(out.well_formed);
        CHECK(out.thinking == "t");
        REQUIRE(out.zooms.size() == 1);
        CHECK(out.zooms[0] == std::array<double, 4>{10, 20, 110, 220});
        CHECK_FALSE(out.answer.has_value());
    }
    SUBCASE("think + answer") {
        const StageOutput out = protocol::parse_output("<think>t</think><answer>B</answer>");
        CHECK(out.well_formed);
        CHECK(out.answer == "B");
        CHECK(out.zooms.empty());
    }
    SUBCASE("unclosed think is malformed but answer still extracted") {
        const StageOutput out = protocol::parse_output("<think>t<answer>B</answer>");
        CHECK_FALSE(out.well_formed);
        CHECK(out.answer == "B");
    }
    SUBCASE("think only is not well-formed (needs zoom or answer)") {
        CHECK_FALSE(protocol::parse_output("<think>t</think>").well_formed);
    }
    SUBCASE("zoom before think violates ordering") {
        CHECK_FALSE(
            protocol::parse_output("<zoom>[1, 2, 3, 4]</zoom><think>t</think>").well_formed);
    }
    SUBCASE("nested tags are malformed") {
        CHECK_FALSE(
            protocol::parse_output("<think>a<zoom>[1, 2, 3, 4]</zoom>b</think>").well_formed);
    }
    SUBCASE("non-numeric zoom payload is malformed but skipped") {
        const StageOutput out =
            protocol::parse_output("<think>t</think><zoom>[a, b, c, d]</zoom><answer>B</answer>");
        CHECK_FALSE(out.well_formed);
        CHECK(out.zooms.empty());
        CHECK(out.answer == "B");
    }
    SUBCASE("wrong arity zoom is malformed") {
        CHECK_FALSE(protocol::parse_output("<think>t</think><zoom>[1, 2, 3]</zoom>").well_formed);
    }
    SUBCASE("multiple zooms all parse") {
        const StageOutput out = protocol::parse_output(
            "<think>t</think><zoom>[1, 2, 3, 4]</zoom><zoom>[5, 6, 7, 8]</zoom>");
        CHECK(out.well_formed);
        REQUIRE(out.zooms.size() == 2);
        CHECK(out.zooms[1] == std::array<double, 4>{5, 6, 7, 8});
    }
    SUBCASE("only the first answer block counts") {
        const StageOutput out = protocol::parse_output(
            "<think>t</think><answer>first</answer><answer>second</answer>");
        CHECK(out.well_formed);
        CHECK(out.answer == "first");
    }
    SUBCASE("fractional and negative coordinates are raw-preserved") {
        const StageOutput out =
            protocol::parse_output("<think>t</think><zoom>[1.5, -2.25, 30.75, 44]</zoom>");
        CHECK(out.well_formed);
        CHECK(out.zooms[0] == std::array<double, 4>{1.5, -2.25, 30.75, 44});
    }
    SUBCASE("prose between blocks is tolerated") {
        CHECK(protocol::parse_output("<think>t</think> so <answer>B</answer>").well_formed);
    }
    SUBCASE("empty input is malformed") {
        CHECK_FALSE(protocol::parse_output("").well_formed);
        CHECK_FALSE(protocol::parse_output("no tags at all").well_formed);
    }
}

TEST_CASE("emit/parse round-trip on generated well-formed outputs") {
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> coord(0, 4000);
    std::uniform_int_distribution<int> nzooms(0, 3);
    std::uniform_int_distribution<int> coin(0, 1);
    const std::vector<std::string> texts = {"looking at the image", "small object near the cup",
                                            "t", "compare regions 1 and 2"};
    int produced = 0;
    for (int trial = 0; trial < 200 && produced < 100; ++trial) {
        StageOutput s;
        s.thinking = texts[trial % texts.size()];
        const int z = nzooms(rng);
        for (int i = 0; i < z; ++i) {
            const double x1 = coord(rng), y1 = coord(rng);
            const double w = 1 + coord(rng) % 500, h = 1 + coord(rng) % 500;
            if (coin(rng)) {
                s.zooms.push_back({x1, y1, x1 + w, y1 + h});
            } else {
                s.zooms.push_back({x1 + 0.5, y1 + 0.25, x1 + w, y1 + h + 0.75});
            }
        }
        if (z == 0 || coin(rng)) s.answer = std::string(1, static_cast<char>('A' + trial % 5));
        s.well_formed = true;
        ++produced;

        const StageOutput back = protocol::parse_output(protocol::emit_output(s));
        REQUIRE(back.well_formed);
        CHECK(back == s);
    }
    CHECK(produced == 100);
}

TEST_CASE("format_reward") {
    const auto wf_zoom = protocol::parse_output("<think>t</think><zoom>[1, 2, 30, 40]</zoom>");
    const auto wf_answer = protocol::parse_output("<think>t</think><answer>B</answer>");
    const auto missing_think = protocol::parse_output("<zoom>[1, 2, 30, 40]</zoom>");
    const auto answer_outside = protocol::parse_output("<think>t</think>B");

    SUBCASE("well-formed zoom turn + well-formed answer turn") {
        CHECK(protocol::format_reward(wf_zoom, wf_answer) == 1);
    }
    SUBCASE("zoom turn missing think") {
        CHECK(protocol::format_reward(missing_think, wf_answer) == 0);
    }
    SUBCASE("answer turn with answer outside tags") {
        CHECK(protocol::format_reward(wf_zoom, answer_outside) == 0);
    }
    SUBCASE("direct answer without second turn") {
        CHECK(protocol::format_reward(wf_answer, std::nullopt) == 1);
        // A zoom-only turn with no answer turn carries no answer anywhere.
        CHECK(protocol::format_reward(wf_zoom, std::nullopt) == 0);
    }
    SUBCASE("second turn present but first turn lacks zoom") {
        CHECK(protocol::format_reward(wf_answer, wf_answer) == 0);
    }
    SUBCASE("soundness: reward 1 implies well-formed parse") {
        for (const auto* region : {&wf_zoom, &wf_answer, &missing_think}) {
            for (const auto* answer : {&wf_answer, &answer_outside}) {
                if (protocol::format_reward(*region, *answer) == 1) {
                    CHECK(region->well_formed);
                    CHECK(answer->well_formed);
                }
            }
        }
    }
}

TEST_CASE("normalize_answer") {
    CHECK(protocol::normalize_answer("  B.  ") == "b");
    CHECK(protocol::normalize_answer("Blue \t Whale!") == "blue whale");
    CHECK(protocol::normalize_answer("a,b") == "a,b"); // internal punctuation kept
    CHECK(protocol::normalize_answer("...") == "");
}

TEST_CASE("match_answer") {
    CHECK(protocol::match_answer("B", "B"));
    CHECK(protocol::match_answer(" b.", "B"));
    CHECK_FALSE(protocol::match_answer("blue", "red"));
    CHECK(protocol::match_answer("Blue", "blue"));
    SUBCASE("multiple choice leading letter") {
        CHECK(protocol::match_answer("B. the blue one", "B"));
        CHECK(protocol::match_answer("(c) something", "C"));
        CHECK_FALSE(protocol::match_answer("blue", "b")); // no letter boundary
        CHECK_FALSE(protocol::match_answer("A. the blue one", "B"));
        CHECK_FALSE(protocol::match_answer("", "B"));
    }
    SUBCASE("reflexive under normalization") {
        for (const char* s : {"B", " b.", "Blue Whale", "(c) thing", "42"}) {
            CHECK(protocol::match_answer(s, s));
        }
    }
    SUBCASE("symmetric for non-multiple-choice inputs") {
        const std::pair<const char*, const char*> cases[] = {
            {"blue whale", "Blue  Whale."}, {"red", "blue"}, {"12 dogs", "12 dogs"}};
        for (const auto& [a, b] : cases) {
            CHECK(protocol::match_answer(a, b) == protocol::match_answer(b, a));
        }
    }
}
