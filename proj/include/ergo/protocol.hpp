#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ergo::protocol {

/// Parsed view of one model turn. `zooms` holds the raw coordinates exactly
/// as emitted (rounding to pixels happens at box validation); `raw` keeps the
/// original text for logging and re-scoring.
struct StageOutput {
    std::string thinking;
    std::vector<std::array<double, 4>> zooms;
    std::optional<std::string> answer;
    bool well_formed = false;
    std::string raw;

    bool operator==(const StageOutput& other) const {
        // Semantic equality; `raw` is provenance, not content.
        return thinking == other.thinking && zooms == other.zooms && answer == other.answer &&
               well_formed == other.well_formed;
    }
};

/// Extracts the first <think> block, every <zoom>[x1, y1, x2, y2]</zoom>
/// block and the first <answer> block. Extraction is lenient; well_formed is
/// set only when tags are balanced, non-nested, think comes before any
/// zoom/answer, every zoom payload is a JSON array of 4 finite numbers, and
/// at least one of zoom/answer is present. Never throws.
StageOutput parse_output(std::string_view text);

/// Canonical serialization: think block, zoom blocks, answer block, in that
/// order. parse_output(emit_output(s)) == s for well-formed s whose text
/// parts contain no grammar tags.
std::string emit_output(const StageOutput& s);

/// 1 iff the region turn is well-formed, carries a zoom tag whenever a
/// second (answer) turn exists, carries the answer itself otherwise, and the
/// answer turn (when present) is well-formed with an <answer> block.
int format_reward(const StageOutput& region_out, const std::optional<StageOutput>& answer_out);

/// Trim, lowercase, collapse whitespace, strip terminal punctuation.
std::string normalize_answer(std::string_view text);

/// Normalized comparison; for single-letter ground truths the leading option
/// letter of the prediction is compared instead of the full text.
bool match_answer(std::string_view pred, std::string_view gt);

} // namespace ergo::protocol
