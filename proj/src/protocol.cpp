#include "ergo/protocol.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>

#include <json.hpp>

namespace ergo::protocol {

namespace {

enum class Tag { think, zoom, answer };

struct TagToken {
    Tag tag;
    bool open;
    std::size_t pos;        // start of the tag text
    std::size_t content;    // first char after the tag
};

const char* open_text(Tag t) {
    switch (t) {
        case Tag::think: return "<think>";
        case Tag::zoom: return "<zoom>";
        default: return "<answer>";
    }
}

const char* close_text(Tag t) {
    switch (t) {
        case Tag::think: return "</think>";
        case Tag::zoom: return "</zoom>";
        default: return "</answer>";
    }
}

std::vector<TagToken> scan_tags(std::string_view text) {
    std::vector<TagToken> tokens;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '<') continue;
        for (Tag t : {Tag::think, Tag::zoom, Tag::answer}) {
            const std::string_view open = open_text(t);
            const std::string_view close = close_text(t);
            if (text.substr(i).starts_with(open)) {
                tokens.push_back({t, true, i, i + open.size()});
                break;
            }
            if (text.substr(i).starts_with(close)) {
                tokens.push_back({t, false, i, i + close.size()});
                break;
            }
        }
    }
    return tokens;
}

/// First <tag>...</tag> content found at or after `from`, scanning raw text.
std::optional<std::string> block_content(std::string_view text, Tag t, std::size_t from = 0) {
    const std::string_view open = open_text(t);
    const std::string_view close = close_text(t);
    const std::size_t a = text.find(open, from);
    if (a == std::string_view::npos) return std::nullopt;
    const std::size_t b = text.find(close, a + open.size());
    if (b == std::string_view::npos) return std::nullopt;
    return std::string(text.substr(a + open.size(), b - a - open.size()));
}

std::optional<std::array<double, 4>> parse_zoom_payload(const std::string& payload) {
    const nlohmann::json j = nlohmann::json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_array() || j.size() != 4) return std::nullopt;
    std::array<double, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) {
        if (!j[i].is_number()) return std::nullopt;
        out[i] = j[i].get<double>();
        if (!std::isfinite(out[i])) return std::nullopt;
    }
    return out;
}

std::string format_number(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.007199254740992e15) {
        return std::to_string(static_cast<long long>(v));
    }
    return nlohmann::json(v).dump();
}

} // namespace

StageOutput parse_output(std::string_view text) {
    StageOutput out;
    out.raw = std::string(text);

    // Lenient extraction: works whether or not the grammar checks pass.
    if (auto think = block_content(text, Tag::think)) out.thinking = *think;
    out.answer = block_content(text, Tag::answer);

    bool zoom_payload_ok = true;
    const std::string_view zopen = open_text(Tag::zoom);
    const std::string_view zclose = close_text(Tag::zoom);
    std::size_t pos = 0;
    while (true) {
        const std::size_t a = text.find(zopen, pos);
        if (a == std::string_view::npos) break;
        const std::size_t b = text.find(zclose, a + zopen.size());
        if (b == std::string_view::npos) break;
        if (auto tuple =
                parse_zoom_payload(std::string(text.substr(a + zopen.size(), b - a - zopen.size())))) {
            out.zooms.push_back(*tuple);
        } else {
            zoom_payload_ok = false;
        }
        pos = b + zclose.size();
    }

    // Structural checks: every open tag immediately paired with its close
    // (balanced, non-nested), think first, then only zoom/answer blocks.
    const std::vector<TagToken> tokens = scan_tags(text);
    bool structure_ok = !tokens.empty();
    std::vector<Tag> blocks;
    for (std::size_t i = 0; structure_ok && i < tokens.size(); i += 2) {
        if (!tokens[i].open || i + 1 >= tokens.size() || tokens[i + 1].open ||
            tokens[i + 1].tag != tokens[i].tag) {
            structure_ok = false;
            break;
        }
        blocks.push_back(tokens[i].tag);
    }
    bool order_ok = structure_ok && !blocks.empty() && blocks.front() == Tag::think;
    if (order_ok) {
        bool seen_payload_block = false;
        int payload_blocks = 0;
        for (Tag t : blocks) {
            if (t == Tag::think) {
                if (seen_payload_block) order_ok = false;
            } else {
                seen_payload_block = true;
                ++payload_blocks;
            }
        }
        if (payload_blocks == 0) order_ok = false;
    }

    out.well_formed = structure_ok && order_ok && zoom_payload_ok;
    return out;
}

std::string emit_output(const StageOutput& s) {
    std::string out = "<think>" + s.thinking + "</think>";
    for (const auto& z : s.zooms) {
        out += "<zoom>[" + format_number(z[0]) + ", " + format_number(z[1]) + ", " +
               format_number(z[2]) + ", " + format_number(z[3]) + "]</zoom>";
    }
    if (s.answer) {
        out += "<answer>" + *s.answer + "</answer>";
    }
    return out;
}

int format_reward(const StageOutput& region_out, const std::optional<StageOutput>& answer_out) {
    if (!region_out.well_formed) return 0;
    if (answer_out) {
        // Region selection was performed: the first turn must carry a zoom
        // and the answer turn must be well-formed with an answer block.
        if (region_out.zooms.empty()) return 0;
        if (!answer_out->well_formed || !answer_out->answer) return 0;
        return 1;
    }
    // Direct answer: the single turn carries the answer itself.
    return region_out.answer.has_value() ? 1 : 0;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    static constexpr std::string_view kTerminal = ".,;:!? ";
    while (!out.empty() && kTerminal.find(out.back()) != std::string_view::npos) {
        out.pop_back();
    }
    return out;
}

bool match_answer(std::string_view pred, std::string_view gt) {
    const std::string p = normalize_answer(pred);
    const std::string g = normalize_answer(gt);
    if (g.size() == 1 && std::isalpha(static_cast<unsigned char>(g[0]))) {
        // Multiple choice: compare the leading option letter, accepting the
        // common "(b)" parenthesized form.
        std::size_t i = 0;
        if (p.size() > 1 && p[0] == '(') i = 1;
        if (i >= p.size() || !std::isalpha(static_cast<unsigned char>(p[i]))) return false;
        const bool boundary =
            i + 1 >= p.size() || !std::isalnum(static_cast<unsigned char>(p[i + 1]));
        return boundary && p[i] == g[0];
    }
    return p == g;
}

} // namespace ergo::protocol
