#include "ergo/backend.hpp"

#include <fstream>

namespace ergo::backend {

void check_messages(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) {
        throw std::invalid_argument("complete: empty message list");
    }
    for (const ChatMessage& m : messages) {
        if (m.parts.empty()) {
            throw std::invalid_argument("complete: message with no parts");
        }
        if (m.role == "system") continue;
        if (m.role != "user") {
            throw std::invalid_argument("complete: first non-system message must be user, got " +
                                        m.role);
        }
        break;
    }
}

nlohmann::json to_wire_json(const BackendConfig& cfg, const std::vector<ChatMessage>& messages) {
    nlohmann::json body;
    body["model"] = cfg.model;
    body["temperature"] = cfg.temperature;
    body["max_tokens"] = cfg.max_output_tokens;
    nlohmann::json msgs = nlohmann::json::array();
    for (const ChatMessage& m : messages) {
        nlohmann::json jm;
        jm["role"] = m.role;
        if (m.parts.size() == 1 && m.parts[0].kind == MessagePart::Kind::text) {
            jm["content"] = m.parts[0].text;
        } else {
            nlohmann::json content = nlohmann::json::array();
            for (const MessagePart& p : m.parts) {
                if (p.kind == MessagePart::Kind::text) {
                    content.push_back({{"type", "text"}, {"text", p.text}});
                } else {
                    content.push_back(
                        {{"type", "image_url"},
                         {"image_url",
                          {{"url", "data:image/png;base64," + imaging::base64_encode(p.png)}}}});
                }
            }
            jm["content"] = std::move(content);
        }
        msgs.push_back(std::move(jm));
    }
    body["messages"] = std::move(msgs);
    return body;
}

ScriptedBackend ScriptedBackend::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("script file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("script file " + path + " must be a JSON object");
    std::map<std::string, std::string> script;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_string()) {
            throw ConfigError("script entry " + it.key() + " must map to a string");
        }
        script[it.key()] = it.value().get<std::string>();
    }
    return ScriptedBackend(std::move(script));
}

std::string ScriptedBackend::complete(const CallContext& ctx,
                                      const std::vector<ChatMessage>& messages) {
    check_messages(messages);
    if (auto it = script_.find(ctx.key()); it != script_.end()) {
        return it->second;
    }
    // Per-rollout keys embed the rollout index in the sample id ("q1#g2");
    // fall back to the shared entry for the plain sample id.
    const std::size_t hash = ctx.sample_id.rfind("#g");
    if (hash != std::string::npos) {
        CallContext base = ctx;
        base.sample_id = ctx.sample_id.substr(0, hash);
        if (auto it = script_.find(base.key()); it != script_.end()) {
            return it->second;
        }
    }
    throw ScriptedMissError("no scripted response for key '" + ctx.key() + "'");
}

std::string RecordingBackend::complete(const CallContext& ctx,
                                       const std::vector<ChatMessage>& messages) {
    std::string response = inner_.complete(ctx, messages);
    Record rec{ctx, messages, to_wire_json(wire_cfg_, messages), response};
    {
        std::lock_guard lock(mu_);
        records_.push_back(std::move(rec));
    }
    return response;
}

} // namespace ergo::backend
