#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergo/errors.hpp"
#include "ergo/imaging.hpp"

namespace ergo::backend {

/// One content part of a chat message: text, or a PNG-encoded image with its
/// declared pixel dimensions.
struct MessagePart {
    enum class Kind { text, image };
    Kind kind = Kind::text;
    std::string text;
    std::vector<std::uint8_t> png;
    int image_width = 0;
    int image_height = 0;

    static MessagePart make_text(std::string t) {
        MessagePart p;
        p.text = std::move(t);
        return p;
    }
    static MessagePart make_image(const imaging::RasterImage& img) {
        MessagePart p;
        p.kind = Kind::image;
        p.png = imaging::encode_png(img);
        p.image_width = img.width;
        p.image_height = img.height;
        return p;
    }
};

struct ChatMessage {
    std::string role; // system | user | assistant
    std::vector<MessagePart> parts;

    static ChatMessage text(std::string role, std::string content) {
        ChatMessage m;
        m.role = std::move(role);
        m.parts.push_back(MessagePart::make_text(std::move(content)));
        return m;
    }
};

struct BackendConfig {
    std::string endpoint = "http://127.0.0.1:8000/v1";
    std::string model = "default";
    double temperature = 0.0;
    int max_output_tokens = 1024;
    double timeout_seconds = 120.0;
    int retries = 2;
    int max_inflight = 8;

    void validate() const {
        if (timeout_seconds <= 0) throw ConfigError("backend timeout must be > 0");
        if (retries < 0) throw ConfigError("backend retries must be >= 0");
        if (max_inflight < 1) throw ConfigError("backend max_inflight must be >= 1");
    }
};

/// Identifies one completion call so scripted backends can look up fixtures
/// and recording backends can label their log. role_tag distinguishes the
/// policy model from the reward model (and experiment variants such as
/// "policy-masked").
struct CallContext {
    std::string sample_id;
    int turn = 1;
    std::string role_tag = "policy";

    std::string key() const {
        return sample_id + "|" + std::to_string(turn) + "|" + role_tag;
    }
};

class Backend {
public:
    virtual ~Backend() = default;

    /// Returns the assistant text for the conversation. Throws BackendError
    /// subclasses on failure. Implementations are safe for concurrent calls.
    virtual std::string complete(const CallContext& ctx,
                                 const std::vector<ChatMessage>& messages) = 0;
};

/// Shared precondition check: non-empty, first non-system message is user.
void check_messages(const std::vector<ChatMessage>& messages);

/// OpenAI-style chat-completions request body. Images are embedded as
/// `data:image/png;base64,...` URIs; this serialization is the wire contract
/// golden tests pin down.
nlohmann::json to_wire_json(const BackendConfig& cfg, const std::vector<ChatMessage>& messages);

/// Deterministic fixture backend. Keys are "<sample-id>|<turn>|<role-tag>";
/// a per-rollout variant "<sample-id>#g<g>|<turn>|<role-tag>" is consulted
/// first so grouped rollouts can diverge.
class ScriptedBackend : public Backend {
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(std::map<std::string, std::string> script)
        : script_(std::move(script)) {}

    static ScriptedBackend from_json_file(const std::string& path);

    void add(const CallContext& ctx, std::string response) {
        script_[ctx.key()] = std::move(response);
    }
    void add(const std::string& key, std::string response) {
        script_[key] = std::move(response);
    }

    std::string complete(const CallContext& ctx,
                         const std::vector<ChatMessage>& messages) override;

private:
    std::map<std::string, std::string> script_;
};

/// Wraps another backend and keeps a log of every call (context, messages
/// and serialized wire body). Tests assert on the log.
class RecordingBackend : public Backend {
public:
    struct Record {
        CallContext ctx;
        std::vector<ChatMessage> messages;
        nlohmann::json wire;
        std::string response;
    };

    explicit RecordingBackend(Backend& inner, BackendConfig wire_cfg = {})
        : inner_(inner), wire_cfg_(std::move(wire_cfg)) {}

    std::string complete(const CallContext& ctx,
                         const std::vector<ChatMessage>& messages) override;

    std::vector<Record> records() const {
        std::lock_guard lock(mu_);
        return records_;
    }
    void clear() {
        std::lock_guard lock(mu_);
        records_.clear();
    }

private:
    Backend& inner_;
    BackendConfig wire_cfg_;
    mutable std::mutex mu_;
    std::vector<Record> records_;
};

/// Remote OpenAI-compatible chat-completions client (see http_backend.cpp).
/// Bearer auth comes from the ERGO_API_KEY environment variable.
std::unique_ptr<Backend> make_remote_backend(const BackendConfig& cfg);

} // namespace ergo::backend
