#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>

#include "ergo/backend.hpp"

namespace ergo::backend {

namespace {

struct SplitUrl {
    std::string scheme_host_port; // "http://host:1234"
    std::string path_prefix;      // "/v1" (no trailing slash)
};

SplitUrl split_endpoint(const std::string& endpoint) {
    const std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos) {
        throw ConfigError("backend endpoint must include a scheme: " + endpoint);
    }
    const std::size_t path = endpoint.find('/', scheme + 3);
    SplitUrl out;
    if (path == std::string::npos) {
        out.scheme_host_port = endpoint;
    } else {
        out.scheme_host_port = endpoint.substr(0, path);
        out.path_prefix = endpoint.substr(path);
    }
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
        out.path_prefix.pop_back();
    }
    return out;
}

/// Runtime-sized bound on concurrent requests.
class InflightLimiter {
public:
    explicit InflightLimiter(int max) : available_(max) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }
    void release() {
        {
            std::lock_guard lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

struct InflightGuard {
    InflightLimiter& limiter;
    explicit InflightGuard(InflightLimiter& l) : limiter(l) { limiter.acquire(); }
    ~InflightGuard() { limiter.release(); }
};

double jittered_backoff_seconds(int attempt) {
    thread_local std::mt19937 rng{std::random_device{}()};
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    return 0.5 * static_cast<double>(1 << attempt) * jitter(rng);
}

std::string body_excerpt(const std::string& body) {
    constexpr std::size_t kMax = 200;
    if (body.size() <= kMax) return body;
    return body.substr(0, kMax) + "...";
}

class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(BackendConfig cfg)
        : cfg_(std::move(cfg)), url_(split_endpoint(cfg_.endpoint)), limiter_(cfg_.max_inflight) {
        cfg_.validate();
    }

    std::string complete(const CallContext& ctx,
                         const std::vector<ChatMessage>& messages) override {
        check_messages(messages);
        InflightGuard guard(limiter_);

        const std::string payload = to_wire_json(cfg_, messages).dump();
        httplib::Headers headers;
        if (const char* key = std::getenv("ERGO_API_KEY"); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::duration<double>(jittered_backoff_seconds(attempt - 1)));
            }
            httplib::Client client(url_.scheme_host_port);
            client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
            client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
            client.set_write_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));

            httplib::Result res = client.Post(url_.path_prefix + "/chat/completions", headers,
                                              payload, "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue; // transient transport failure: retry
            }
            if (res->status < 200 || res->status >= 300) {
                throw WireProtocolError(res->status, "backend returned HTTP " +
                                                         std::to_string(res->status) + " for " +
                                                         ctx.key() + ": " +
                                                         body_excerpt(res->body));
            }
            return extract_content(res->body, ctx);
        }
        throw BackendUnavailableError("backend unreachable after " +
                                      std::to_string(cfg_.retries + 1) + " attempts for " +
                                      ctx.key() + ": " + last_error);
    }

private:
    std::string extract_content(const std::string& body, const CallContext& ctx) const {
        const nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (!j.is_discarded() && j.contains("choices") && j["choices"].is_array() &&
            !j["choices"].empty() && j["choices"][0].is_object()) {
            const nlohmann::json msg = j["choices"][0].value("message", nlohmann::json());
            if (msg.is_object() && msg.contains("content") && msg["content"].is_string()) {
                return msg["content"].get<std::string>();
            }
        }
        throw WireProtocolError(200, "malformed completion body for " + ctx.key() + ": " +
                                         body_excerpt(body));
    }

    BackendConfig cfg_;
    SplitUrl url_;
    InflightLimiter limiter_;
};

} // namespace

std::unique_ptr<Backend> make_remote_backend(const BackendConfig& cfg) {
    return std::make_unique<RemoteBackend>(cfg);
}

} // namespace ergo::backend
