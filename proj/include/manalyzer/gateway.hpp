#pragma once

// Provider gateway: every agent interaction in the engine goes through
// Gateway::complete(). Providers are pluggable; ScriptedMock replays
// responses keyed on (request tag, content digest) so the whole pipeline can
// run with no network and no model.

#include "manalyzer/digest.hpp"
#include "manalyzer/error.hpp"
#include "manalyzer/text.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace manalyzer::gateway {

enum class Kind { text, vision };

// Pipeline role of a request.
enum class Tag {
    keyword,
    paragraph_score,
    independent_review,
    comparative_review,
    table_convert,
    figure_summary,
    mask,
    extract,
    check,
    plan,
    report,
};

inline constexpr std::array kAllTags = {
    Tag::keyword, Tag::paragraph_score, Tag::independent_review, Tag::comparative_review,
    Tag::table_convert, Tag::figure_summary, Tag::mask, Tag::extract,
    Tag::check, Tag::plan, Tag::report,
};

inline std::string_view to_string(Tag tag) {
    switch (tag) {
        case Tag::keyword: return "keyword";
        case Tag::paragraph_score: return "paragraph_score";
        case Tag::independent_review: return "independent_review";
        case Tag::comparative_review: return "comparative_review";
        case Tag::table_convert: return "table_convert";
        case Tag::figure_summary: return "figure_summary";
        case Tag::mask: return "mask";
        case Tag::extract: return "extract";
        case Tag::check: return "check";
        case Tag::plan: return "plan";
        case Tag::report: return "report";
    }
    return "unknown";
}

inline std::optional<Tag> tag_from_string(std::string_view name) {
    for (Tag tag : kAllTags)
        if (to_string(tag) == name) return tag;
    return std::nullopt;
}

struct Part {
    std::string text;
    std::optional<std::filesystem::path> image;  // absolute or cwd-relative path
    std::string caption;

    static Part of_text(std::string body) { return Part{std::move(body), std::nullopt, {}}; }
    static Part of_image(std::filesystem::path path, std::string caption) {
        return Part{{}, std::move(path), std::move(caption)};
    }
    bool is_image() const { return image.has_value(); }
};

struct AgentRequest {
    Kind kind = Kind::text;
    std::string system_prompt;
    std::vector<Part> user_parts;
    double temperature = 0.0;
    Tag tag = Tag::keyword;
};

struct AgentResponse {
    std::string raw_text;
    std::string provider_id;
    std::int64_t latency_ms = 0;
};

inline void validate(const AgentRequest& request) {
    require(!request.user_parts.empty(), "request has no user parts");
    require(std::isfinite(request.temperature) && request.temperature >= 0.0,
            "temperature must be finite and non-negative");
    bool has_image = false;
    for (const auto& part : request.user_parts) has_image = has_image || part.is_image();
    if (request.kind == Kind::vision)
        require(has_image, "vision request carries no image reference");
}

// Digest binding a response to request content: whitespace-normalised text of
// every user part, images keyed by the digest of their file bytes.
inline std::string content_digest(const AgentRequest& request) {
    digest::Sha256 hasher;
    for (const auto& part : request.user_parts) {
        if (part.is_image()) {
            hasher.update("\x1fimage:");
            hasher.update(digest::sha256_file(*part.image));
            hasher.update("\x1f");
            hasher.update(text::collapse_whitespace(part.caption));
        } else {
            hasher.update("\x1ftext:");
            hasher.update(text::collapse_whitespace(part.text));
        }
    }
    return hasher.hex();
}

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string id() const = 0;
    // Throws Error with transport_failure (retryable), provider_refusal,
    // empty_response or script_miss.
    virtual AgentResponse complete(const AgentRequest& request) = 0;
};

struct ScriptKey {
    Tag tag;
    std::string digest;
    auto operator<=>(const ScriptKey&) const = default;
};

struct ScriptRecord {
    ScriptKey key;
    std::string response;
};

// Script file: one record per line, tab separated
//   <request_tag> \t <digest> \t <response as a JSON string literal>
// Blank lines and lines starting with '#' are ignored.
inline std::string format_script_line(const ScriptRecord& record) {
    return std::string(to_string(record.key.tag)) + '\t' + record.key.digest + '\t' +
           nlohmann::json(record.response).dump() + '\n';
}

inline std::vector<ScriptRecord> parse_script(std::string_view content) {
    std::vector<ScriptRecord> records;
    size_t line_no = 0;
    for (const auto& line : text::split_lines(content)) {
        ++line_no;
        auto trimmed = text::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            fail(Errc::schema_violation, "script line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
        auto tag = tag_from_string(line.substr(0, t1));
        if (!tag)
            fail(Errc::schema_violation, "script line " + std::to_string(line_no) + ": unknown request tag '" +
                                             line.substr(0, t1) + "'");
        std::string digest = line.substr(t1 + 1, t2 - t1 - 1);
        nlohmann::json response;
        try {
            response = nlohmann::json::parse(line.substr(t2 + 1));
        } catch (const nlohmann::json::exception&) {
            fail(Errc::schema_violation, "script line " + std::to_string(line_no) + ": response is not an escaped string");
        }
        if (!response.is_string())
            fail(Errc::schema_violation, "script line " + std::to_string(line_no) + ": response is not an escaped string");
        records.push_back({{*tag, std::move(digest)}, response.get<std::string>()});
    }
    return records;
}

// Deterministic replay provider. Read-only after registration, so a single
// instance can serve concurrent workers.
class ScriptedMock : public Provider {
public:
    std::string id() const override { return "scripted-mock"; }

    void register_script(Tag tag, const std::string& digest, std::string response) {
        std::lock_guard lock(mutex_);
        ScriptKey key{tag, digest};
        if (script_.count(key))
            fail(Errc::duplicate_key, std::string(to_string(tag)) + "/" + digest + " already registered");
        script_.emplace(std::move(key), std::move(response));
    }

    void register_for(const AgentRequest& request, std::string response) {
        register_script(request.tag, content_digest(request), std::move(response));
    }

    void load(std::string_view script_text) {
        for (auto& record : parse_script(script_text))
            register_script(record.key.tag, record.key.digest, std::move(record.response));
    }

    void load_file(const std::filesystem::path& path) { load(text::read_file(path)); }

    AgentResponse complete(const AgentRequest& request) override {
        ScriptKey key{request.tag, content_digest(request)};
        std::string response;
        {
            std::lock_guard lock(mutex_);
            auto it = script_.find(key);
            if (it == script_.end())
                fail(Errc::script_miss, "no scripted response for " + std::string(to_string(key.tag)) + "/" + key.digest);
            response = it->second;
            ++calls_[key];
            ++total_calls_;
        }
        if (response.empty()) fail(Errc::empty_response, "scripted empty response");
        return {std::move(response), id(), 0};
    }

    size_t size() const {
        std::lock_guard lock(mutex_);
        return script_.size();
    }

    // Call ledger, for asserting that resumed runs repeat no work.
    size_t total_calls() const {
        std::lock_guard lock(mutex_);
        return total_calls_;
    }
    size_t calls_for(Tag tag) const {
        std::lock_guard lock(mutex_);
        size_t n = 0;
        for (const auto& [key, count] : calls_)
            if (key.tag == tag) n += count;
        return n;
    }
    std::map<ScriptKey, size_t> call_ledger() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }

private:
    mutable std::mutex mutex_;
    std::map<ScriptKey, std::string> script_;
    std::map<ScriptKey, size_t> calls_;
    size_t total_calls_ = 0;
};

// Wraps a provider and records every successful exchange as a script record.
class RecordingProvider : public Provider {
public:
    explicit RecordingProvider(std::shared_ptr<Provider> inner) : inner_(std::move(inner)) {}

    std::string id() const override { return inner_->id(); }

    AgentResponse complete(const AgentRequest& request) override {
        auto response = inner_->complete(request);
        std::lock_guard lock(mutex_);
        ScriptKey key{request.tag, content_digest(request)};
        if (!recorded_.count(key)) recorded_.emplace(key, response.raw_text);
        return response;
    }

    // Records in key order, ready for a script file.
    std::string script() const {
        std::lock_guard lock(mutex_);
        std::string out;
        for (const auto& [key, response] : recorded_) out += format_script_line({key, response});
        return out;
    }

private:
    std::shared_ptr<Provider> inner_;
    mutable std::mutex mutex_;
    std::map<ScriptKey, std::string> recorded_;
};

struct GatewayOptions {
    int retries = 3;
    int max_in_flight = 4;
    std::chrono::milliseconds backoff_base{1000};
    bool require_zero_temperature = true;
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
};

class Gateway {
public:
    using Observer = std::function<void(const AgentRequest&)>;

    explicit Gateway(std::shared_ptr<Provider> provider, GatewayOptions options = {})
        : provider_(std::move(provider)), options_(std::move(options)) {
        require(provider_ != nullptr, "gateway needs a provider");
        require(options_.max_in_flight >= 1, "provider.max_in_flight must be >= 1");
        require(options_.retries >= 0, "provider.retries must be >= 0");
    }

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    // Observers see every request before it is dispatched.
    void add_observer(Observer observer) {
        std::lock_guard lock(observer_mutex_);
        observers_.push_back(std::move(observer));
    }

    AgentResponse complete(const AgentRequest& request) {
        validate(request);
        if (options_.require_zero_temperature)
            require(request.temperature == 0.0, "pipeline requests must use temperature 0");
        {
            std::lock_guard lock(observer_mutex_);
            for (const auto& observer : observers_) observer(request);
        }
        InFlightSlot slot(*this);
        for (int attempt = 0;; ++attempt) {
            auto started = std::chrono::steady_clock::now();
            try {
                auto response = provider_->complete(request);
                response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::steady_clock::now() - started)
                                          .count();
                ++completed_;
                return response;
            } catch (const Error& e) {
                if (e.code() != Errc::transport_failure || attempt >= options_.retries) throw;
                options_.sleep(options_.backoff_base * (1LL << attempt));
            }
        }
    }

    const Provider& provider() const { return *provider_; }
    size_t completed() const { return completed_.load(); }
    int peak_in_flight() const {
        std::lock_guard lock(slot_mutex_);
        return peak_in_flight_;
    }

private:
    class InFlightSlot {
    public:
        explicit InFlightSlot(Gateway& g) : g_(g) {
            std::unique_lock lock(g_.slot_mutex_);
            g_.slot_cv_.wait(lock, [&] { return g_.in_flight_ < g_.options_.max_in_flight; });
            ++g_.in_flight_;
            g_.peak_in_flight_ = std::max(g_.peak_in_flight_, g_.in_flight_);
        }
        ~InFlightSlot() {
            {
                std::lock_guard lock(g_.slot_mutex_);
                --g_.in_flight_;
            }
            g_.slot_cv_.notify_one();
        }

    private:
        Gateway& g_;
    };

    std::shared_ptr<Provider> provider_;
    GatewayOptions options_;
    std::mutex observer_mutex_;
    std::vector<Observer> observers_;
    mutable std::mutex slot_mutex_;
    std::condition_variable slot_cv_;
    int in_flight_ = 0;
    int peak_in_flight_ = 0;
    std::atomic<size_t> completed_{0};
};

}  // namespace manalyzer::gateway
