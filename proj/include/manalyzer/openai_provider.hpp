#pragma once

// Provider speaking the OpenAI-compatible chat-completions wire format. Works
// against any server exposing POST {base_url}/chat/completions.

#include "manalyzer/gateway.hpp"
#include "manalyzer/http.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace manalyzer::gateway {

inline std::string base64(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                            reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<size_t>(n));
    return out;
}

inline std::string image_mime(const std::filesystem::path& path) {
    auto ext = text::lower(path.extension().string());
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    return "image/png";
}

struct OpenAIOptions {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o";
    std::string vision_model;  // empty: same as model
    std::string api_key;
};

class OpenAIProvider : public Provider {
public:
    OpenAIProvider(OpenAIOptions options, std::shared_ptr<http::Client> client)
        : options_(std::move(options)), client_(std::move(client)) {}

    std::string id() const override { return "openai:" + options_.model; }

    nlohmann::json build_body(const AgentRequest& request) const {
        nlohmann::json content = nlohmann::json::array();
        for (const auto& part : request.user_parts) {
            if (part.is_image()) {
                auto bytes = text::read_file(*part.image);
                content.push_back({{"type", "image_url"},
                                   {"image_url", {{"url", "data:" + image_mime(*part.image) + ";base64," + base64(bytes)}}}});
                if (!part.caption.empty()) content.push_back({{"type", "text"}, {"text", "Caption: " + part.caption}});
            } else {
                content.push_back({{"type", "text"}, {"text", part.text}});
            }
        }
        const auto& model =
            request.kind == Kind::vision && !options_.vision_model.empty() ? options_.vision_model : options_.model;
        return {{"model", model},
                {"temperature", request.temperature},
                {"messages",
                 {{{"role", "system"}, {"content", request.system_prompt}}, {{"role", "user"}, {"content", content}}}}};
    }

    AgentResponse complete(const AgentRequest& request) override {
        http::Headers headers;
        if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
        auto response = client_->post(options_.base_url + "/chat/completions", build_body(request).dump(),
                                      "application/json", headers);
        if (response.status == 429 || response.status >= 500)
            fail(Errc::transport_failure, "provider returned HTTP " + std::to_string(response.status));
        if (response.status < 200 || response.status >= 300)
            fail(Errc::provider_refusal, "provider rejected request with HTTP " + std::to_string(response.status));
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(response.body);
        } catch (const nlohmann::json::exception&) {
            fail(Errc::transport_failure, "provider returned a non-JSON body");
        }
        const auto& choices = body.value("choices", nlohmann::json::array());
        if (choices.empty() || !choices[0].contains("message"))
            fail(Errc::empty_response, "provider returned no choices");
        const auto& message = choices[0]["message"];
        if (message.contains("refusal") && message["refusal"].is_string() &&
            !message["refusal"].get<std::string>().empty())
            fail(Errc::provider_refusal, message["refusal"].get<std::string>());
        std::string text = message.value("content", nlohmann::json()).is_string()
                               ? message["content"].get<std::string>()
                               : std::string();
        if (text.empty()) fail(Errc::empty_response, "provider returned empty content");
        return {std::move(text), id(), 0};
    }

private:
    OpenAIOptions options_;
    std::shared_ptr<http::Client> client_;
};

}  // namespace manalyzer::gateway
