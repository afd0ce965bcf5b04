#include "manalyzer/openai_provider.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

using namespace manalyzer;
using namespace manalyzer::gateway;
using manalyzer::testing::TempDir;

namespace {

class FakeApi {
public:
    FakeApi() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            last_body = nlohmann::json::parse(req.body);
            last_auth = req.get_header_value("Authorization");
            res.status = status;
            res.set_content(reply, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeApi() {
        server_.stop();
        thread_.join();
    }
    OpenAIOptions options() const {
        OpenAIOptions o;
        o.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        o.model = "text-model";
        o.vision_model = "vision-model";
        o.api_key = "secret";
        return o;
    }

    int status = 200;
    std::string reply;
    nlohmann::json last_body;
    std::string last_auth;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string chat_reply(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

AgentRequest request(Tag tag, std::string body) {
    AgentRequest r;
    r.tag = tag;
    r.system_prompt = "sys";
    r.user_parts = {Part::of_text(std::move(body))};
    return r;
}

}  // namespace

TEST(Base64, KnownVectors) {
    EXPECT_EQ(base64(""), "");
    EXPECT_EQ(base64("f"), "Zg==");
    EXPECT_EQ(base64("fo"), "Zm8=");
    EXPECT_EQ(base64("foobar"), "Zm9vYmFy");
}

TEST(OpenAIProvider, SendsChatCompletionAndReturnsContent) {
    FakeApi api;
    api.reply = chat_reply("Topic Relevance: 8\nFeasibility: 7");
    OpenAIProvider provider(api.options(), std::make_shared<http::HttplibClient>());
    auto response = provider.complete(request(Tag::independent_review, "paper text"));
    EXPECT_EQ(response.raw_text, "Topic Relevance: 8\nFeasibility: 7");
    EXPECT_EQ(api.last_auth, "Bearer secret");
    EXPECT_EQ(api.last_body["model"], "text-model");
    EXPECT_EQ(api.last_body["temperature"], 0.0);
    EXPECT_EQ(api.last_body["messages"][0]["content"], "sys");
    EXPECT_EQ(api.last_body["messages"][1]["content"][0]["text"], "paper text");
}

TEST(OpenAIProvider, VisionRequestsEmbedImageAsDataUri) {
    FakeApi api;
    api.reply = chat_reply("| a |\n|---|\n| 1 |");
    TempDir dir;
    manalyzer::testing::write(dir / "t1.png", "foobar");
    AgentRequest r;
    r.kind = Kind::vision;
    r.tag = Tag::table_convert;
    r.user_parts = {Part::of_image(dir / "t1.png", "Table 1")};
    OpenAIProvider provider(api.options(), std::make_shared<http::HttplibClient>());
    provider.complete(r);
    EXPECT_EQ(api.last_body["model"], "vision-model");
    EXPECT_EQ(api.last_body["messages"][1]["content"][0]["image_url"]["url"], "data:image/png;base64,Zm9vYmFy");
    EXPECT_EQ(api.last_body["messages"][1]["content"][1]["text"], "Caption: Table 1");
}

TEST(OpenAIProvider, MapsFailuresToErrorKinds) {
    FakeApi api;
    OpenAIProvider provider(api.options(), std::make_shared<http::HttplibClient>());
    api.status = 503;
    api.reply = "{}";
    EXPECT_ERRC(provider.complete(request(Tag::plan, "x")), Errc::transport_failure);
    api.status = 429;
    EXPECT_ERRC(provider.complete(request(Tag::plan, "x")), Errc::transport_failure);
    api.status = 400;
    EXPECT_ERRC(provider.complete(request(Tag::plan, "x")), Errc::provider_refusal);
    api.status = 200;
    api.reply = R"({"choices":[{"message":{"content":null,"refusal":"cannot help"}}]})";
    EXPECT_ERRC(provider.complete(request(Tag::plan, "x")), Errc::provider_refusal);
    api.reply = chat_reply("");
    EXPECT_ERRC(provider.complete(request(Tag::plan, "x")), Errc::empty_response);
    api.reply = R"({"choices":[]})";
    EXPECT_ERRC(provider.complete(request(Tag::plan, "x")), Errc::empty_response);
}

TEST(OpenAIProvider, GatewayRetriesServerErrors) {
    FakeApi api;
    api.status = 500;
    api.reply = "{}";
    GatewayOptions options;
    int sleeps = 0;
    options.sleep = [&](std::chrono::milliseconds) { ++sleeps; };
    Gateway gw(std::make_shared<OpenAIProvider>(api.options(), std::make_shared<http::HttplibClient>()), options);
    EXPECT_ERRC(gw.complete(request(Tag::plan, "x")), Errc::transport_failure);
    EXPECT_EQ(sleeps, 3);
}
