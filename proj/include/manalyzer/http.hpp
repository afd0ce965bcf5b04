#pragma once

#include "manalyzer/error.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>

namespace manalyzer::http {

struct Response {
    int status = 0;
    std::string body;
    std::string content_type;
};

using Headers = std::multimap<std::string, std::string>;

class Client {
public:
    virtual ~Client() = default;
    // Throws Error(transport_failure) when no response was obtained.
    virtual Response get(const std::string& url, const Headers& headers = {}) = 0;
    virtual Response post(const std::string& url, const std::string& body, const std::string& content_type,
                          const Headers& headers = {}) = 0;
};

inline std::string url_encode(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string target;  // path + query, at least "/"
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(Errc::precondition, "not an absolute URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// cpp-httplib backed client. Follows redirects (DOI resolution relies on it).
class HttplibClient : public Client {
public:
    explicit HttplibClient(std::chrono::seconds timeout = std::chrono::seconds(30),
                           std::string user_agent = "manalyzer/1.0")
        : timeout_(timeout), user_agent_(std::move(user_agent)) {}

    Response get(const std::string& url, const Headers& headers) override {
        auto [origin, target] = split_url(url);
        auto client = make_client(origin);
        auto result = client.Get(target, with_agent(headers));
        return convert(result, url);
    }

    Response post(const std::string& url, const std::string& body, const std::string& content_type,
                  const Headers& headers) override {
        auto [origin, target] = split_url(url);
        auto client = make_client(origin);
        auto result = client.Post(target, with_agent(headers), body, content_type);
        return convert(result, url);
    }

private:
    httplib::Client make_client(const std::string& origin) const {
        httplib::Client client(origin);
        client.set_follow_location(true);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        return client;
    }

    httplib::Headers with_agent(const Headers& headers) const {
        httplib::Headers out(headers.begin(), headers.end());
        if (!out.count("User-Agent")) out.emplace("User-Agent", user_agent_);
        return out;
    }

    static Response convert(const httplib::Result& result, const std::string& url) {
        if (!result)
            fail(Errc::transport_failure, url + ": " + httplib::to_string(result.error()));
        return {result->status, result->body, result->get_header_value("Content-Type")};
    }

    std::chrono::seconds timeout_;
    std::string user_agent_;
};

}  // namespace manalyzer::http
