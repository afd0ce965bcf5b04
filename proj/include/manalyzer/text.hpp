#pragma once

#include "manalyzer/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace manalyzer::text {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && lower(s.substr(0, prefix.size())) == lower(prefix);
}

// Collapses every whitespace run into a single space and trims the ends.
inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= s.size()) {
        size_t end = s.find('\n', start);
        if (end == std::string_view::npos) end = s.size();
        std::string_view line = s.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        if (end == s.size()) break;
        start = end + 1;
    }
    return lines;
}

inline std::vector<std::string> split(std::string_view s, char delimiter) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t end = s.find(delimiter, start);
        if (end == std::string_view::npos) {
            parts.emplace_back(s.substr(start));
            break;
        }
        parts.emplace_back(s.substr(start, end - start));
        start = end + 1;
    }
    return parts;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Bodies of ``` fenced blocks, in order. The info string after the opening
// fence (e.g. "markdown") is dropped.
inline std::vector<std::string> fenced_blocks(std::string_view s) {
    std::vector<std::string> blocks;
    auto lines = split_lines(s);
    bool inside = false;
    std::string current;
    for (const auto& line : lines) {
        auto t = trim(line);
        if (t.substr(0, 3) == "```") {
            if (inside) {
                blocks.push_back(current);
                current.clear();
            }
            inside = !inside;
            continue;
        }
        if (inside) {
            current += line;
            current += '\n';
        }
    }
    return blocks;
}

// Strict full-token parse of a real number.
inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

inline std::optional<long long> parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    long long value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

// Parses the first bracketed list of numbers in a reply, e.g. "[0.8, 0.9, 0.6]".
// Fenced code blocks are searched first. Returns nullopt when no well-formed
// numeric list is present.
inline std::optional<std::vector<double>> parse_number_list(std::string_view reply) {
    auto try_parse = [](std::string_view s) -> std::optional<std::vector<double>> {
        size_t open = s.find('[');
        if (open == std::string_view::npos) return std::nullopt;
        size_t close = s.find(']', open);
        if (close == std::string_view::npos) return std::nullopt;
        std::string_view inner = trim(s.substr(open + 1, close - open - 1));
        std::vector<double> values;
        if (inner.empty()) return values;
        for (const auto& token : split(inner, ',')) {
            auto v = parse_double(token);
            if (!v) return std::nullopt;
            values.push_back(*v);
        }
        return values;
    };
    for (const auto& block : fenced_blocks(reply))
        if (auto v = try_parse(block)) return v;
    return try_parse(reply);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Writes through a temporary sibling and renames, so readers never observe a
// half-written file.
inline void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Errc::io_error, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) fail(Errc::io_error, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace manalyzer::text
