#pragma once

// Cell normalization and tolerant numeric comparison.

#include "manalyzer/error.hpp"
#include "manalyzer/text.hpp"

#include <fmt/format.h>

#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace manalyzer::numeric {

using Cell = std::optional<double>;  // nullopt is the missing marker

namespace detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) s.replace(pos, from.size(), to);
}

inline bool is_missing_token(std::string_view t) {
    auto l = text::lower(t);
    return l.empty() || l == "nan" || l == "n/a" || l == "na" || l == "-" || l == "–" || l == "—" ||
           l == "none" || l == "null";
}

// Drops thousands separators ("1,234,567"); any other comma is left in place
// so the final parse rejects it.
inline std::string drop_thousands_commas(const std::string& s) {
    static const std::regex grouped(R"(^-?\d{1,3}(,\d{3})+(\.\d+)?$)");
    if (!std::regex_match(s, grouped)) return s;
    std::string out;
    for (char c : s)
        if (c != ',') out.push_back(c);
    return out;
}

}  // namespace detail

inline Cell normalize_numeric(std::string_view cell) {
    std::string s(text::trim(cell));
    if (detail::is_missing_token(s)) return std::nullopt;

    detail::replace_all(s, "−", "-");   // unicode minus
    detail::replace_all(s, " ", " ");   // no-break space
    for (auto sym : {"≤", "≥", "≈", "∼", "˜"}) detail::replace_all(s, sym, "");

    // "12.3 ± 0.4", "12.3 (±0.4)", "12.3+/-0.4": keep the leading estimate.
    for (auto marker : {"±", "+/-", "+-"}) {
        auto pos = s.find(marker);
        if (pos != std::string::npos && pos > 0) s.erase(pos);
    }
    // "12.3 (0.4)": a parenthetical after the value is a dispersion or note.
    auto paren = s.find('(');
    if (paren != std::string::npos && !text::trim(std::string_view(s).substr(0, paren)).empty() &&
        text::trim(std::string_view(s).substr(0, paren)) != "-")
        s.erase(paren);

    std::string stripped;
    for (char c : s) {
        if (c == '>' || c == '<' || c == '~' || c == '=' || c == '+' || c == '(' || c == ')' || c == '%' ||
            text::is_space(c))
            continue;
        stripped.push_back(c);
    }
    if (detail::is_missing_token(stripped) && !stripped.empty()) return std::nullopt;
    stripped = detail::drop_thousands_commas(stripped);
    auto value = text::parse_double(stripped);
    if (!value || std::isinf(*value))
        fail(Errc::unparseable_numeric, "cannot read a number from '" + std::string(cell) + "'");
    if (std::isnan(*value)) return std::nullopt;
    return *value == 0.0 ? 0.0 : *value;  // fold -0
}

inline std::optional<Cell> try_normalize(std::string_view cell) {
    try {
        return normalize_numeric(cell);
    } catch (const Error&) {
        return std::nullopt;
    }
}

// Shortest text that reads back to the same double.
inline std::string render(const Cell& cell) {
    if (!cell) return "NaN";
    return fmt::format("{}", *cell);
}

inline bool within_tolerance(double a, double b, double abs_tol = 1e-9, double rel_tol = 1e-4) {
    return std::fabs(a - b) <= std::max(abs_tol, rel_tol * std::fabs(b));
}

// Every number-looking token in free text, e.g. "85.2", "-3", "1,234", "2.5e3".
inline std::vector<double> number_tokens(std::string_view content) {
    static const std::regex token(R"((?:−|-)?\d[\d,]*(?:\.\d+)?(?:[eE][-+]?\d+)?)");
    std::vector<double> out;
    std::string s(content);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), token); it != std::sregex_iterator(); ++it) {
        std::string t = it->str();
        while (!t.empty() && t.back() == ',') t.pop_back();
        if (auto v = try_normalize(t); v && *v) out.push_back(**v);
        // "3,4" in prose is a list; try the pieces too
        if (t.find(',') != std::string::npos)
            for (const auto& piece : text::split(t, ','))
                if (auto p = text::parse_double(piece)) out.push_back(*p);
    }
    return out;
}

}  // namespace manalyzer::numeric
