#pragma once

// Pipe-table parsing and rendering plus the delimited blocks agents wrap
// around them ("[The Start of Title] ... [The End of Title]").

#include "manalyzer/text.hpp"

#include <string>
#include <vector>

namespace manalyzer::markdown {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    bool operator==(const Table&) const = default;
};

inline std::vector<std::string> split_row(std::string_view line) {
    auto t = text::trim(line);
    if (!t.empty() && t.front() == '|') t.remove_prefix(1);
    if (!t.empty() && t.back() == '|' && !(t.size() >= 2 && t[t.size() - 2] == '\\')) t.remove_suffix(1);
    std::vector<std::string> cells;
    std::string current;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] == '\\' && i + 1 < t.size() && t[i + 1] == '|') {
            current.push_back('|');
            ++i;
        } else if (t[i] == '|') {
            cells.emplace_back(text::trim(current));
            current.clear();
        } else {
            current.push_back(t[i]);
        }
    }
    cells.emplace_back(text::trim(current));
    return cells;
}

inline bool is_separator_row(std::string_view line) {
    auto t = text::trim(line);
    if (t.find('-') == std::string_view::npos || t.find('|') == std::string_view::npos) return false;
    for (const auto& cell : split_row(t)) {
        if (cell.empty()) return false;
        for (char c : cell)
            if (c != '-' && c != ':' && c != ' ') return false;
        if (cell.find("---") == std::string::npos && cell.find("--") == std::string::npos) return false;
    }
    return true;
}

inline bool is_table_line(std::string_view line) {
    auto t = text::trim(line);
    return !t.empty() && t.front() == '|';
}

// Every pipe table in reading order. A table is a header line, a separator
// line and the body lines that start with '|'. Blank lines inside a table are
// tolerated; a header/separator pair after them starts a new table.
inline std::vector<Table> parse_tables(std::string_view content) {
    std::vector<Table> tables;
    auto lines = text::split_lines(content);
    auto next_nonblank = [&](size_t from) {
        while (from < lines.size() && text::trim(lines[from]).empty()) ++from;
        return from;
    };
    auto starts_table = [&](size_t i) {
        if (i >= lines.size() || !is_table_line(lines[i])) return false;
        size_t sep = next_nonblank(i + 1);
        return sep < lines.size() && is_separator_row(lines[sep]);
    };
    for (size_t i = 0; i < lines.size(); ++i) {
        if (!starts_table(i)) continue;
        Table table;
        table.header = split_row(lines[i]);
        size_t j = next_nonblank(i + 1) + 1;
        size_t last = j - 1;
        for (size_t k = next_nonblank(j); k < lines.size() && is_table_line(lines[k]) && !starts_table(k);
             k = next_nonblank(k + 1)) {
            table.rows.push_back(split_row(lines[k]));
            last = k;
        }
        tables.push_back(std::move(table));
        i = last;
    }
    return tables;
}

inline std::string escape_cell(const std::string& cell) {
    std::string out;
    for (char c : cell) {
        if (c == '|') out += "\\|";
        else if (c == '\n') out += ' ';
        else out.push_back(c);
    }
    return out;
}

inline std::string render(const Table& table) {
    auto line = [](const std::vector<std::string>& cells) {
        std::string out = "|";
        for (const auto& c : cells) out += " " + escape_cell(c) + " |";
        return out + "\n";
    };
    std::string out = line(table.header);
    out += "|";
    for (size_t i = 0; i < table.header.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& row : table.rows) out += line(row);
    return out;
}

// Contents of every "[The Start of <name>] ... [The End of <name>]" block.
inline std::vector<std::string> delimited_blocks(std::string_view content, std::string_view name) {
    std::vector<std::string> out;
    const std::string open = "[The Start of " + std::string(name) + "]";
    const std::string close = "[The End of " + std::string(name) + "]";
    size_t pos = 0;
    while ((pos = content.find(open, pos)) != std::string_view::npos) {
        size_t start = pos + open.size();
        size_t end = content.find(close, start);
        if (end == std::string_view::npos) {
            out.emplace_back(text::trim(content.substr(start)));
            break;
        }
        out.emplace_back(text::trim(content.substr(start, end - start)));
        pos = end + close.size();
    }
    return out;
}

}  // namespace manalyzer::markdown
