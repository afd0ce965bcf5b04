#pragma once

#include <optional>
#include <string>
#include <vector>

namespace manalyzer::testing {

struct MessyCell {
    std::string raw;
    std::optional<double> expected;  // nullopt: missing marker
};

// Expected values worked out by hand.
inline const std::vector<MessyCell>& messy_cells() {
    static const std::vector<MessyCell> cells = {
        {">5.0", 5.0},
        {"NaN", std::nullopt},
        {"12.3 (±0.4)", 12.3},
        {"1,234", 1234.0},
        {"−0.5", -0.5},
        {"<0.01", 0.01},
        {"~42", 42.0},
        {"= 7", 7.0},
        {"+3.2", 3.2},
        {"(15.6)", 15.6},
        {"45%", 45.0},
        {"nan", std::nullopt},
        {"  85.2  ", 85.2},
        {"1,234,567.89", 1234567.89},
        {"-12", -12.0},
        {"≥ 30", 30.0},
        {"12.3 ± 0.4", 12.3},
        {"3.5e2", 350.0},
        {"N/A", std::nullopt},
        {"", std::nullopt},
        {"0.0", 0.0},
        {"-0", 0.0},
        {"≈1.5", 1.5},
        {"> 100", 100.0},
        {"(−3.1)", -3.1},
        {"78.4 (12.1)", 78.4},
        {"12.5+/-1.2", 12.5},
        {"~ 0.35 %", 0.35},
        {"−1,500", -1500.0},
        {"—", std::nullopt},
    };
    return cells;
}

}  // namespace manalyzer::testing
