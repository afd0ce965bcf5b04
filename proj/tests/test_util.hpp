#pragma once

#include "manalyzer/error.hpp"
#include "manalyzer/text.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

namespace manalyzer::testing {

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("manalyzer-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

private:
    std::filesystem::path path_;
};

inline void write(const std::filesystem::path& path, const std::string& content) {
    text::write_file(path, content);
}

}  // namespace manalyzer::testing

#define EXPECT_ERRC(statement, errc)                                                      \
    do {                                                                                  \
        try {                                                                             \
            statement;                                                                    \
            ADD_FAILURE() << "expected " << ::manalyzer::to_string(errc) << ", no throw"; \
        } catch (const ::manalyzer::Error& e_) {                                          \
            EXPECT_EQ(e_.code(), errc) << e_.what();                                      \
        }                                                                                 \
    } while (0)
