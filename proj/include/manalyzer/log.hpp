#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>

namespace manalyzer::log {

enum class Level { info, warn };

using Sink = std::function<void(Level, const std::string&)>;

namespace detail {
inline std::mutex& mutex() {
    static std::mutex m;
    return m;
}
inline Sink& sink() {
    static Sink s = [](Level level, const std::string& message) {
        std::cerr << (level == Level::warn ? "[warn] " : "[info] ") << message << '\n';
    };
    return s;
}
}  // namespace detail

// Replaces the process-wide sink; returns the previous one.
inline Sink set_sink(Sink sink) {
    std::lock_guard lock(detail::mutex());
    return std::exchange(detail::sink(), std::move(sink));
}

inline void emit(Level level, const std::string& message) {
    std::lock_guard lock(detail::mutex());
    if (detail::sink()) detail::sink()(level, message);
}

inline void info(const std::string& message) { emit(Level::info, message); }
inline void warn(const std::string& message) { emit(Level::warn, message); }

}  // namespace manalyzer::log
