#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace spns {

/// Line-based key=value settings. Blank lines and '#' comments are skipped.
class Config {
public:
    /// Throws Malformed with the line number.
    static Config parse(std::string_view text);
    /// Throws Io or Malformed.
    static Config load(const std::string& path);

    std::optional<std::string> get(const std::string& key) const;
    std::string require(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    const std::map<std::string, std::string>& values() const { return values_; }
    std::string to_string() const;

private:
    std::map<std::string, std::string> values_;
};

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

/// From SPNS_LOG (error|warn|info|debug); warn when unset.
LogLevel log_level();
void log_message(LogLevel level, const std::string& message);

} // namespace spns
