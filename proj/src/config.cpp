#include "spns/config.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spns/error.hpp"

namespace spns {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

Config Config::parse(std::string_view text)
{
    Config c;
    std::size_t lineno = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        auto t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorCode::Malformed, "config line " + std::to_string(lineno) + ": expected key=value");
        c.values_[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }
    return c;
}

Config Config::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<std::string> Config::get(const std::string& key) const
{
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string Config::require(const std::string& key) const
{
    auto v = get(key);
    if (!v) throw Error(ErrorCode::InvalidArgument, "config is missing '" + key + "'");
    return *v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const
{
    auto v = get(key);
    if (!v) return fallback;
    try {
        std::size_t pos = 0;
        auto n = std::stoull(*v, &pos, 0);
        if (pos != v->size()) throw std::invalid_argument(key);
        return n;
    } catch (const std::exception&) {
        throw Error(ErrorCode::Malformed, "config value for '" + key + "' is not a number");
    }
}

std::string Config::to_string() const
{
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

LogLevel log_level()
{
    const char* env = std::getenv("SPNS_LOG");
    if (!env) return LogLevel::warn;
    const std::string v(env);
    if (v == "error") return LogLevel::error;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
}

void log_message(LogLevel level, const std::string& message)
{
    if (level > log_level()) return;
    static constexpr const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "spns " << names[static_cast<int>(level)] << ": " << message << '\n';
}

} // namespace spns
