#include "spns/audit_log.hpp"

#include <json.hpp>

namespace spns {

std::string to_json_line(const AuditEvent& e)
{
    nlohmann::json j{{"node", e.node}, {"direction", e.direction}, {"link", e.link}, {"bytes_hex", to_hex(e.bytes)}, {"kind", e.kind}};
    return j.dump();
}

AuditEvent parse_json_line(std::string_view line)
{
    try {
        auto j = nlohmann::json::parse(line);
        AuditEvent e;
        e.node = j.at("node").get<std::string>();
        e.direction = j.at("direction").get<std::string>();
        e.link = j.at("link").get<std::uint32_t>();
        e.bytes = from_hex(j.at("bytes_hex").get<std::string>());
        e.kind = j.at("kind").get<std::string>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::MalformedLog, ex.what());
    } catch (const Error& ex) {
        throw Error(ErrorCode::MalformedLog, ex.what());
    }
}

std::vector<AuditEvent> parse_jsonl(std::string_view text)
{
    std::vector<AuditEvent> out;
    std::size_t lineno = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            out.push_back(parse_json_line(line));
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedLog, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void AuditLog::record(std::string_view direction, std::uint32_t link, ByteView bytes, std::string_view kind)
{
    if (!enabled_) return;
    events_.push_back(AuditEvent{node_, std::string(direction), link, Bytes(bytes.begin(), bytes.end()), std::string(kind)});
    if (file_) *file_ << to_json_line(events_.back()) << '\n';
}

void AuditLog::open_file(const std::string& path)
{
    file_ = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*file_) throw Error(ErrorCode::Io, "cannot open audit log " + path);
}

std::string AuditLog::to_jsonl() const
{
    std::string out;
    for (const auto& e : events_) {
        out += to_json_line(e);
        out += '\n';
    }
    return out;
}

} // namespace spns
