#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "spns/bytes.hpp"

namespace spns {

/// One observation a node made: bytes it saw in the clear, or bytes it
/// forwarded. Audits search these for fields the node must never learn.
struct AuditEvent {
    std::string node;
    std::string direction; // "in" or "out"
    std::uint32_t link = 0;
    Bytes bytes;
    std::string kind;

    friend bool operator==(const AuditEvent&, const AuditEvent&) = default;
};

std::string to_json_line(const AuditEvent& e);
/// Throws MalformedLog.
AuditEvent parse_json_line(std::string_view line);
/// Throws MalformedLog with the offending line number.
std::vector<AuditEvent> parse_jsonl(std::string_view text);

class AuditLog {
public:
    explicit AuditLog(std::string node, bool enabled = true) : node_(std::move(node)), enabled_(enabled) {}

    void record(std::string_view direction, std::uint32_t link, ByteView bytes, std::string_view kind);

    /// Mirrors every subsequent event to a JSON-lines file.
    void open_file(const std::string& path);

    bool enabled() const { return enabled_; }
    void set_enabled(bool on) { enabled_ = on; }
    const std::string& node() const { return node_; }
    const std::vector<AuditEvent>& events() const { return events_; }
    std::string to_jsonl() const;
    void clear() { events_.clear(); }

private:
    std::string node_;
    bool enabled_;
    std::vector<AuditEvent> events_;
    std::unique_ptr<std::ofstream> file_;
};

} // namespace spns
