#pragma once

#include <map>
#include <string>
#include <vector>

#include "spns/audit_log.hpp"

namespace spns {

/// Sensitive byte strings plus the role each logging node played.
/// Roles: "secondary" (UE-facing entry), "middle", "master", "core".
struct SecretsManifest {
    std::map<std::string, std::string> roles;
    Bytes ue_identity;
    Bytes address_core;
    Bytes id_core;
    std::vector<Bytes> data_samples;

    std::string to_json() const;
    /// Throws MalformedLog.
    static SecretsManifest from_json(std::string_view text);
};

/// Windows of the payload the audit searches for: up to `count` 32-byte
/// slices spread over the data, or the whole payload when shorter.
std::vector<Bytes> data_samples(ByteView data, std::size_t count = 8);

struct AuditFinding {
    std::string rule;
    std::string node;
    std::string kind;
    std::uint32_t link = 0;
    std::string secret;
};

struct AuditVerdict {
    bool pass = true;
    std::vector<AuditFinding> findings;
    std::vector<std::string> warnings;

    std::string summary() const;
};

/// Concatenates each (node, link, direction, kind) stream and searches it
/// for the secrets its node's role forbids.
AuditVerdict run_audit(const std::vector<AuditEvent>& events, const SecretsManifest& manifest);
/// Reads every *.jsonl file under the given paths. Throws MalformedLog.
AuditVerdict run_audit(const std::vector<std::string>& log_paths, const SecretsManifest& manifest);

} // namespace spns
