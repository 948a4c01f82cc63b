#include "spns/audit.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace spns {

namespace fs = std::filesystem;

std::string SecretsManifest::to_json() const
{
    nlohmann::json j;
    j["roles"] = roles;
    j["ue_identity"] = to_hex(ue_identity);
    j["address_core"] = to_hex(address_core);
    j["id_core"] = to_hex(id_core);
    auto samples = nlohmann::json::array();
    for (const auto& s : data_samples) samples.push_back(to_hex(s));
    j["data_samples"] = samples;
    return j.dump(2);
}

SecretsManifest SecretsManifest::from_json(std::string_view text)
{
    try {
        auto j = nlohmann::json::parse(text);
        SecretsManifest m;
        m.roles = j.at("roles").get<std::map<std::string, std::string>>();
        m.ue_identity = from_hex(j.at("ue_identity").get<std::string>());
        m.address_core = from_hex(j.at("address_core").get<std::string>());
        m.id_core = from_hex(j.at("id_core").get<std::string>());
        for (const auto& s : j.at("data_samples")) m.data_samples.push_back(from_hex(s.get<std::string>()));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedLog, std::string("manifest: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedLog, std::string("manifest: ") + e.what());
    }
}

std::vector<Bytes> data_samples(ByteView data, std::size_t count)
{
    constexpr std::size_t width = 32;
    std::vector<Bytes> out;
    if (data.empty()) return out;
    if (data.size() <= width) {
        out.emplace_back(data.begin(), data.end());
        return out;
    }
    const std::size_t span = data.size() - width;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t off = count == 1 ? 0 : span * i / (count - 1);
        auto s = data.subspan(off, width);
        out.emplace_back(s.begin(), s.end());
    }
    return out;
}

std::string AuditVerdict::summary() const
{
    std::ostringstream os;
    os << (pass ? "PASS" : "FAIL");
    for (const auto& f : findings)
        os << "\n  rule " << f.rule << ": node " << f.node << " saw " << f.secret << " (kind " << f.kind << ", link " << f.link << ")";
    for (const auto& w : warnings) os << "\n  warning: " << w;
    return os.str();
}

namespace {

struct Forbidden {
    std::string rule;
    std::string name;
    ByteView bytes;
};

std::vector<Forbidden> forbidden_for(const std::string& role, const SecretsManifest& m)
{
    std::vector<Forbidden> out;
    const bool hides_core = role == "secondary" || role == "middle";
    const bool hides_ue = role == "master" || role == "middle" || role == "core";
    if (hides_core) {
        const std::string rule = role + " must not see core fields or data";
        out.push_back({rule, "ADDRESS_CORE", m.address_core});
        out.push_back({rule, "ID_CORE", m.id_core});
        for (std::size_t i = 0; i < m.data_samples.size(); ++i)
            out.push_back({rule, "data sample " + std::to_string(i), m.data_samples[i]});
    }
    if (hides_ue) out.push_back({role + " must not see the UE identity", "UE identity", m.ue_identity});
    return out;
}

} // namespace

AuditVerdict run_audit(const std::vector<AuditEvent>& events, const SecretsManifest& manifest)
{
    AuditVerdict v;
    if (events.empty()) v.warnings.push_back("no log events; audit passes vacuously");

    using Key = std::tuple<std::string, std::uint32_t, std::string, std::string>;
    std::map<Key, Bytes> streams;
    for (const auto& e : events) append(streams[Key{e.node, e.link, e.direction, e.kind}], e.bytes);

    std::map<std::string, bool> seen_role;
    for (const auto& [key, bytes] : streams) {
        const auto& node = std::get<0>(key);
        auto role = manifest.roles.find(node);
        if (role == manifest.roles.end()) continue;
        seen_role[node] = true;
        for (const auto& f : forbidden_for(role->second, manifest)) {
            if (f.bytes.empty() || !contains(bytes, f.bytes)) continue;
            v.pass = false;
            v.findings.push_back(AuditFinding{f.rule, node, std::get<3>(key), std::get<1>(key), f.name});
        }
    }
    for (const auto& [node, role] : manifest.roles)
        if (!seen_role.contains(node) && !events.empty()) v.warnings.push_back("no events from " + node + " (" + role + ")");
    return v;
}

AuditVerdict run_audit(const std::vector<std::string>& log_paths, const SecretsManifest& manifest)
{
    std::vector<AuditEvent> events;
    auto read_file = [&](const fs::path& p) {
        std::ifstream in(p);
        if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            auto more = parse_jsonl(ss.str());
            events.insert(events.end(), more.begin(), more.end());
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedLog, p.string() + ": " + e.what());
        }
    };
    for (const auto& path : log_paths) {
        if (fs::is_directory(path)) {
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(path))
                if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) read_file(f);
        } else {
            read_file(path);
        }
    }
    return run_audit(events, manifest);
}

} // namespace spns
