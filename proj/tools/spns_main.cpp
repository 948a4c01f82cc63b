// Command-line front end: key material, directory snapshots, live nodes over
// TCP, in-process scenarios, the benchmark and the log audit.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "spns/benchmark.hpp"
#include "spns/config.hpp"
#include "spns/scenario.hpp"
#include "spns/socket_transport.hpp"
#include "spns/vectors.hpp"

namespace fs = std::filesystem;
using namespace spns;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_stop{false};

void on_signal(int)
{
    g_stop = true;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, std::string_view content)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
    out << content;
}

std::string trim_ws(std::string s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

IdentityKeyPair load_identity(const fs::path& dir, const std::string& name)
{
    return IdentityKeyPair::from_seed(from_hex(trim_ws(read_file(dir / (name + ".identity")))));
}

NodeKeySet load_keyset(const fs::path& dir, const std::string& name)
{
    return NodeKeySet{load_identity(dir, name), OnionKeyPair::from_pem(read_file(dir / (name + ".onion.pem"))), 0};
}

DirectorySnapshot load_snapshot(const fs::path& p)
{
    return DirectorySnapshot::deserialize(from_hex(trim_ws(read_file(p))));
}

IdentityPublicKey load_directory_key(const std::string& hex_or_path)
{
    std::string hex = hex_or_path;
    if (fs::exists(hex_or_path)) hex = trim_ws(read_file(hex_or_path));
    auto b = from_hex(hex);
    if (b.size() != 32) throw Error(ErrorCode::InvalidArgument, "directory key must be 32 bytes");
    IdentityPublicKey k;
    std::copy(b.begin(), b.end(), k.bytes.begin());
    return k;
}

std::uint32_t parse_u32(const std::string& s)
{
    return static_cast<std::uint32_t>(std::stoul(s, nullptr, 0));
}

void run_host_until_stopped(SocketNodeHost& host, std::optional<double> duration)
{
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    host.start();
    const auto start = std::chrono::steady_clock::now();
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        if (duration && std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > *duration) break;
    }
    host.stop();
}

void dump_logs(Scenario& s, ByteView data, const fs::path& dir)
{
    fs::create_directories(dir);
    for (auto* log : s.logs()) write_file(dir / (log->node() + ".jsonl"), log->to_jsonl());
    write_file(dir / "manifest.json", s.manifest(data).to_json());
}

// Common settings for ue-build / ue-send.
struct UeOptions {
    std::size_t hops = 2;
    std::uint64_t seed = 1;
    std::string addrbook;
    std::string snapshot;
    std::string directory_key;
    std::string config;
    std::string log_dir;
    std::uint64_t bandwidth = 10'000'000;
    std::uint64_t delay_us = 100;
    bool leak = false;
    double timeout_s = 10;
};

void apply_config(UeOptions& o)
{
    if (o.config.empty()) return;
    auto c = Config::load(o.config);
    o.hops = c.get_u64("hops", o.hops);
    o.seed = c.get_u64("seed", o.seed);
    if (auto v = c.get("addrbook"); v && o.addrbook.empty()) o.addrbook = *v;
    if (auto v = c.get("snapshot"); v && o.snapshot.empty()) o.snapshot = *v;
    if (auto v = c.get("directory_key"); v && o.directory_key.empty()) o.directory_key = *v;
    o.bandwidth = c.get_u64("bandwidth", o.bandwidth);
    o.delay_us = c.get_u64("delay_us", o.delay_us);
}

/// Builds a circuit (and optionally sends data) over live TCP nodes.
int ue_over_sockets(const UeOptions& o, const std::optional<Bytes>& data)
{
    if (o.snapshot.empty() || o.directory_key.empty())
        throw Error(ErrorCode::InvalidArgument, "--snapshot and --directory-key are required with --addrbook");
    auto snapshot = load_snapshot(o.snapshot);
    Rng rng(o.seed);
    UeIdentity id{};
    rng.fill(id);
    NsiId nsi;
    do {
        rng.fill(nsi.bytes);
    } while (!nsi.assigned());
    UeConfig uc;
    uc.ue_identity = id;
    uc.nsi = nsi;
    uc.nssai = snapshot.descriptors.empty() ? Nssai{} : snapshot.descriptors.front().supported_nssai.front();
    uc.hops = o.hops;
    uc.path_seed = rng.u64();
    UeClient ue(address_for("ue"), uc, snapshot, load_directory_key(o.directory_key), rng.derive("ue"));
    SocketNodeHost host(ue, AddressBook::load(o.addrbook));
    host.start();
    host.post([&] { return ue.start(); }).wait();

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(o.timeout_s);
    auto status = CircuitStatus::building;
    while (std::chrono::steady_clock::now() < deadline) {
        status = host.query<CircuitStatus>([&] { return ue.status(); });
        if (status != CircuitStatus::building && status != CircuitStatus::extending) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (status != CircuitStatus::established) {
        host.stop();
        std::cerr << "circuit not established: " << to_string(status) << '\n';
        return kExitFailure;
    }
    std::cout << "circuit established via";
    for (const auto& d : ue.path()) std::cout << ' ' << d.node_name;
    std::cout << "\nslice " << to_urn(ue.circuit().slices()) << '\n';

    if (data) {
        host.post([&] { return ue.send(*data); }).wait();
        while (!host.flushed() && std::chrono::steady_clock::now() < deadline)
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        std::cout << "sent " << data->size() << " bytes\n";
    }
    host.stop();
    return kExitOk;
}

int ue_in_process(const UeOptions& o, const std::optional<Bytes>& data, const std::string& egress)
{
    ScenarioConfig sc;
    sc.seed = o.seed;
    sc.hops = o.hops;
    sc.ran_count = std::max<std::size_t>(o.hops, 2);
    sc.link.bandwidth_bps = o.bandwidth;
    sc.link.propagation_delay_us = o.delay_us;
    sc.leak_identity_to_all_hops = o.leak;
    Scenario s(sc, NetworkKeys::shared(sc.ran_count));
    s.build_circuit();
    std::cout << "circuit established via";
    for (const auto& d : s.ue().path()) std::cout << ' ' << d.node_name;
    std::cout << "\nslice " << to_urn(s.ue().circuit().slices()) << "\nsetup_s " << s.net().now_ns() / 1e9 << '\n';
    if (data) {
        const auto t0 = s.net().now_ns();
        s.send(*data);
        std::cout << "transfer_s " << (s.net().now_ns() - t0) / 1e9 << '\n';
        if (!egress.empty()) {
            const auto& d = s.core().deliveries().back();
            write_file(egress, std::string(d.data.begin(), d.data.end()));
        }
    }
    if (!o.log_dir.empty()) dump_logs(s, data ? ByteView(*data) : ByteView{}, o.log_dir);
    return kExitOk;
}

void add_ue_options(CLI::App* cmd, UeOptions& o)
{
    cmd->add_option("--hops", o.hops, "Circuit length")->check(CLI::Range(1, 15));
    cmd->add_option("--seed", o.seed, "Seed for identities, path choice and key material");
    cmd->add_option("--addrbook", o.addrbook, "Use live TCP nodes listed in this address book");
    cmd->add_option("--snapshot", o.snapshot, "Directory snapshot (hex) for live mode");
    cmd->add_option("--directory-key", o.directory_key, "Pinned directory public key (hex or file)");
    cmd->add_option("--config", o.config, "key=value settings file");
    cmd->add_option("--log-dir", o.log_dir, "Write node audit logs and a secrets manifest here (in-process mode)");
    cmd->add_option("--bandwidth", o.bandwidth, "Simulated link bandwidth in bit/s");
    cmd->add_option("--delay-us", o.delay_us, "Simulated propagation delay per link");
    cmd->add_option("--timeout", o.timeout_s, "Seconds to wait for live nodes");
    cmd->add_flag("--leak-identity", o.leak, "Test hook: give every hop the real UE identity");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"spns: slice-private onion routing for 5G RANs"};
    app.require_subcommand(1);

    // keygen
    std::string kg_dir = ".", kg_name;
    auto* keygen = app.add_subcommand("keygen", "Generate identity and onion keys for a node");
    keygen->add_option("--dir", kg_dir, "Output directory");
    keygen->add_option("--name", kg_name, "Node name (ran-1, core, directory, ...)")->required();

    // directory
    std::string dir_dir = ".", dir_out, dir_core = "core";
    std::vector<std::string> dir_rans;
    std::uint32_t dir_epoch = 1;
    std::string dir_nssai = "0x01000001";
    auto* directory = app.add_subcommand("directory", "Sign a snapshot from node keys in a directory");
    directory->add_option("--dir", dir_dir, "Key directory");
    directory->add_option("--ran", dir_rans, "RAN node names")->required();
    directory->add_option("--core", dir_core, "Core node name");
    directory->add_option("--epoch", dir_epoch, "Core key epoch");
    directory->add_option("--nssai", dir_nssai, "Supported NSSAI");
    directory->add_option("--out", dir_out, "Snapshot output (hex); default <dir>/snapshot.hex");

    // ran / core
    std::string node_dir = ".", node_name, node_snapshot, node_addrbook, node_log, core_egress;
    std::uint16_t node_port = 0;
    std::optional<double> node_duration;
    auto* ran = app.add_subcommand("ran", "Run a RAN node over TCP");
    auto* core = app.add_subcommand("core", "Run the core endpoint over TCP");
    for (auto* cmd : {ran, core}) {
        cmd->add_option("--dir", node_dir, "Key directory");
        cmd->add_option("--name", node_name, "Node name")->required();
        cmd->add_option("--snapshot", node_snapshot, "Directory snapshot (hex)")->required();
        cmd->add_option("--listen", node_port, "TCP port")->required();
        cmd->add_option("--addrbook", node_addrbook, "Address book")->required();
        cmd->add_option("--log", node_log, "Audit log (JSON lines)");
        cmd->add_option("--duration", node_duration, "Exit after this many seconds");
    }
    core->add_option("--egress", core_egress, "Directory receiving delivered payloads")->required();

    // ue-build / ue-send
    UeOptions ue_opts;
    std::string send_file, send_egress;
    auto* ue_build = app.add_subcommand("ue-build", "Build a circuit (in-process unless --addrbook)");
    add_ue_options(ue_build, ue_opts);
    auto* ue_send = app.add_subcommand("ue-send", "Build a circuit and send a file");
    add_ue_options(ue_send, ue_opts);
    ue_send->add_option("--file", send_file, "Payload file")->required()->check(CLI::ExistingFile);
    ue_send->add_option("--egress", send_egress, "Write the core's received payload here (in-process mode)");

    // bench
    std::string bench_sizes = "1:14", bench_csv, bench_unit = "Mb", bench_hops = "2";
    BenchmarkConfig bench_cfg;
    auto* bench = app.add_subcommand("bench", "Connection time versus payload size on the simulated network");
    bench->add_option("--sizes", bench_sizes, "a:b[:step] or a,b,c");
    bench->add_option("--iters", bench_cfg.iterations, "Iterations per size")->check(CLI::PositiveNumber);
    bench->add_option("--unit", bench_unit, "Mb (megabit) or MB (megabyte)")->check(CLI::IsMember({"Mb", "MB"}));
    bench->add_option("--bandwidth", bench_cfg.bandwidth_bps, "Link bandwidth in bit/s")->check(CLI::PositiveNumber);
    bench->add_option("--delay-us", bench_cfg.propagation_delay_us, "Propagation delay per link");
    bench->add_option("--seed", bench_cfg.seed, "Seed");
    bench->add_option("--hops", bench_hops, "Hop count, or a comma list for a node-count sweep");
    bench->add_option("--csv", bench_csv, "CSV output (per-hop suffix when sweeping)");

    // audit
    std::vector<std::string> audit_logs;
    std::string audit_manifest;
    auto* audit = app.add_subcommand("audit", "Check node logs against the visibility rules");
    audit->add_option("--logs", audit_logs, "Log files or directories of *.jsonl")->required();
    audit->add_option("--manifest", audit_manifest, "Secrets manifest (JSON); default <first log dir>/manifest.json");

    // vectors
    std::string vec_out = "golden";
    auto* vectors = app.add_subcommand("vectors", "Write golden wire vectors as hex files");
    vectors->add_option("--out", vec_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*keygen) {
            fs::create_directories(kg_dir);
            Rng rng;
            auto id = IdentityKeyPair::generate(rng);
            write_file(fs::path(kg_dir) / (kg_name + ".identity"), to_hex(id.seed()) + "\n");
            write_file(fs::path(kg_dir) / (kg_name + ".pub"), to_hex(id.public_key().bytes) + "\n");
            if (kg_name != "directory") write_file(fs::path(kg_dir) / (kg_name + ".onion.pem"), OnionKeyPair::generate().to_pem());
            std::cout << kg_name << ' ' << address_for(kg_name).to_string() << '\n';
            return kExitOk;
        }
        if (*directory) {
            const fs::path d(dir_dir);
            auto dir_identity = load_identity(d, "directory");
            auto core_key = OnionKeyPair::from_pem(read_file(d / (dir_core + ".onion.pem")));
            Directory dirsvc(dir_identity, core_key.public_key(), address_for(dir_core), dir_epoch);
            for (std::size_t i = 0; i < dir_rans.size(); ++i) {
                auto keys = load_keyset(d, dir_rans[i]);
                auto desc = make_descriptor(i, keys, parse_u32(dir_nssai));
                desc.node_name = dir_rans[i];
                desc.address = address_for(dir_rans[i]);
                dirsvc.publish(descriptor_sign(desc, keys.identity));
            }
            const auto out = dir_out.empty() ? (d / "snapshot.hex").string() : dir_out;
            write_file(out, to_hex(dirsvc.fetch_snapshot().serialize()) + "\n");
            std::cout << "snapshot epoch " << dir_epoch << " with " << dir_rans.size() << " RANs -> " << out << '\n';
            return kExitOk;
        }
        if (*ran) {
            auto snapshot = load_snapshot(node_snapshot);
            const auto addr = address_for(node_name);
            const auto* desc = snapshot.find(addr);
            if (!desc) throw Error(ErrorCode::InvalidArgument, node_name + " is not in the snapshot");
            RanConfig rc;
            rc.keys = load_keyset(node_dir, node_name);
            rc.descriptor = *desc;
            rc.snapshot = snapshot;
            RanNode node(rc, Rng());
            if (!node_log.empty()) node.log().open_file(node_log);
            SocketNodeHost host(node, AddressBook::load(node_addrbook), node_port);
            log_message(LogLevel::info, node_name + " listening on " + std::to_string(host.port()));
            run_host_until_stopped(host, node_duration);
            return kExitOk;
        }
        if (*core) {
            auto snapshot = load_snapshot(node_snapshot);
            CoreConfig cc;
            cc.name = node_name;
            cc.address = address_for(node_name);
            cc.epoch_key = OnionKeyPair::from_pem(read_file(fs::path(node_dir) / (node_name + ".onion.pem")));
            cc.epoch = snapshot.epoch;
            cc.snapshot = snapshot;
            CoreNode node(cc, Rng());
            if (!node_log.empty()) node.log().open_file(node_log);
            fs::create_directories(core_egress);
            std::size_t count = 0;
            node.set_delivery_hook([&](const Delivery& d) {
                const auto name = to_hex(d.id_core) + "-" + std::to_string(++count);
                write_file(fs::path(core_egress) / (name + ".bin"), std::string(d.data.begin(), d.data.end()));
                log_message(LogLevel::info, "delivered " + std::to_string(d.size) + " bytes as " + name);
            });
            SocketNodeHost host(node, AddressBook::load(node_addrbook), node_port);
            run_host_until_stopped(host, node_duration);
            return kExitOk;
        }
        if (*ue_build || *ue_send) {
            apply_config(ue_opts);
            std::optional<Bytes> data;
            if (*ue_send) {
                auto content = read_file(send_file);
                data = Bytes(content.begin(), content.end());
            }
            if (!ue_opts.addrbook.empty()) return ue_over_sockets(ue_opts, data);
            return ue_in_process(ue_opts, data, send_egress);
        }
        if (*bench) {
            bench_cfg.sizes = parse_sizes(bench_sizes);
            bench_cfg.unit = bench_unit == "MB" ? SizeUnit::megabyte : SizeUnit::megabit;
            std::vector<std::size_t> hop_counts;
            for (const auto h : parse_sizes(bench_hops)) hop_counts.push_back(static_cast<std::size_t>(h));
            for (const auto hops : hop_counts) {
                bench_cfg.hops = hops;
                auto report = run_benchmark(bench_cfg);
                const auto csv = to_csv(report);
                if (bench_csv.empty()) {
                    std::cout << csv;
                } else {
                    fs::path p(bench_csv);
                    if (hop_counts.size() > 1)
                        p.replace_filename(p.stem().string() + "_h" + std::to_string(hops) + p.extension().string());
                    write_file(p, csv);
                    std::cout << "wrote " << p.string() << '\n';
                }
                double wall = 0;
                for (const auto& r : report.rows) wall += r.wall_s;
                std::cerr << "hops=" << hops << " r2=" << report.fit.r2 << " mean host time per iteration "
                          << wall / static_cast<double>(report.rows.size()) << " s\n";
            }
            return kExitOk;
        }
        if (*audit) {
            std::string manifest_path = audit_manifest;
            if (manifest_path.empty()) {
                if (!fs::is_directory(audit_logs.front())) throw Error(ErrorCode::InvalidArgument, "--manifest is required");
                manifest_path = (fs::path(audit_logs.front()) / "manifest.json").string();
            }
            auto manifest = SecretsManifest::from_json(read_file(manifest_path));
            auto verdict = run_audit(audit_logs, manifest);
            std::cout << verdict.summary() << '\n';
            return verdict.pass ? kExitOk : kExitFailure;
        }
        if (*vectors) {
            write_golden_vectors(vec_out);
            std::cout << "wrote " << golden_vectors().size() << " vectors to " << vec_out << '\n';
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
        return e.code() == ErrorCode::InvalidArgument ? kExitUsage : kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
