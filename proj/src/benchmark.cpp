#include "spns/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace spns {

void BenchmarkConfig::validate() const
{
    if (sizes.empty()) throw Error(ErrorCode::InvalidArgument, "no sizes given");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(sizes[i] > 0)) throw Error(ErrorCode::InvalidArgument, "sizes must be positive");
        if (i && !(sizes[i] > sizes[i - 1])) throw Error(ErrorCode::InvalidArgument, "sizes must be ascending");
    }
    if (iterations == 0) throw Error(ErrorCode::InvalidArgument, "iterations must be at least 1");
    if (bandwidth_bps == 0) throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
    if (hops == 0 || hops > kMaxNsiHops) throw Error(ErrorCode::InvalidArgument, "hop count out of range");
}

std::uint64_t BenchmarkConfig::size_bits(double size) const
{
    const double scale = unit == SizeUnit::megabit ? 1e6 : 8e6;
    // Whole bytes, so the payload matches the nominal size exactly.
    return static_cast<std::uint64_t>(std::llround(size * scale / 8.0)) * 8;
}

LinearFit least_squares(std::span<const double> xs, std::span<const double> ys)
{
    if (xs.size() != ys.size() || xs.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two points");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0) throw Error(ErrorCode::InvalidArgument, "x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (f.slope * xs[i] + f.intercept);
        ss_res += e * e;
    }
    f.r2 = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
    return f;
}

double BenchmarkReport::ideal_transfer_s(std::uint64_t size_bits) const
{
    return static_cast<double>(size_bits) * (static_cast<double>(kCellSize) / kRelayBodyMax) /
           static_cast<double>(bandwidth_bps);
}

BenchmarkReport run_benchmark(const BenchmarkConfig& config)
{
    config.validate();
    const auto& keys = NetworkKeys::shared(config.hops);

    BenchmarkReport report;
    report.hops = config.hops;
    report.bandwidth_bps = config.bandwidth_bps;

    ScenarioConfig sc;
    sc.ran_count = config.hops;
    sc.hops = config.hops;
    sc.link.bandwidth_bps = config.bandwidth_bps;
    sc.link.propagation_delay_us = config.propagation_delay_us;
    sc.audit = false;
    sc.trace = false;
    sc.retain_data = false;

    for (const double size : config.sizes) {
        const auto bits = config.size_bits(size);
        Rng data_rng(config.seed ^ bits);
        const auto data = data_rng.bytes(bits / 8);

        std::vector<double> totals, setups, transfers;
        double wall = 0;
        for (std::size_t it = 0; it < config.iterations; ++it) {
            const auto w0 = std::chrono::steady_clock::now();
            sc.seed = config.seed;
            Scenario s(sc, keys);
            s.build_circuit();
            const double setup = static_cast<double>(s.net().now_ns()) / 1e9;
            const auto t0 = s.net().now_ns();
            s.send(data);
            const double transfer = static_cast<double>(s.net().now_ns() - t0) / 1e9;
            wall += std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();
            setups.push_back(setup);
            transfers.push_back(transfer);
            totals.push_back(setup + transfer);
        }

        const double n = static_cast<double>(config.iterations);
        BenchmarkRow row;
        row.size_bits = bits;
        row.setup_s = std::accumulate(setups.begin(), setups.end(), 0.0) / n;
        row.transfer_s = std::accumulate(transfers.begin(), transfers.end(), 0.0) / n;
        row.mean_total_s = std::accumulate(totals.begin(), totals.end(), 0.0) / n;
        double var = 0;
        for (double t : totals) var += (t - row.mean_total_s) * (t - row.mean_total_s);
        row.std_s = std::sqrt(var / n);
        row.wall_s = wall / n;
        report.rows.push_back(row);
    }

    if (report.rows.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& r : report.rows) {
            xs.push_back(static_cast<double>(r.size_bits));
            ys.push_back(r.mean_total_s);
        }
        report.fit = least_squares(xs, ys);
    } else {
        report.fit = LinearFit{0, report.rows.front().mean_total_s, 1.0};
    }
    return report;
}

std::string to_csv(const BenchmarkReport& report)
{
    std::string out = "size_bits,mean_total_s,std_s,setup_s,transfer_s,slope,intercept,r2\n";
    char buf[256];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%llu,%.9f,%.9f,%.9f,%.9f,,,\n", static_cast<unsigned long long>(r.size_bits),
                      r.mean_total_s, r.std_s, r.setup_s, r.transfer_s);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, ",,,,,%.9e,%.9f,%.9f\n", report.fit.slope, report.fit.intercept, report.fit.r2);
    out += buf;
    return out;
}

std::vector<double> parse_sizes(std::string_view spec)
{
    std::vector<double> out;
    auto num = [&](std::string_view s) {
        try {
            std::size_t pos = 0;
            double v = std::stod(std::string(s), &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad size '" + std::string(s) + "'");
        }
    };
    if (spec.find(':') != std::string_view::npos) {
        std::vector<double> parts;
        std::size_t start = 0;
        for (;;) {
            auto colon = spec.find(':', start);
            parts.push_back(num(spec.substr(start, colon - start)));
            if (colon == std::string_view::npos) break;
            start = colon + 1;
        }
        if (parts.size() < 2 || parts.size() > 3) throw Error(ErrorCode::InvalidArgument, "range must be a:b or a:b:step");
        const double step = parts.size() == 3 ? parts[2] : 1.0;
        if (!(step > 0)) throw Error(ErrorCode::InvalidArgument, "range step must be positive");
        for (double v = parts[0]; v <= parts[1] + 1e-9; v += step) out.push_back(v);
    } else {
        std::size_t start = 0;
        for (;;) {
            auto comma = spec.find(',', start);
            out.push_back(num(spec.substr(start, comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
    }
    return out;
}

} // namespace spns
