#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spns/scenario.hpp"

namespace spns {

enum class SizeUnit { megabit, megabyte };

struct BenchmarkConfig {
    std::vector<double> sizes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
    SizeUnit unit = SizeUnit::megabit;
    std::size_t iterations = 100;
    std::uint64_t bandwidth_bps = 10'000'000;
    std::uint64_t propagation_delay_us = 100;
    std::uint64_t seed = 1;
    std::size_t hops = 2;

    /// Throws InvalidArgument.
    void validate() const;
    std::uint64_t size_bits(double size) const;
};

struct BenchmarkRow {
    std::uint64_t size_bits = 0;
    double mean_total_s = 0;
    double std_s = 0;
    double setup_s = 0;
    double transfer_s = 0;
    /// Host time spent per iteration, mostly crypto. Informational only.
    double wall_s = 0;
};

struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};

/// Ordinary least squares y = slope * x + intercept.
LinearFit least_squares(std::span<const double> xs, std::span<const double> ys);

struct BenchmarkReport {
    std::size_t hops = 2;
    std::uint64_t bandwidth_bps = 0;
    std::vector<BenchmarkRow> rows;
    /// Fit of mean total time against size in bits.
    LinearFit fit;

    /// Serialization-only transfer time: size × 512/489 / bandwidth.
    double ideal_transfer_s(std::uint64_t size_bits) const;
};

/// For each size: fresh circuits, one transfer each, timed on the virtual
/// clock. Throws ScenarioFailure naming the failing phase.
BenchmarkReport run_benchmark(const BenchmarkConfig& config);

/// size_bits,mean_total_s,std_s,setup_s,transfer_s,slope,intercept,r2 with
/// the fit on a trailer row.
std::string to_csv(const BenchmarkReport& report);

/// "1:14" (inclusive range, step 1), "1:14:2", or "1,2,5".
std::vector<double> parse_sizes(std::string_view spec);

} // namespace spns
