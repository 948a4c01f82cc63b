#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "spns/bytes.hpp"
#include "spns/cells.hpp"

namespace spns {

struct Outbound {
    Address to;
    Cell cell;
};

/// Microsecond clock. Simulated runs bind it to virtual time.
using Clock = std::function<std::uint64_t()>;

Clock wall_clock();

/// A protocol node: a single-threaded event handler that consumes one cell
/// and returns the cells it wants sent. Transports own delivery.
class Reactor {
public:
    virtual ~Reactor() = default;
    virtual Address address() const = 0;
    virtual std::vector<Outbound> on_cell(Address from, const Cell& cell) = 0;
};

} // namespace spns
