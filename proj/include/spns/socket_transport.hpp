#pragma once

#include <atomic>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "spns/reactor.hpp"

namespace spns {

struct HostPort {
    std::string host;
    std::uint16_t port = 0;
};

/// Maps address tokens to TCP endpoints. File format: one
/// "<16 hex digit token> <host>:<port>" per line, '#' starts a comment.
class AddressBook {
public:
    void add(Address a, HostPort hp) { entries_[a] = std::move(hp); }
    const HostPort* find(Address a) const;
    static AddressBook load(const std::string& path);
    void save(const std::string& path) const;
    const std::map<Address, HostPort>& entries() const { return entries_; }

private:
    std::map<Address, HostPort> entries_;
};

/// Runs one reactor on its own thread over TCP. Cells travel as raw
/// 512-byte records. Outbound connections are opened on first use from the
/// address book; a peer that connected to us is known by a synthetic
/// address that routes replies back over the same connection.
class SocketNodeHost {
public:
    SocketNodeHost(Reactor& node, AddressBook book, std::uint16_t listen_port = 0, std::string bind_host = "127.0.0.1");
    ~SocketNodeHost();
    SocketNodeHost(const SocketNodeHost&) = delete;
    SocketNodeHost& operator=(const SocketNodeHost&) = delete;

    std::uint16_t port() const { return port_; }
    void start();
    void stop();

    /// Runs fn on the node's thread and sends whatever it returns.
    std::future<void> post(std::function<std::vector<Outbound>()> fn);
    /// Runs fn on the node's thread for inspection.
    template <typename T>
    T query(std::function<T()> fn)
    {
        auto p = std::make_shared<std::promise<T>>();
        auto f = p->get_future();
        post([p, fn = std::move(fn)] {
            p->set_value(fn());
            return std::vector<Outbound>{};
        }).wait();
        return f.get();
    }

    /// Peer routing changes (the address book is only read on the loop).
    void set_book(AddressBook book);
    std::size_t dropped() const { return dropped_.load(); }
    /// True when no connection has unsent bytes queued.
    bool flushed();

private:
    struct Conn {
        int fd = -1;
        Address peer;
        std::vector<std::uint8_t> rx;
        std::vector<std::uint8_t> tx;
    };

    void loop();
    void dispatch(std::vector<Outbound> out);
    Conn* connect_to(Address a);
    void close_conn(std::size_t i);
    void wake();

    Reactor& node_;
    AddressBook book_;
    int listen_fd_ = -1;
    int wake_fds_[2] = {-1, -1};
    std::uint16_t port_ = 0;
    std::thread thread_;
    std::atomic<bool> running_{false};
    std::mutex mu_;
    std::vector<std::pair<std::function<std::vector<Outbound>()>, std::shared_ptr<std::promise<void>>>> tasks_;
    std::vector<Conn> conns_;
    std::uint64_t next_synthetic_ = 1;
    std::atomic<std::size_t> dropped_{0};
};

} // namespace spns
