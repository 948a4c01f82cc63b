#include "spns/socket_transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spns {

namespace {

// Synthetic addresses for inbound peers live in a range real tokens are
// vanishingly unlikely to hit.
constexpr std::uint64_t kSyntheticBase = 0xfffe000000000000ull;

void set_nonblocking(int fd)
{
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

[[noreturn]] void sys_fail(const std::string& what)
{
    throw Error(ErrorCode::Io, what + ": " + std::strerror(errno));
}

} // namespace

const HostPort* AddressBook::find(Address a) const
{
    auto it = entries_.find(a);
    return it == entries_.end() ? nullptr : &it->second;
}

AddressBook AddressBook::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read address book " + path);
    AddressBook book;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::string token, endpoint;
        if (!(ss >> token)) continue;
        if (!(ss >> endpoint)) throw Error(ErrorCode::Malformed, "address book line without endpoint: " + line);
        auto colon = endpoint.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorCode::Malformed, "endpoint must be host:port: " + endpoint);
        HostPort hp{endpoint.substr(0, colon), static_cast<std::uint16_t>(std::stoul(endpoint.substr(colon + 1)))};
        book.add(Address::from_bytes(from_hex(token)), hp);
    }
    return book;
}

void AddressBook::save(const std::string& path) const
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write address book " + path);
    for (const auto& [a, hp] : entries_) out << a.to_string() << ' ' << hp.host << ':' << hp.port << '\n';
}

SocketNodeHost::SocketNodeHost(Reactor& node, AddressBook book, std::uint16_t listen_port, std::string bind_host)
    : node_(node), book_(std::move(book))
{
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) sys_fail("socket");
    int one = 1;
    setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(listen_port);
    if (inet_pton(AF_INET, bind_host.c_str(), &sa.sin_addr) != 1) throw Error(ErrorCode::InvalidArgument, "bad bind host " + bind_host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) sys_fail("bind");
    if (::listen(listen_fd_, 64) < 0) sys_fail("listen");
    socklen_t len = sizeof sa;
    getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
    port_ = ntohs(sa.sin_port);
    set_nonblocking(listen_fd_);
    if (::pipe(wake_fds_) < 0) sys_fail("pipe");
    set_nonblocking(wake_fds_[0]);
}

SocketNodeHost::~SocketNodeHost()
{
    stop();
    for (auto& c : conns_) ::close(c.fd);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    for (int fd : wake_fds_)
        if (fd >= 0) ::close(fd);
}

void SocketNodeHost::start()
{
    if (running_.exchange(true)) return;
    thread_ = std::thread([this] { loop(); });
}

void SocketNodeHost::stop()
{
    if (!running_.exchange(false)) return;
    wake();
    if (thread_.joinable()) thread_.join();
}

void SocketNodeHost::wake()
{
    const char b = 1;
    [[maybe_unused]] auto n = ::write(wake_fds_[1], &b, 1);
}

std::future<void> SocketNodeHost::post(std::function<std::vector<Outbound>()> fn)
{
    auto p = std::make_shared<std::promise<void>>();
    auto f = p->get_future();
    {
        std::lock_guard lock(mu_);
        tasks_.emplace_back(std::move(fn), p);
    }
    wake();
    return f;
}

void SocketNodeHost::set_book(AddressBook book)
{
    if (!running_) {
        book_ = std::move(book);
        return;
    }
    auto shared = std::make_shared<AddressBook>(std::move(book));
    post([this, shared] {
        book_ = *shared;
        return std::vector<Outbound>{};
    }).wait();
}

bool SocketNodeHost::flushed()
{
    return query<bool>([this] {
        return std::all_of(conns_.begin(), conns_.end(), [](const Conn& c) { return c.tx.empty(); });
    });
}

SocketNodeHost::Conn* SocketNodeHost::connect_to(Address a)
{
    for (auto& c : conns_)
        if (c.peer == a) return &c;
    const auto* hp = book_.find(a);
    if (!hp) return nullptr;

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(hp->host.c_str(), std::to_string(hp->port).c_str(), &hints, &res) != 0 || !res) return nullptr;
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) < 0) {
        if (fd >= 0) ::close(fd);
        freeaddrinfo(res);
        return nullptr;
    }
    freeaddrinfo(res);
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    set_nonblocking(fd);
    conns_.push_back(Conn{fd, a, {}, {}});
    return &conns_.back();
}

void SocketNodeHost::dispatch(std::vector<Outbound> out)
{
    for (const auto& o : out) {
        Conn* c = connect_to(o.to);
        if (!c) {
            ++dropped_;
            continue;
        }
        const auto wire = encode_cell(o.cell);
        c->tx.insert(c->tx.end(), wire.begin(), wire.end());
    }
}

void SocketNodeHost::close_conn(std::size_t i)
{
    ::close(conns_[i].fd);
    conns_.erase(conns_.begin() + static_cast<std::ptrdiff_t>(i));
}

void SocketNodeHost::loop()
{
    std::vector<pollfd> fds;
    while (running_) {
        fds.clear();
        fds.push_back({wake_fds_[0], POLLIN, 0});
        fds.push_back({listen_fd_, POLLIN, 0});
        for (const auto& c : conns_) fds.push_back({c.fd, static_cast<short>(POLLIN | (c.tx.empty() ? 0 : POLLOUT)), 0});
        if (::poll(fds.data(), fds.size(), 200) < 0) {
            if (errno == EINTR) continue;
            break;
        }

        if (fds[0].revents & POLLIN) {
            char buf[64];
            while (::read(wake_fds_[0], buf, sizeof buf) > 0) {
            }
        }
        decltype(tasks_) tasks;
        {
            std::lock_guard lock(mu_);
            tasks.swap(tasks_);
        }
        for (auto& [fn, done] : tasks) {
            try {
                dispatch(fn());
                done->set_value();
            } catch (...) {
                done->set_exception(std::current_exception());
            }
        }

        if (fds[1].revents & POLLIN) {
            for (;;) {
                int fd = ::accept(listen_fd_, nullptr, nullptr);
                if (fd < 0) break;
                int one = 1;
                setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
                set_nonblocking(fd);
                conns_.push_back(Conn{fd, Address{kSyntheticBase + next_synthetic_++}, {}, {}});
            }
        }

        // Connections may have been added above; only those polled are checked.
        const std::size_t polled = fds.size() - 2;
        for (std::size_t i = polled; i-- > 0;) {
            auto& c = conns_[i];
            const auto rev = fds[i + 2].revents;
            bool dead = false;
            if (rev & (POLLIN | POLLHUP | POLLERR)) {
                std::uint8_t buf[64 * 1024];
                for (;;) {
                    auto n = ::read(c.fd, buf, sizeof buf);
                    if (n > 0) {
                        c.rx.insert(c.rx.end(), buf, buf + n);
                        continue;
                    }
                    if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK)) dead = true;
                    break;
                }
                std::size_t off = 0;
                const Address peer = c.peer;
                std::vector<Cell> cells;
                while (c.rx.size() - off >= kCellSize) {
                    try {
                        cells.push_back(decode_cell(ByteView(c.rx).subspan(off, kCellSize)));
                    } catch (const Error&) {
                        dead = true;
                        break;
                    }
                    off += kCellSize;
                }
                c.rx.erase(c.rx.begin(), c.rx.begin() + static_cast<std::ptrdiff_t>(off));
                // dispatch() may grow conns_, so c must not be used after this.
                for (const auto& cell : cells) dispatch(node_.on_cell(peer, cell));
            }
            auto& cc = conns_[i];
            if (!dead && !cc.tx.empty()) {
                auto n = ::write(cc.fd, cc.tx.data(), cc.tx.size());
                if (n > 0) cc.tx.erase(cc.tx.begin(), cc.tx.begin() + n);
                else if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) dead = true;
            }
            if (dead) close_conn(i);
        }
        // Freshly opened connections get their first write attempt next round via POLLOUT.
    }
}

} // namespace spns
