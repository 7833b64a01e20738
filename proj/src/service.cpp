#include "facret/service.hpp"

#include "facret/byte_io.hpp"
#include "facret/errors.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <charconv>
#include <cstring>

namespace facret {

namespace {

// Responses are small; anything larger than this is not a response.
constexpr std::uint32_t kMaxResponse = 16u << 20;

enum class ReadResult { ok, closed, timeout, error };

ReadResult read_exact(int fd, std::uint8_t* out, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::recv(fd, out + got, n - got, 0);
        if (r > 0) {
            got += static_cast<std::size_t>(r);
            continue;
        }
        if (r == 0) {
            return ReadResult::closed;
        }
        if (errno == EINTR) {
            continue;
        }
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
            return ReadResult::timeout;
        }
        return ReadResult::error;
    }
    return ReadResult::ok;
}

bool write_all(int fd, std::span<const std::uint8_t> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t r = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (r > 0) {
            sent += static_cast<std::size_t>(r);
        } else if (r < 0 && errno == EINTR) {
            continue;
        } else {
            return false;
        }
    }
    return true;
}

void set_timeouts(int fd, std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string errno_text(const std::string& what) {
    return what + ": " + std::strerror(errno);
}

struct AddrInfo {
    addrinfo* head = nullptr;
    ~AddrInfo() {
        if (head != nullptr) {
            ::freeaddrinfo(head);
        }
    }
};

void resolve(const Endpoint& ep, bool passive, AddrInfo& out) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = passive ? AI_PASSIVE : 0;
    const std::string port = std::to_string(ep.port);
    const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &out.head);
    if (rc != 0) {
        throw NetworkError("cannot resolve " + ep.host + ": " + ::gai_strerror(rc));
    }
}

} // namespace

Endpoint parse_endpoint(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) {
        throw InvalidArgument("endpoint must look like host:port, got \"" + text + "\"");
    }
    Endpoint ep;
    if (colon > 0) {
        ep.host = text.substr(0, colon);
        if (ep.host.size() > 2 && ep.host.front() == '[' && ep.host.back() == ']') {
            ep.host = ep.host.substr(1, ep.host.size() - 2);
        }
    }
    const std::string port = text.substr(colon + 1);
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc{} || ptr != port.data() + port.size() || port.empty() || value > 65535) {
        throw InvalidArgument("bad port in endpoint \"" + text + "\"");
    }
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

RetrievalServer::RetrievalServer(std::shared_ptr<const ObjectIndex> index, ServerOptions options)
    : index_(std::move(index)), options_(options) {
    if (!index_) {
        throw InvalidArgument("server needs an index");
    }
}

RetrievalServer::~RetrievalServer() { stop(); }

void RetrievalServer::start(const Endpoint& endpoint) {
    if (running_) {
        throw Error("server already running");
    }
    AddrInfo ai;
    resolve(endpoint, true, ai);
    std::string last_error = "no usable address";
    for (addrinfo* a = ai.head; a != nullptr; a = a->ai_next) {
        const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) {
            last_error = errno_text("socket");
            continue;
        }
        const int yes = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        if (::bind(fd, a->ai_addr, a->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
            last_error = errno_text("bind " + endpoint.host + ":" + std::to_string(endpoint.port));
            ::close(fd);
            continue;
        }
        listen_fd_ = fd;
        break;
    }
    if (listen_fd_ < 0) {
        throw NetworkError(last_error);
    }
    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = bound.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                                        : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void RetrievalServer::stop() {
    if (!running_.exchange(false)) {
        return;
    }
    if (acceptor_.joinable()) {
        acceptor_.join();
    }
    ::close(listen_fd_);
    listen_fd_ = -1;
    std::unique_lock lock(mutex_);
    for (int fd : open_fds_) {
        ::shutdown(fd, SHUT_RDWR);
    }
    idle_.wait(lock, [this] { return active_ == 0; });
}

void RetrievalServer::accept_loop() {
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        const int ready = ::poll(&p, 1, 50);
        if (ready <= 0) {
            continue;
        }
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            continue;
        }
        const int yes = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
        set_timeouts(fd, options_.idle_timeout);
        {
            std::lock_guard lock(mutex_);
            open_fds_.insert(fd);
            ++active_;
        }
        std::thread([this, fd] { serve_connection(fd); }).detach();
    }
}

void RetrievalServer::serve_connection(int fd) {
    std::array<std::uint8_t, 4> header{};
    std::vector<std::uint8_t> payload;
    while (running_) {
        if (read_exact(fd, header.data(), header.size()) != ReadResult::ok) {
            break;
        }
        const std::uint32_t len = le32(header.data());
        if (len > options_.max_frame) {
            // The stream cannot be resynchronized without reading the
            // oversized body, so answer and hang up.
            ResponseMessage r;
            r.status = Status::malformed_frame;
            r.error_text = "malformed frame: " + std::to_string(len) + " bytes exceeds the " +
                           std::to_string(options_.max_frame) + " byte limit";
            write_all(fd, frame(encode_response(r)));
            break;
        }
        payload.resize(len);
        if (read_exact(fd, payload.data(), len) != ReadResult::ok) {
            break;
        }
        const auto response = encode_response(answer_query(*index_, payload));
        if (!write_all(fd, frame(response))) {
            break;
        }
    }
    std::lock_guard lock(mutex_);
    open_fds_.erase(fd);
    ::close(fd);
    --active_;
    idle_.notify_all();
}

std::unique_ptr<RetrievalServer> serve(std::shared_ptr<const ObjectIndex> index, const Endpoint& endpoint,
                                       ServerOptions options) {
    auto server = std::make_unique<RetrievalServer>(std::move(index), options);
    server->start(endpoint);
    return server;
}

RetrievalClient::RetrievalClient(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
    AddrInfo ai;
    resolve(endpoint, false, ai);
    std::string last_error = "no usable address";
    for (addrinfo* a = ai.head; a != nullptr; a = a->ai_next) {
        const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) {
            last_error = errno_text("socket");
            continue;
        }
        set_timeouts(fd, timeout);
        if (::connect(fd, a->ai_addr, a->ai_addrlen) != 0) {
            last_error = errno_text("connect " + endpoint.host + ":" + std::to_string(endpoint.port));
            ::close(fd);
            continue;
        }
        const int yes = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
        fd_ = fd;
        break;
    }
    if (fd_ < 0) {
        throw NetworkError(last_error);
    }
}

RetrievalClient::~RetrievalClient() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

std::vector<std::uint8_t> RetrievalClient::round_trip(std::span<const std::uint8_t> payload) {
    const auto framed = frame(payload);
    if (!write_all(fd_, framed)) {
        throw NetworkError(errno_text("send"));
    }
    bytes_sent_ += framed.size();

    auto check = [](ReadResult r) {
        switch (r) {
        case ReadResult::ok: return;
        case ReadResult::closed: throw NetworkError("server closed the connection");
        case ReadResult::timeout: throw NetworkError("timed out waiting for the server");
        case ReadResult::error: throw NetworkError(errno_text("recv"));
        }
    };
    std::array<std::uint8_t, 4> header{};
    check(read_exact(fd_, header.data(), header.size()));
    const std::uint32_t len = le32(header.data());
    if (len > kMaxResponse) {
        throw NetworkError("response frame of " + std::to_string(len) + " bytes is too large");
    }
    std::vector<std::uint8_t> out(len);
    check(read_exact(fd_, out.data(), len));
    return out;
}

ResponseMessage RetrievalClient::send(const QueryMessage& q) {
    return decode_response(round_trip(encode_query(q)));
}

QueryMessage make_query(const DescriptorMatrix& m, const QueryOptions& options) {
    if (options.eta < 0 || options.eta > 0xFFFF || options.alpha < 0 || options.alpha > 0xFFFF) {
        throw InvalidArgument("eta and alpha must fit in 16 bits");
    }
    if (options.bits < 1) {
        throw InvalidArgument("queries are always quantized; bits must be at least 1");
    }
    const auto f = extract_factors(m, options.extraction);
    const auto q = quantize_pair(f, options.bits);
    QueryMessage msg;
    msg.eta = static_cast<std::uint16_t>(options.eta);
    msg.alpha = static_cast<std::uint16_t>(options.alpha);
    msg.pca_blob = encode(q.pca);
    msg.nmf_blob = encode(q.nmf);
    return msg;
}

namespace {

RankedList unwrap(const ResponseMessage& r, int eta) {
    if (r.status != Status::ok) {
        throw Error("server status " + std::to_string(static_cast<int>(r.status)) + ": " + r.error_text);
    }
    return ranked_list_from(r, eta);
}

} // namespace

RankedList query_local(const ObjectIndex& index, const DescriptorMatrix& m, const QueryOptions& options) {
    return unwrap(answer_query(index, encode_query(make_query(m, options))), options.eta);
}

RankedList query_remote(const Endpoint& endpoint, const DescriptorMatrix& m, const QueryOptions& options) {
    const auto msg = make_query(m, options);
    RetrievalClient client(endpoint, options.timeout);
    return unwrap(client.send(msg), options.eta);
}

} // namespace facret
