#pragma once

#include "facret/descriptor_store.hpp"
#include "facret/index_builder.hpp"
#include "facret/matcher.hpp"
#include "facret/protocol.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>

namespace facret {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// Parses "host:port" (or ":port", meaning 127.0.0.1).
Endpoint parse_endpoint(const std::string& text);

struct ServerOptions {
    std::uint32_t max_frame = kDefaultMaxFrame;
    std::chrono::milliseconds idle_timeout{std::chrono::minutes(5)};
};

/// TCP server answering length-prefixed query frames against a shared,
/// immutable index. One thread per connection; stop() (or the destructor)
/// closes the listener and every open connection and joins all threads.
class RetrievalServer {
public:
    RetrievalServer(std::shared_ptr<const ObjectIndex> index, ServerOptions options = {});
    ~RetrievalServer();

    RetrievalServer(const RetrievalServer&) = delete;
    RetrievalServer& operator=(const RetrievalServer&) = delete;

    /// Binds and starts accepting. Port 0 picks an ephemeral port.
    void start(const Endpoint& endpoint);
    void stop();

    std::uint16_t port() const { return port_; }
    bool running() const { return running_; }

private:
    void accept_loop();
    void serve_connection(int fd);

    std::shared_ptr<const ObjectIndex> index_;
    ServerOptions options_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex mutex_;
    std::condition_variable idle_;
    std::size_t active_ = 0;
    std::set<int> open_fds_;
};

/// Convenience: construct and start.
std::unique_ptr<RetrievalServer> serve(std::shared_ptr<const ObjectIndex> index, const Endpoint& endpoint,
                                       ServerOptions options = {});

/// Blocking client over one persistent connection.
class RetrievalClient {
public:
    explicit RetrievalClient(const Endpoint& endpoint,
                             std::chrono::milliseconds timeout = std::chrono::seconds(30));
    ~RetrievalClient();

    RetrievalClient(const RetrievalClient&) = delete;
    RetrievalClient& operator=(const RetrievalClient&) = delete;

    /// Sends one frame and waits for the response payload.
    std::vector<std::uint8_t> round_trip(std::span<const std::uint8_t> payload);

    ResponseMessage send(const QueryMessage& q);

    /// Bytes written to the socket so far, frame headers included.
    std::size_t bytes_sent() const { return bytes_sent_; }

private:
    int fd_ = -1;
    std::size_t bytes_sent_ = 0;
};

struct QueryOptions {
    int eta = 20;
    int alpha = 2;
    int bits = 5;
    ExtractionOptions extraction;
    std::chrono::milliseconds timeout = std::chrono::seconds(30);
};

/// Client-side pipeline for one image: factors → quantize → encode.
QueryMessage make_query(const DescriptorMatrix& m, const QueryOptions& options);

/// What the server computes, without a network in between.
RankedList query_local(const ObjectIndex& index, const DescriptorMatrix& m, const QueryOptions& options);

/// Full remote round trip. Throws NetworkError on transport failures and
/// Error carrying the server's text on a non-zero status.
RankedList query_remote(const Endpoint& endpoint, const DescriptorMatrix& m, const QueryOptions& options);

} // namespace facret
