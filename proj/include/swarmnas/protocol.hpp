#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "swarmnas/evaluation.hpp"
#include "swarmnas/search_space.hpp"

namespace swarmnas {

inline constexpr int kProtocolVersion = 1;

/// Malformed message or a reply that breaks the protocol contract.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The byte stream is gone (peer exited, connection reset, write failed).
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Hello {
    int version = kProtocolVersion;
    InputShape input_shape;
    friend bool operator==(const Hello&, const Hello&) = default;
};

struct HelloAck {
    int version = kProtocolVersion;
    bool supports_weight_reuse = false;
    friend bool operator==(const HelloAck&, const HelloAck&) = default;
};

struct EvalRequest {
    std::uint64_t id = 0;
    ArchitectureDescriptor descriptor;
    std::size_t reuse_prefix_len = 0;
    std::optional<std::string> reuse_key;
    friend bool operator==(const EvalRequest&, const EvalRequest&) = default;
};

struct EvalResult {
    std::uint64_t id = 0;
    double accuracy = 0.0;
    std::optional<double> loss;
    double wall_ms = 0.0;
    std::optional<std::string> stored_key;
    std::optional<std::size_t> reused_prefix_len;  // optional extension
    friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

struct EvalErrorMessage {
    std::uint64_t id = 0;
    std::string code;
    std::string message;
    friend bool operator==(const EvalErrorMessage&, const EvalErrorMessage&) = default;
};

struct Shutdown {
    friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

using Message = std::variant<Hello, HelloAck, EvalRequest, EvalResult, EvalErrorMessage, Shutdown>;

std::string_view message_type(const Message& message);

/// One JSON object on a single line, without the trailing newline.
std::string encode(const Message& message);

/// Parses one line. Unknown fields are ignored; missing or mistyped required
/// fields throw ProtocolError. Range checks (accuracy) are the session's job.
Message decode(std::string_view line);

/// Line-oriented byte stream to a worker.
class Transport {
public:
    virtual ~Transport() = default;
    /// Writes `line` plus a newline. Throws TransportError.
    virtual void send_line(std::string_view line) = 0;
    /// Next line without its newline, or nullopt if `timeout` elapsed first.
    /// Throws TransportError at end of stream.
    virtual std::optional<std::string> receive_line(std::chrono::milliseconds timeout) = 0;
    virtual void close() = 0;
};

/// Transport over a connected stream socket; owns the descriptor.
class SocketTransport : public Transport {
public:
    explicit SocketTransport(int fd);
    ~SocketTransport() override;
    SocketTransport(const SocketTransport&) = delete;
    SocketTransport& operator=(const SocketTransport&) = delete;

    void send_line(std::string_view line) override;
    std::optional<std::string> receive_line(std::chrono::milliseconds timeout) override;
    void close() override;

private:
    int fd_;
    std::string buffer_;
};

/// Runs `command` through /bin/sh with its stdin and stdout joined to a
/// socket pair; stderr is inherited.
class ExecTransport : public SocketTransport {
public:
    explicit ExecTransport(const std::string& command);
    ~ExecTransport() override;
    void close() override;
    int pid() const { return pid_; }

private:
    ExecTransport(std::pair<int, int> fds, const std::string& command);
    int pid_ = -1;
};

std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port,
                                       std::chrono::milliseconds timeout);

/// "exec:<command>" or "tcp:<host>:<port>". Throws std::invalid_argument on
/// a malformed binding and TransportError if the worker cannot be reached.
std::unique_ptr<Transport> open_transport(const std::string& binding, std::chrono::milliseconds timeout);

using ProtocolLogger = std::function<void(const std::string&)>;

struct SessionOptions {
    std::chrono::milliseconds handshake_timeout{10'000};
    std::chrono::milliseconds request_timeout{3'600'000};
    ProtocolLogger logger;  // defaults to stderr
};

/// One worker connection with at most one request in flight.
class Session {
public:
    Session(std::unique_ptr<Transport> transport, SessionOptions options = {});
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Sends hello and waits for hello_ack. Throws ProtocolError on a version
    /// mismatch, a bad reply or a timeout; the session is then dead.
    HelloAck handshake(const InputShape& shape);

    /// Throws EvaluationError for eval_error replies, timeouts, protocol
    /// violations and a dead session. A broken transport kills the session.
    Metrics evaluate(const ArchitectureDescriptor& d, const ReuseHint& hint);

    /// Sends shutdown (best effort) and closes the transport.
    void shutdown();

    bool alive() const { return alive_; }
    bool supports_weight_reuse() const { return capabilities_ && capabilities_->supports_weight_reuse; }
    std::uint64_t requests_sent() const { return next_id_ - 1; }

private:
    void log(const std::string& line) const;
    void mark_dead(const std::string& reason);

    std::unique_ptr<Transport> transport_;
    SessionOptions options_;
    std::optional<HelloAck> capabilities_;
    bool alive_ = true;
    std::string death_reason_;
    std::uint64_t next_id_ = 1;
    std::set<std::uint64_t> answered_;
};

/// Evaluator backed by an external worker. Connects and handshakes in the
/// constructor (throws TransportError or ProtocolError on failure).
class RemoteEvaluator : public Evaluator {
public:
    RemoteEvaluator(const std::string& binding, const InputShape& shape, SessionOptions options = {});
    RemoteEvaluator(std::unique_ptr<Transport> transport, const InputShape& shape, SessionOptions options = {});

    Metrics evaluate(const ArchitectureDescriptor& d, const ReuseHint& hint) override;
    Session& session() { return *session_; }

private:
    std::unique_ptr<Session> session_;
};

}  // namespace swarmnas
