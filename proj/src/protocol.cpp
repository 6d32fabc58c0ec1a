#include "swarmnas/protocol.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "swarmnas/descriptor_json.hpp"

namespace swarmnas {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxLine = 16 * 1024 * 1024;

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

const json& field(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
    return *it;
}

std::uint64_t id_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number_unsigned()) throw ProtocolError(std::string("field '") + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

double number_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number()) throw ProtocolError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

std::string string_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_string()) throw ProtocolError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

int version_field(const json& j) {
    const auto& v = field(j, "version");
    if (!v.is_number_integer()) throw ProtocolError("field 'version' must be an integer");
    return v.get<int>();
}

template <typename T, typename Get>
std::optional<T> optional_field(const json& j, const char* key, Get get) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return get(j, key);
}

json nullable(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }
json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Encoder {
    json operator()(const Hello& m) const {
        return {{"type", "hello"}, {"version", m.version}, {"input_shape", input_shape_to_json(m.input_shape)}};
    }
    json operator()(const HelloAck& m) const {
        return {{"type", "hello_ack"}, {"version", m.version}, {"supports_weight_reuse", m.supports_weight_reuse}};
    }
    json operator()(const EvalRequest& m) const {
        return {{"type", "eval_request"},
                {"id", m.id},
                {"descriptor", descriptor_to_json(m.descriptor)},
                {"reuse_prefix_len", m.reuse_prefix_len},
                {"reuse_key", nullable(m.reuse_key)}};
    }
    json operator()(const EvalResult& m) const {
        json j = {{"type", "eval_result"},
                  {"id", m.id},
                  {"accuracy", m.accuracy},
                  {"loss", nullable(m.loss)},
                  {"wall_ms", m.wall_ms},
                  {"stored_key", nullable(m.stored_key)}};
        if (m.reused_prefix_len) j["reused_prefix_len"] = *m.reused_prefix_len;
        return j;
    }
    json operator()(const EvalErrorMessage& m) const {
        return {{"type", "eval_error"}, {"id", m.id}, {"code", m.code}, {"message", m.message}};
    }
    json operator()(const Shutdown&) const { return {{"type", "shutdown"}}; }
};

Message decode_object(const json& j) {
    const std::string type = string_field(j, "type");
    if (type == "hello") {
        Hello m;
        m.version = version_field(j);
        try {
            m.input_shape = input_shape_from_json(field(j, "input_shape"));
        } catch (const std::invalid_argument& e) {
            throw ProtocolError(std::string("bad input_shape: ") + e.what());
        }
        return m;
    }
    if (type == "hello_ack") {
        HelloAck m;
        m.version = version_field(j);
        if (const auto it = j.find("supports_weight_reuse"); it != j.end() && !it->is_null()) {
            if (!it->is_boolean()) throw ProtocolError("field 'supports_weight_reuse' must be a boolean");
            m.supports_weight_reuse = it->get<bool>();
        }
        return m;
    }
    if (type == "eval_request") {
        EvalRequest m;
        m.id = id_field(j, "id");
        try {
            m.descriptor = descriptor_from_json(field(j, "descriptor"));
        } catch (const std::invalid_argument& e) {
            throw ProtocolError(std::string("bad descriptor: ") + e.what());
        }
        m.reuse_prefix_len = id_field(j, "reuse_prefix_len");
        m.reuse_key = optional_field<std::string>(j, "reuse_key", string_field);
        return m;
    }
    if (type == "eval_result") {
        EvalResult m;
        m.id = id_field(j, "id");
        m.accuracy = number_field(j, "accuracy");
        m.loss = optional_field<double>(j, "loss", number_field);
        m.wall_ms = optional_field<double>(j, "wall_ms", number_field).value_or(0.0);
        m.stored_key = optional_field<std::string>(j, "stored_key", string_field);
        m.reused_prefix_len = optional_field<std::size_t>(j, "reused_prefix_len", id_field);
        return m;
    }
    if (type == "eval_error") {
        EvalErrorMessage m;
        m.id = id_field(j, "id");
        m.code = string_field(j, "code");
        m.message = optional_field<std::string>(j, "message", string_field).value_or("");
        return m;
    }
    if (type == "shutdown") return Shutdown{};
    throw ProtocolError("unknown message type '" + type + "'");
}

void wait_or_kill(int pid) {
    const auto deadline = Clock::now() + std::chrono::seconds(2);
    while (Clock::now() < deadline) {
        const int r = ::waitpid(pid, nullptr, WNOHANG);
        if (r == pid || (r < 0 && errno == ECHILD)) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid, SIGKILL);
    ::waitpid(pid, nullptr, 0);
}

std::pair<int, int> make_socket_pair() {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
        throw TransportError(errno_text("socketpair"));
    }
    return {fds[0], fds[1]};
}

}  // namespace

std::string_view message_type(const Message& message) {
    static constexpr std::string_view names[] = {"hello",       "hello_ack",  "eval_request",
                                                 "eval_result", "eval_error", "shutdown"};
    return names[message.index()];
}

std::string encode(const Message& message) { return std::visit(Encoder{}, message).dump(); }

Message decode(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("not JSON: ") + e.what());
    }
    if (!j.is_object()) throw ProtocolError("message must be a JSON object");
    return decode_object(j);
}

SocketTransport::SocketTransport(int fd) : fd_(fd) {}

SocketTransport::~SocketTransport() { SocketTransport::close(); }

void SocketTransport::send_line(std::string_view line) {
    if (fd_ < 0) throw TransportError("transport is closed");
    std::string data(line);
    data.push_back('\n');
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("send"));
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::optional<std::string> SocketTransport::receive_line(std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    while (true) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        if (fd_ < 0) throw TransportError("transport is closed");
        if (buffer_.size() > kMaxLine) throw TransportError("line exceeds 16 MiB");

        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) return std::nullopt;
        pollfd p{fd_, POLLIN, 0};
        const int ready = ::poll(&p, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1'000'000)));
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("poll"));
        }
        if (ready == 0) continue;
        char chunk[4096];
        const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw TransportError(errno_text("recv"));
        }
        if (n == 0) throw TransportError("worker closed the connection");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void SocketTransport::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

ExecTransport::ExecTransport(const std::string& command) : ExecTransport(make_socket_pair(), command) {}

ExecTransport::ExecTransport(std::pair<int, int> fds, const std::string& command) : SocketTransport(fds.first) {
    const int child_end = fds.second;
    pid_ = ::fork();
    if (pid_ < 0) {
        ::close(child_end);
        throw TransportError(errno_text("fork"));
    }
    if (pid_ == 0) {
        ::dup2(child_end, STDIN_FILENO);
        ::dup2(child_end, STDOUT_FILENO);
        ::signal(SIGPIPE, SIG_DFL);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(child_end);
}

ExecTransport::~ExecTransport() { ExecTransport::close(); }

void ExecTransport::close() {
    SocketTransport::close();
    if (pid_ > 0) {
        wait_or_kill(pid_);
        pid_ = -1;
    }
}

std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port,
                                       std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const std::string service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
        throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, ::freeaddrinfo);

    std::string last_error = "no addresses";
    for (const addrinfo* a = found; a != nullptr; a = a->ai_next) {
        const int fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, a->ai_protocol);
        if (fd < 0) {
            last_error = errno_text("socket");
            continue;
        }
        int rc = ::connect(fd, a->ai_addr, a->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd p{fd, POLLOUT, 0};
            rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
            if (rc == 1) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                errno = err;
                rc = err == 0 ? 0 : -1;
            } else {
                if (rc == 0) errno = ETIMEDOUT;
                rc = -1;
            }
        }
        if (rc == 0) {
            ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
            return std::make_unique<SocketTransport>(fd);
        }
        last_error = errno_text("connect");
        ::close(fd);
    }
    throw TransportError("cannot connect to " + host + ":" + service + " (" + last_error + ")");
}

std::unique_ptr<Transport> open_transport(const std::string& binding, std::chrono::milliseconds timeout) {
    if (binding.rfind("exec:", 0) == 0) {
        const std::string command = binding.substr(5);
        if (command.empty()) throw std::invalid_argument("exec evaluator needs a command");
        return std::make_unique<ExecTransport>(command);
    }
    if (binding.rfind("tcp:", 0) == 0) {
        const std::string rest = binding.substr(4);
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
            throw std::invalid_argument("tcp evaluator must look like tcp:<host>:<port>");
        }
        std::string host = rest.substr(0, colon);
        if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
        unsigned long port = 0;
        try {
            std::size_t used = 0;
            port = std::stoul(rest.substr(colon + 1), &used);
            if (used != rest.size() - colon - 1) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            throw std::invalid_argument("tcp evaluator port is not a number: " + rest.substr(colon + 1));
        }
        if (port == 0 || port > 65535) throw std::invalid_argument("tcp evaluator port out of range");
        return connect_tcp(host, static_cast<std::uint16_t>(port), timeout);
    }
    throw std::invalid_argument("unknown evaluator binding '" + binding + "' (expected exec:<command> or tcp:<host>:<port>)");
}

Session::Session(std::unique_ptr<Transport> transport, SessionOptions options)
    : transport_(std::move(transport)), options_(std::move(options)) {
    if (!transport_) throw std::invalid_argument("session needs a transport");
}

Session::~Session() {
    try {
        shutdown();
    } catch (...) {
    }
}

void Session::log(const std::string& line) const {
    if (options_.logger) {
        options_.logger(line);
    } else {
        std::cerr << "swarmnas protocol: " << line << '\n';
    }
}

void Session::mark_dead(const std::string& reason) {
    if (alive_) log("session dead: " + reason);
    alive_ = false;
    death_reason_ = reason;
    transport_->close();
}

HelloAck Session::handshake(const InputShape& shape) {
    if (!alive_) throw ProtocolError("session is dead: " + death_reason_);
    try {
        transport_->send_line(encode(Hello{kProtocolVersion, shape}));
        const auto deadline = Clock::now() + options_.handshake_timeout;
        while (true) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
            const auto line = transport_->receive_line(std::max(left, std::chrono::milliseconds(0)));
            if (!line) throw ProtocolError("no hello_ack within the handshake timeout");
            const Message reply = decode(*line);
            const auto* ack = std::get_if<HelloAck>(&reply);
            if (!ack) {
                log("ignoring " + std::string(message_type(reply)) + " before hello_ack");
                continue;
            }
            if (ack->version != kProtocolVersion) {
                throw ProtocolError("protocol version mismatch: engine speaks " + std::to_string(kProtocolVersion) +
                                    ", worker speaks " + std::to_string(ack->version));
            }
            capabilities_ = *ack;
            return *ack;
        }
    } catch (const ProtocolError& e) {
        mark_dead(e.what());
        throw;
    } catch (const TransportError& e) {
        mark_dead(e.what());
        throw ProtocolError(std::string("handshake failed: ") + e.what());
    }
}

Metrics Session::evaluate(const ArchitectureDescriptor& d, const ReuseHint& hint) {
    if (!alive_) throw EvaluationError("SESSION_DEAD", "worker session is dead: " + death_reason_);
    if (!capabilities_) throw EvaluationError("SESSION_DEAD", "handshake has not completed");

    EvalRequest request;
    request.id = next_id_++;
    request.descriptor = d;
    if (supports_weight_reuse() && hint.prefix_len > 0) {
        request.reuse_prefix_len = hint.prefix_len;
        request.reuse_key = hint.handle;
    }

    try {
        transport_->send_line(encode(request));
        const auto deadline = Clock::now() + options_.request_timeout;
        while (true) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
            const auto line = transport_->receive_line(std::max(left, std::chrono::milliseconds(0)));
            if (!line) {
                answered_.insert(request.id);  // a late reply is stale
                throw EvaluationError("TIMEOUT", "no reply to request " + std::to_string(request.id) +
                                                     " within the request timeout");
            }
            Message reply;
            try {
                reply = decode(*line);
            } catch (const ProtocolError& e) {
                log(std::string("malformed reply: ") + e.what());
                answered_.insert(request.id);
                throw EvaluationError("PROTOCOL", std::string("malformed reply: ") + e.what());
            }

            std::uint64_t id = 0;
            if (const auto* r = std::get_if<EvalResult>(&reply)) {
                id = r->id;
            } else if (const auto* err = std::get_if<EvalErrorMessage>(&reply)) {
                id = err->id;
            } else if (std::holds_alternative<Shutdown>(reply)) {
                throw TransportError("worker sent shutdown");
            } else {
                log("ignoring unexpected " + std::string(message_type(reply)));
                continue;
            }
            if (answered_.contains(id)) {
                log("rejected duplicate or stale reply for id " + std::to_string(id));
                continue;
            }
            if (id != request.id) {
                log("rejected reply for unknown id " + std::to_string(id));
                continue;
            }
            answered_.insert(id);

            if (const auto* err = std::get_if<EvalErrorMessage>(&reply)) {
                throw EvaluationError(err->code, err->message.empty() ? err->code : err->message);
            }
            const auto& r = std::get<EvalResult>(reply);
            if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) {
                log("protocol violation: accuracy " + std::to_string(r.accuracy) + " outside [0, 1]");
                throw EvaluationError("PROTOCOL", "accuracy " + std::to_string(r.accuracy) + " outside [0, 1]");
            }
            Metrics m;
            m.accuracy = r.accuracy;
            m.loss = r.loss;
            m.wall_ms = std::isfinite(r.wall_ms) && r.wall_ms >= 0.0 ? r.wall_ms : 0.0;
            m.stored_handle = r.stored_key;
            m.reused_prefix_len = std::min(r.reused_prefix_len.value_or(request.reuse_prefix_len),
                                           request.reuse_prefix_len);
            return m;
        }
    } catch (const TransportError& e) {
        mark_dead(e.what());
        throw EvaluationError("SESSION_DEAD", std::string("worker connection lost: ") + e.what());
    }
}

void Session::shutdown() {
    if (!alive_) return;
    try {
        transport_->send_line(encode(Shutdown{}));
    } catch (const TransportError&) {
    }
    alive_ = false;
    death_reason_ = "shut down";
    transport_->close();
}

RemoteEvaluator::RemoteEvaluator(const std::string& binding, const InputShape& shape, SessionOptions options)
    : RemoteEvaluator(open_transport(binding, options.handshake_timeout), shape, options) {}

RemoteEvaluator::RemoteEvaluator(std::unique_ptr<Transport> transport, const InputShape& shape,
                                 SessionOptions options)
    : session_(std::make_unique<Session>(std::move(transport), std::move(options))) {
    session_->handshake(shape);
}

Metrics RemoteEvaluator::evaluate(const ArchitectureDescriptor& d, const ReuseHint& hint) {
    return session_->evaluate(d, hint);
}

}  // namespace swarmnas
