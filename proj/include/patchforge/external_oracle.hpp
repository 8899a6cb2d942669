#ifndef PATCHFORGE_EXTERNAL_ORACLE_HPP
#define PATCHFORGE_EXTERNAL_ORACLE_HPP

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <openssl/evp.h>

#include "json.hpp"

#include "errors.hpp"
#include "image_io.hpp"
#include "oracle.hpp"

namespace patchforge {

namespace wire {

inline std::string base64_encode(const std::vector<std::uint8_t> &bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw MalformedResponse("base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char *>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw MalformedResponse("invalid base64 payload");
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

/// One request line (without the trailing newline).
inline std::string encode_request(std::uint64_t id, Modality modality, const Image &image) {
    std::vector<std::uint8_t> samples(image.values().size());
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = to_byte(image.values()[i]);
    nlohmann::ordered_json j;
    j["id"] = id;
    j["modality"] = std::string(to_string(modality));
    j["width"] = image.width();
    j["height"] = image.height();
    j["channels"] = image.channels();
    j["pixels"] = base64_encode(samples);
    return j.dump();
}

struct Request {
    std::uint64_t id = 0;
    Modality modality = Modality::visible;
    Image image;
};

inline Request decode_request(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
        throw MalformedResponse(std::string("request is not JSON: ") + e.what());
    }
    try {
        Request r;
        r.id = j.at("id").get<std::uint64_t>();
        r.modality = parse_modality(j.at("modality").get<std::string>());
        const auto w = j.at("width").get<std::size_t>(), h = j.at("height").get<std::size_t>(),
                   c = j.at("channels").get<std::size_t>();
        const auto bytes = base64_decode(j.at("pixels").get<std::string>());
        if (bytes.size() != w * h * c) throw MalformedResponse("pixel payload size mismatch");
        r.image = Image(h, w, c);
        for (std::size_t i = 0; i < bytes.size(); ++i) r.image.values()[i] = from_byte(bytes[i]);
        return r;
    } catch (const nlohmann::json::exception &e) {
        throw MalformedResponse(std::string("bad request: ") + e.what());
    } catch (const ParseError &e) {
        throw MalformedResponse(e.what());
    }
}

inline std::string encode_score_response(std::uint64_t id, double score) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["score"] = score;
    return j.dump();
}

inline std::string encode_error_response(std::int64_t id, std::string_view message) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["error"] = std::string(message);
    return j.dump();
}

/// Validates one response line against the outstanding request id.
inline double decode_response(std::string_view line, std::uint64_t expected_id) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &) {
        throw MalformedResponse("response is not JSON");
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_number_integer())
        throw MalformedResponse("response lacks an integer id");
    if (j["id"].is_number_unsigned() ? j["id"].get<std::uint64_t>() != expected_id
                                     : j["id"].get<std::int64_t>() != static_cast<std::int64_t>(expected_id))
        throw MalformedResponse("response id " + j["id"].dump() + " does not match request " +
                                std::to_string(expected_id));
    if (j.contains("error"))
        throw OracleUnavailable("detector backend reported: " +
                                (j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump()));
    if (!j.contains("score") || !j["score"].is_number()) throw MalformedResponse("response lacks a numeric score");
    return checked_score(j["score"].get<double>());
}

} // namespace wire

/// A bidirectional newline-delimited byte stream.
class LineTransport {
public:
    virtual ~LineTransport() = default;
    void write_line(std::string_view line) {
        std::string buf(line);
        buf.push_back('\n');
        write_all(buf);
    }

    /// Next line without its terminator; throws OracleUnavailable on timeout/EOF.
    std::string read_line(double timeout_seconds) {
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
        for (;;) {
            if (const auto pos = buffer_.find('\n'); pos != std::string::npos) {
                std::string line = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw OracleUnavailable("detector did not answer in time");
            pollfd pfd{read_fd(), POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (rc < 0 && errno == EINTR) continue;
            if (rc < 0) throw OracleUnavailable(std::string("poll failed: ") + std::strerror(errno));
            if (rc == 0) throw OracleUnavailable("detector did not answer in time");
            char chunk[4096];
            const ssize_t got = ::read(read_fd(), chunk, sizeof chunk);
            if (got < 0 && errno == EINTR) continue;
            if (got <= 0) throw OracleUnavailable("detector closed the connection");
            buffer_.append(chunk, static_cast<std::size_t>(got));
        }
    }

protected:
    virtual int read_fd() const = 0;
    virtual void write_all(std::string_view bytes) = 0;

    static void write_fd(int fd, std::string_view bytes, bool socket) {
        while (!bytes.empty()) {
            const ssize_t n = socket ? ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL)
                                     : ::write(fd, bytes.data(), bytes.size());
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) throw OracleUnavailable(std::string("write to detector failed: ") + std::strerror(errno));
            bytes.remove_prefix(static_cast<std::size_t>(n));
        }
    }

private:
    std::string buffer_;
};

class TcpTransport final : public LineTransport {
public:
    TcpTransport(const std::string &host, const std::string &port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo *res = nullptr;
        if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
            throw OracleUnavailable("cannot resolve " + host + ":" + port);
        for (addrinfo *ai = res; ai; ai = ai->ai_next) {
            fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd_ < 0) continue;
            if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
            ::close(fd_);
            fd_ = -1;
        }
        ::freeaddrinfo(res);
        if (fd_ < 0) throw OracleUnavailable("cannot connect to " + host + ":" + port);
    }
    ~TcpTransport() override {
        if (fd_ >= 0) ::close(fd_);
    }
    TcpTransport(const TcpTransport &) = delete;
    TcpTransport &operator=(const TcpTransport &) = delete;

protected:
    int read_fd() const override { return fd_; }
    void write_all(std::string_view bytes) override { write_fd(fd_, bytes, true); }

private:
    int fd_ = -1;
};

/// Spawns `/bin/sh -c command` and talks over its standard streams. SIGPIPE is
/// ignored process-wide so a dead backend surfaces as OracleUnavailable.
class ProcessTransport final : public LineTransport {
public:
    explicit ProcessTransport(const std::string &command) {
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2], from_child[2];
        if (::pipe2(to_child, O_CLOEXEC) != 0) throw OracleUnavailable("pipe failed");
        if (::pipe2(from_child, O_CLOEXEC) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw OracleUnavailable("pipe failed");
        }
        pid_ = ::fork();
        if (pid_ < 0) throw OracleUnavailable("fork failed");
        if (pid_ == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        in_ = to_child[1];
        out_ = from_child[0];
    }
    ~ProcessTransport() override {
        if (in_ >= 0) ::close(in_);
        if (out_ >= 0) ::close(out_);
        if (pid_ > 0) {
            int status = 0;
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(pid_, &status, WNOHANG) != 0) return;
                ::usleep(10000);
            }
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
        }
    }
    ProcessTransport(const ProcessTransport &) = delete;
    ProcessTransport &operator=(const ProcessTransport &) = delete;

protected:
    int read_fd() const override { return out_; }
    void write_all(std::string_view bytes) override { write_fd(in_, bytes, false); }

private:
    pid_t pid_ = -1;
    int in_ = -1;
    int out_ = -1;
};

/// "tcp:HOST:PORT" or "exec:COMMAND".
inline std::unique_ptr<LineTransport> open_transport(std::string_view descriptor) {
    if (descriptor.starts_with("tcp:")) {
        const std::string rest(descriptor.substr(4));
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos || colon == 0) throw ParseError("tcp endpoint must be tcp:HOST:PORT");
        return std::make_unique<TcpTransport>(rest.substr(0, colon), rest.substr(colon + 1));
    }
    if (descriptor.starts_with("exec:")) return std::make_unique<ProcessTransport>(std::string(descriptor.substr(5)));
    throw ParseError("unknown oracle endpoint '" + std::string(descriptor) + "' (use tcp:HOST:PORT or exec:COMMAND)");
}

inline constexpr double default_oracle_timeout = 30.0;

/// Client side of the line protocol. One request in flight per connection; ids
/// increase strictly from 1.
class ExternalDetector final : public Detector {
public:
    explicit ExternalDetector(std::unique_ptr<LineTransport> transport, double timeout_seconds = default_oracle_timeout)
        : transport_(std::move(transport)), timeout_(timeout_seconds) {}

    explicit ExternalDetector(std::string_view descriptor, double timeout_seconds = default_oracle_timeout)
        : ExternalDetector(open_transport(descriptor), timeout_seconds) {}

    double score(const Image &image, Modality modality) override {
        std::lock_guard lock(mutex_);
        const std::uint64_t id = ++last_id_;
        transport_->write_line(wire::encode_request(id, modality, image));
        return wire::decode_response(transport_->read_line(timeout_), id);
    }

    std::uint64_t last_id() const noexcept { return last_id_; }

private:
    std::unique_ptr<LineTransport> transport_;
    double timeout_;
    std::mutex mutex_;
    std::uint64_t last_id_ = 0;
};

} // namespace patchforge

#endif
