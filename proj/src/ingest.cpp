#include "mocaplink/ingest.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>

#include <spdlog/spdlog.h>

namespace mocaplink::ingest {

std::string_view to_string(IngestErrc code) {
    switch (code) {
    case IngestErrc::malformed_record: return "MalformedRecord";
    case IngestErrc::non_unit_quaternion: return "NonUnitQuaternion";
    case IngestErrc::negative_time: return "NegativeTime";
    case IngestErrc::corrupt_log: return "CorruptLog";
    case IngestErrc::clock_skew: return "ClockSkew";
    case IngestErrc::io_error: return "IoError";
    }
    return "Unknown";
}

namespace {

[[noreturn]] void malformed(const std::string& why) { throw IngestError(IngestErrc::malformed_record, why); }

std::vector<std::string_view> tokenize(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size()) break;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_double(std::string_view token, const char* field) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
        malformed(std::string("field '") + field + "' is not a finite number: '" + std::string(token) + "'");
    }
    return value;
}

std::uint64_t parse_u64(std::string_view token, const char* field) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        malformed(std::string("field '") + field + "' is not an unsigned integer: '" + std::string(token) + "'");
    }
    return value;
}

void append_double(std::string& out, double v) {
    std::array<char, 32> buf;
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), ptr);
}

}  // namespace

RigidBodySample parse_ingest_record(std::string_view record) {
    const auto tokens = tokenize(record);
    if (tokens.empty() || tokens[0] != kRecordMagic) {
        malformed("record does not start with " + std::string(kRecordMagic));
    }
    if (tokens.size() != 12) {
        malformed("expected 12 fields, got " + std::to_string(tokens.size()));
    }
    RigidBodySample s;
    s.frame_number = parse_u64(tokens[1], "frame_number");
    s.capture_time = parse_double(tokens[2], "capture_time");
    s.object_name = std::string(tokens[3]);
    s.position_mm = {parse_double(tokens[4], "x_mm"), parse_double(tokens[5], "y_mm"), parse_double(tokens[6], "z_mm")};
    Quaternion q{parse_double(tokens[7], "qw"), parse_double(tokens[8], "qx"), parse_double(tokens[9], "qy"),
                 parse_double(tokens[10], "qz")};
    if (tokens[11] == "1") {
        s.occluded = true;
    } else if (tokens[11] != "0") {
        malformed("occluded flag must be 0 or 1");
    }
    if (s.capture_time < 0.0) {
        throw IngestError(IngestErrc::negative_time, "capture_time is negative");
    }
    const double n = q.norm();
    if (std::abs(n - 1.0) > kQuaternionTolerance) {
        if (!s.occluded) {
            throw IngestError(IngestErrc::non_unit_quaternion,
                              "quaternion norm " + std::to_string(n) + " deviates from 1 by more than 1e-3");
        }
        // Occluded frames often carry a zeroed attitude; it is never used.
        q = Quaternion{};
    } else if (std::abs(n - 1.0) > 1e-12) {
        q = q.normalized();
    }
    s.orientation = q;
    return s;
}

std::string format_ingest_record(const RigidBodySample& s) {
    std::string out(kRecordMagic);
    out += ' ';
    out += std::to_string(s.frame_number);
    for (double v : {s.capture_time}) {
        out += ' ';
        append_double(out, v);
    }
    out += ' ';
    out += s.object_name;
    for (double v : {s.position_mm[0], s.position_mm[1], s.position_mm[2], s.orientation.w, s.orientation.x,
                     s.orientation.y, s.orientation.z}) {
        out += ' ';
        append_double(out, v);
    }
    out += s.occluded ? " 1" : " 0";
    return out;
}

std::vector<std::string_view> split_records(std::string_view datagram) {
    std::vector<std::string_view> out;
    while (!datagram.empty()) {
        const auto nl = datagram.find('\n');
        std::string_view line = datagram.substr(0, nl);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) out.push_back(line);
        if (nl == std::string_view::npos) break;
        datagram.remove_prefix(nl + 1);
    }
    return out;
}

// ---------------------------------------------------------------------------

UdpIngestSource::UdpIngestSource(const std::string& bind_host, std::uint16_t port) : port_(port), host_(bind_host) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) {
        throw IngestError(IngestErrc::io_error, std::string("socket: ") + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw IngestError(IngestErrc::io_error, "invalid ingest bind address '" + bind_host + "'");
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        const std::string err = std::strerror(errno);
        ::close(fd_);
        throw IngestError(IngestErrc::io_error, "bind " + bind_host + ":" + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

UdpIngestSource::~UdpIngestSource() {
    if (fd_ >= 0) ::close(fd_);
}

std::string UdpIngestSource::describe() const { return "udp-ingest " + host_ + ":" + std::to_string(port_); }

std::optional<RigidBodySample> UdpIngestSource::next(std::stop_token stop) {
    std::array<char, 65536> buf;
    while (!stop.stop_requested()) {
        if (pending_pos_ < pending_.size()) {
            return std::move(pending_[pending_pos_++]);
        }
        pending_.clear();
        pending_pos_ = 0;

        pollfd pfd{fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, 50);
        if (ready <= 0) continue;
        const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
        if (n <= 0) continue;
        for (auto record : split_records({buf.data(), static_cast<std::size_t>(n)})) {
            try {
                pending_.push_back(parse_ingest_record(record));
            } catch (const IngestError& e) {
                ++rejected_;
                spdlog::warn("ingest: dropped record ({}): {}", to_string(e.code()), e.what());
            }
        }
    }
    return std::nullopt;
}

}  // namespace mocaplink::ingest
