#include "twinarm/twinlink.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <thread>

#include "twinarm/errors.hpp"

namespace twinarm {

namespace {

constexpr char kMagic[4] = {'T', 'W', 'L', 'K'};

void put_u32le(std::vector<uint8_t>& v, uint32_t x) {
    for (int i = 0; i < 4; ++i) v.push_back(static_cast<uint8_t>(x >> (8 * i)));
}
void put_u64le(std::vector<uint8_t>& v, uint64_t x) {
    for (int i = 0; i < 8; ++i) v.push_back(static_cast<uint8_t>(x >> (8 * i)));
}
void put_f64le(std::vector<uint8_t>& v, double d) {
    uint64_t x;
    std::memcpy(&x, &d, 8);
    put_u64le(v, x);
}
uint32_t get_u32le(const uint8_t* p) {
    uint32_t x = 0;
    for (int i = 3; i >= 0; --i) x = (x << 8) | p[i];
    return x;
}
uint64_t get_u64le(const uint8_t* p) {
    uint64_t x = 0;
    for (int i = 7; i >= 0; --i) x = (x << 8) | p[i];
    return x;
}
double get_f64le(const uint8_t* p) {
    const uint64_t x = get_u64le(p);
    double d;
    std::memcpy(&d, &x, 8);
    return d;
}

size_t expected_payload(MsgType t) {
    switch (t) {
        case MsgType::JointState: return 56;
        case MsgType::Ack: return 12;
        case MsgType::Heartbeat:
        case MsgType::Hello: return 0;
    }
    return SIZE_MAX;
}

}  // namespace

uint64_t now_hybrid_ns() {
    using namespace std::chrono;
    static const uint64_t anchor = [] {
        const uint64_t sys = static_cast<uint64_t>(
            duration_cast<nanoseconds>(system_clock::now().time_since_epoch()).count());
        const uint64_t mono = static_cast<uint64_t>(
            duration_cast<nanoseconds>(steady_clock::now().time_since_epoch()).count());
        return sys - mono;
    }();
    return anchor + static_cast<uint64_t>(duration_cast<nanoseconds>(
                        steady_clock::now().time_since_epoch()).count());
}

std::vector<uint8_t> encode_frame(const TwinFrame& f) {
    const size_t plen = expected_payload(f.type);
    if (plen == SIZE_MAX) throw UsageError("encode_frame: unknown msg type");
    if (plen > kMaxPayloadBytes) throw UsageError("encode_frame: oversized payload");
    std::vector<uint8_t> v;
    v.reserve(4 + kFrameHeaderBytes + plen);
    // length prefix, big-endian
    v.push_back(static_cast<uint8_t>(plen >> 24));
    v.push_back(static_cast<uint8_t>(plen >> 16));
    v.push_back(static_cast<uint8_t>(plen >> 8));
    v.push_back(static_cast<uint8_t>(plen));
    v.insert(v.end(), kMagic, kMagic + 4);
    v.push_back(kTwinlinkVersion);
    v.push_back(static_cast<uint8_t>(f.type));
    put_u32le(v, f.seq);
    put_u64le(v, f.send_timestamp_ns);
    if (f.type == MsgType::JointState) {
        for (double d : f.joints) put_f64le(v, d);
    } else if (f.type == MsgType::Ack) {
        put_u32le(v, f.echoed_seq);
        put_u64le(v, f.echoed_timestamp_ns);
    }
    return v;
}

const char* decode_status_name(DecodeStatus s) {
    switch (s) {
        case DecodeStatus::Frame: return "Frame";
        case DecodeStatus::NeedMore: return "NeedMore";
        case DecodeStatus::BadMagic: return "BadMagic";
        case DecodeStatus::UnsupportedVersion: return "UnsupportedVersion";
        case DecodeStatus::LengthMismatch: return "LengthMismatch";
        case DecodeStatus::UnknownMsgType: return "UnknownMsgType";
    }
    return "?";
}

void FrameDecoder::feed(const uint8_t* data, size_t n) {
    // Compact consumed bytes before growing.
    if (pos_ > 0 && pos_ == buf_.size()) {
        buf_.clear();
        pos_ = 0;
    } else if (pos_ > 4096) {
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<ptrdiff_t>(pos_));
        pos_ = 0;
    }
    buf_.insert(buf_.end(), data, data + n);
}

DecodeResult FrameDecoder::next() {
    DecodeResult r;
    const size_t avail = buf_.size() - pos_;
    const size_t min_frame = 4 + kFrameHeaderBytes;
    if (avail < 4) {
        r.need_bytes = min_frame - avail;
        return r;
    }
    const uint8_t* p = buf_.data() + pos_;
    const uint32_t plen = (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
                          (uint32_t(p[2]) << 8) | uint32_t(p[3]);
    if (plen > kMaxPayloadBytes) {
        r.status = DecodeStatus::LengthMismatch;
        return r;
    }
    const size_t total = min_frame + plen;
    if (avail < min_frame) {
        r.need_bytes = total - avail;
        return r;
    }
    if (std::memcmp(p + 4, kMagic, 4) != 0) {
        r.status = DecodeStatus::BadMagic;
        return r;
    }
    if (p[8] != kTwinlinkVersion) {
        r.status = DecodeStatus::UnsupportedVersion;
        return r;
    }
    const uint8_t type = p[9];
    if (type < 1 || type > 4) {
        r.status = DecodeStatus::UnknownMsgType;
        return r;
    }
    if (plen != expected_payload(static_cast<MsgType>(type))) {
        r.status = DecodeStatus::LengthMismatch;
        return r;
    }
    if (avail < total) {
        r.need_bytes = total - avail;
        return r;
    }
    TwinFrame f;
    f.type = static_cast<MsgType>(type);
    f.seq = get_u32le(p + 10);
    f.send_timestamp_ns = get_u64le(p + 14);
    const uint8_t* payload = p + 22;
    if (f.type == MsgType::JointState) {
        for (int i = 0; i < 7; ++i) f.joints[i] = get_f64le(payload + 8 * i);
    } else if (f.type == MsgType::Ack) {
        f.echoed_seq = get_u32le(payload);
        f.echoed_timestamp_ns = get_u64le(payload + 4);
    }
    pos_ += total;
    r.status = DecodeStatus::Frame;
    r.frame = f;
    return r;
}

// ---------------------------------------------------------------------------
// TCP plumbing

namespace {

std::pair<std::string, int> split_host_port(const std::string& s) {
    const size_t colon = s.rfind(':');
    if (colon == std::string::npos) throw ConfigError("address must be host:port, got " + s);
    const std::string host = s.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad port in address " + s);
    }
    if (port < 0 || port > 65535) throw ConfigError("bad port in address " + s);
    return {host, port};
}

sockaddr_in make_addr(const std::string& host_port) {
    const auto [host, port] = split_host_port(host_port);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw ConfigError("bad IPv4 address: " + host);
    return addr;
}

}  // namespace

TcpStream::TcpStream(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpStream::~TcpStream() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpStream::connect(const std::string& host_port) {
    const sockaddr_in addr = make_addr(host_port);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw NetError("socket() failed");
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        const int err = errno;
        ::close(fd);
        throw NetError("connect to " + host_port + " failed: " + std::strerror(err));
    }
    return std::make_unique<TcpStream>(fd);
}

size_t TcpStream::read_some(uint8_t* buf, size_t n) {
    while (true) {
        const ssize_t r = ::recv(fd_, buf, n, 0);
        if (r >= 0) return static_cast<size_t>(r);
        if (errno == EINTR) continue;
        if (errno == ECONNRESET) return 0;
        throw NetError(std::string("recv failed: ") + std::strerror(errno));
    }
}

void TcpStream::write_all(const uint8_t* buf, size_t n) {
    size_t off = 0;
    while (off < n) {
        const ssize_t w = ::send(fd_, buf + off, n - off, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw NetError(std::string("send failed: ") + std::strerror(errno));
        }
        off += static_cast<size_t>(w);
    }
}

void TcpStream::shutdown_write() { ::shutdown(fd_, SHUT_WR); }

void TcpStream::abort() { ::shutdown(fd_, SHUT_RDWR); }

TcpListener::TcpListener(const std::string& host_port) {
    const sockaddr_in addr = make_addr(host_port);
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw NetError("socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        const int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw NetError("bind to " + host_port + " failed: " + std::strerror(err));
    }
    if (::listen(fd_, 1) != 0) {
        const int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw NetError(std::string("listen failed: ") + std::strerror(err));
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len) == 0)
        port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpListener::accept(double timeout_s) {
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(timeout_s * 1000));
    if (rc == 0) throw NetError("timed out waiting for a follower connection");
    if (rc < 0) throw NetError(std::string("poll failed: ") + std::strerror(errno));
    const int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) throw NetError(std::string("accept failed: ") + std::strerror(errno));
    return std::make_unique<TcpStream>(cfd);
}

// ---------------------------------------------------------------------------
// Latency accounting

void LatencyStats::add_rtt_ms(double rtt_ms) {
    if (ring_.size() < window_) {
        ring_.push_back(rtt_ms);
    } else {
        ring_[head_] = rtt_ms;
        head_ = (head_ + 1) % window_;
    }
    total_ += 1;
    if (rtt_ms * 0.5 > budget_ms_) violations_ += 1;
}

double LatencyStats::median_rtt_ms() const {
    if (ring_.empty()) return 0.0;
    std::vector<double> v = ring_;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double LatencyStats::one_way_estimate_ms() const { return 0.5 * median_rtt_ms(); }

nlohmann::json SessionSummary::to_json() const {
    return {{"frames_sent", frames_sent},
            {"acks_received", acks_received},
            {"one_way_estimate_ms", one_way_estimate_ms},
            {"median_rtt_ms", median_rtt_ms},
            {"latency_violations", latency_violations},
            {"budget_ms", budget_ms},
            {"error", error}};
}

nlohmann::json DivergenceReport::to_json() const {
    return {{"max_joint_delta_rad", max_joint_delta},
            {"max_end_effector_gap_m", max_end_effector_gap},
            {"frames_received", frames_received},
            {"frames_dropped", frames_dropped},
            {"out_of_order", out_of_order},
            {"clamped_values", clamped_values},
            {"error", error}};
}

// ---------------------------------------------------------------------------
// Publisher / follower

namespace {

// Reads until one frame is decoded, EOF, or a protocol error.
DecodeResult read_frame(Stream& s, FrameDecoder& dec, bool* eof) {
    *eof = false;
    while (true) {
        DecodeResult r = dec.next();
        if (r.status == DecodeStatus::Frame) return r;
        if (r.status != DecodeStatus::NeedMore) return r;
        uint8_t buf[4096];
        const size_t n = s.read_some(buf, sizeof(buf));
        if (n == 0) {
            *eof = true;
            return r;
        }
        dec.feed(buf, n);
    }
}

}  // namespace

SessionSummary publish(Stream& stream, const std::vector<std::array<double, 7>>& frames,
                       const PublishOptions& opt) {
    using namespace std::chrono;
    SessionSummary sum;
    sum.budget_ms = opt.budget_ms;

    FrameDecoder handshake_dec;
    bool eof = false;
    {
        // Wait for the follower's HELLO.
        const DecodeResult r = read_frame(stream, handshake_dec, &eof);
        if (eof) {
            sum.error = "connection closed before HELLO";
            return sum;
        }
        if (r.status != DecodeStatus::Frame) {
            sum.error = std::string("handshake protocol error: ") + decode_status_name(r.status);
            return sum;
        }
        if (r.frame.type != MsgType::Hello) {
            sum.error = "expected HELLO, got another message type";
            return sum;
        }
    }
    {
        TwinFrame hello;
        hello.type = MsgType::Hello;
        hello.seq = 0;
        hello.send_timestamp_ns = now_hybrid_ns();
        const auto bytes = encode_frame(hello);
        stream.write_all(bytes.data(), bytes.size());
    }

    LatencyStats stats(opt.budget_ms);
    std::atomic<uint64_t> acks{0};
    std::atomic<bool> reader_failed{false};
    std::string reader_error;

    // The reader continues on the handshake decoder so bytes that arrived
    // after the HELLO are not lost.
    std::thread reader([&] {
        try {
            while (true) {
                bool reof = false;
                const DecodeResult r = read_frame(stream, handshake_dec, &reof);
                if (reof) return;
                if (r.status != DecodeStatus::Frame) {
                    reader_error =
                        std::string("protocol error: ") + decode_status_name(r.status);
                    reader_failed = true;
                    return;
                }
                if (r.frame.type == MsgType::Ack) {
                    const double rtt_ms =
                        (now_hybrid_ns() - r.frame.echoed_timestamp_ns) / 1e6;
                    stats.add_rtt_ms(rtt_ms);
                    acks += 1;
                }
            }
        } catch (const std::exception& e) {
            reader_error = e.what();
            reader_failed = true;
        }
    });

    const auto t0 = steady_clock::now();
    const nanoseconds interval(static_cast<int64_t>(1e9 / opt.rate_hz));
    try {
        for (size_t k = 0; k < frames.size(); ++k) {
            std::this_thread::sleep_until(t0 + interval * k);
            if (reader_failed) break;
            TwinFrame f;
            f.type = MsgType::JointState;
            f.seq = static_cast<uint32_t>(k);
            f.send_timestamp_ns = now_hybrid_ns();
            f.joints = frames[k];
            const auto bytes = encode_frame(f);
            stream.write_all(bytes.data(), bytes.size());
            sum.frames_sent += 1;
        }
    } catch (const std::exception& e) {
        sum.error = e.what();  // follower disconnect; summary still emitted
    }
    stream.shutdown_write();

    // Give outstanding ACKs a grace period, then force the reader out.
    const auto deadline = steady_clock::now() + seconds(2);
    while (steady_clock::now() < deadline && !reader_failed &&
           acks.load() < sum.frames_sent)
        std::this_thread::sleep_for(milliseconds(2));
    stream.abort();
    reader.join();

    if (reader_failed && sum.error.empty()) sum.error = reader_error;
    sum.acks_received = acks.load();
    sum.one_way_estimate_ms = stats.one_way_estimate_ms();
    sum.median_rtt_ms = stats.median_rtt_ms();
    sum.latency_violations = stats.violations();
    return sum;
}

DivergenceReport follow(Stream& stream, const ArmModel& model) {
    DivergenceReport rep;
    {
        TwinFrame hello;
        hello.type = MsgType::Hello;
        hello.seq = 0;
        hello.send_timestamp_ns = now_hybrid_ns();
        const auto bytes = encode_frame(hello);
        stream.write_all(bytes.data(), bytes.size());
    }

    FrameDecoder dec;
    JointVector applied;
    int64_t last_seq = -1;
    uint32_t ack_seq = 0;

    while (true) {
        bool eof = false;
        const DecodeResult r = read_frame(stream, dec, &eof);
        if (eof) break;
        if (r.status != DecodeStatus::Frame) {
            rep.error = std::string("protocol error: ") + decode_status_name(r.status);
            break;
        }
        const TwinFrame& f = r.frame;
        if (f.type == MsgType::Hello || f.type == MsgType::Heartbeat) continue;
        if (f.type != MsgType::JointState) continue;

        rep.frames_received += 1;
        const int64_t seq = f.seq;
        if (seq <= last_seq) {
            rep.out_of_order += 1;
        } else {
            if (last_seq >= 0) rep.frames_dropped += static_cast<uint64_t>(seq - last_seq - 1);
            last_seq = seq;
        }

        JointVector received;
        for (int i = 0; i < 6; ++i) received.angles[i] = f.joints[i];
        received.gripper_aperture = f.joints[6];
        JointVector next = received;
        for (int i = 0; i < 6; ++i) {
            next.angles[i] = model.clamp_angle(i, next.angles[i]);
            if (next.angles[i] != received.angles[i]) rep.clamped_values += 1;
        }
        next.gripper_aperture = std::clamp(next.gripper_aperture, 0.0, model.max_aperture);
        if (next.gripper_aperture != received.gripper_aperture) rep.clamped_values += 1;
        applied = next;

        for (int i = 0; i < 6; ++i)
            rep.max_joint_delta[i] =
                std::max(rep.max_joint_delta[i], std::abs(received.angles[i] - applied.angles[i]));
        const FkResult fk_recv = forward_kinematics_unchecked(model, received);
        const FkResult fk_applied = forward_kinematics_unchecked(model, applied);
        rep.max_end_effector_gap = std::max(
            rep.max_end_effector_gap, distance(fk_recv.gripper_mid, fk_applied.gripper_mid));

        TwinFrame ack;
        ack.type = MsgType::Ack;
        ack.seq = ack_seq++;
        ack.send_timestamp_ns = now_hybrid_ns();
        ack.echoed_seq = f.seq;
        ack.echoed_timestamp_ns = f.send_timestamp_ns;
        const auto bytes = encode_frame(ack);
        stream.write_all(bytes.data(), bytes.size());
    }
    stream.shutdown_write();
    return rep;
}

}  // namespace twinarm
