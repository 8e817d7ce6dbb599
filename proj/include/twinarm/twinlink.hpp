#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "twinarm/kinematics.hpp"

namespace twinarm {

// Wire format, little-endian except the length prefix:
//   u32 BE   payload length
//   4 bytes  magic "TWLK"
//   u8       version (1)
//   u8       msg type
//   u32 LE   seq (strictly increasing per connection per msg type)
//   u64 LE   send timestamp, nanoseconds (sender's monotonic-epoch hybrid)
//   payload  JOINT_STATE: 7 x f64 LE (six joint angles + gripper aperture)
//            ACK: echoed seq u32 LE + echoed timestamp u64 LE
//            HEARTBEAT / HELLO: empty
inline constexpr uint8_t kTwinlinkVersion = 1;
inline constexpr size_t kFrameHeaderBytes = 18;  // after the length prefix
inline constexpr size_t kMaxPayloadBytes = 1 << 16;

enum class MsgType : uint8_t { JointState = 1, Heartbeat = 2, Ack = 3, Hello = 4 };

struct TwinFrame {
    MsgType type = MsgType::Heartbeat;
    uint32_t seq = 0;
    uint64_t send_timestamp_ns = 0;
    std::array<double, 7> joints{};  // JointState
    uint32_t echoed_seq = 0;         // Ack
    uint64_t echoed_timestamp_ns = 0;

    bool operator==(const TwinFrame&) const = default;
};

// Sender clock: system-epoch anchor plus steady deltas, so timestamps are
// monotone. Only ever compared against the same process's clock.
uint64_t now_hybrid_ns();

std::vector<uint8_t> encode_frame(const TwinFrame& f);

enum class DecodeStatus {
    Frame,
    NeedMore,
    BadMagic,
    UnsupportedVersion,
    LengthMismatch,
    UnknownMsgType,
};

const char* decode_status_name(DecodeStatus s);

struct DecodeResult {
    DecodeStatus status = DecodeStatus::NeedMore;
    TwinFrame frame;
    size_t need_bytes = 0;  // NeedMore: bytes missing to finish the frame
};

// Incremental parser. Malformed input is reported without consuming, so a
// caller treating errors as connection-fatal never resynchronizes mid-frame.
class FrameDecoder {
  public:
    void feed(const uint8_t* data, size_t n);
    DecodeResult next();

  private:
    std::vector<uint8_t> buf_;
    size_t pos_ = 0;
};

// Minimal blocking byte stream so the protocol logic can run over TCP or an
// in-process pipe (tests use a delayed pipe for latency calibration).
class Stream {
  public:
    virtual ~Stream() = default;
    virtual size_t read_some(uint8_t* buf, size_t n) = 0;  // 0 = EOF
    virtual void write_all(const uint8_t* buf, size_t n) = 0;
    virtual void shutdown_write() = 0;
    virtual void abort() = 0;  // unblock any reader
};

class TcpStream : public Stream {
  public:
    explicit TcpStream(int fd);
    ~TcpStream() override;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    static std::unique_ptr<TcpStream> connect(const std::string& host_port);

    size_t read_some(uint8_t* buf, size_t n) override;
    void write_all(const uint8_t* buf, size_t n) override;
    void shutdown_write() override;
    void abort() override;

  private:
    int fd_;
};

class TcpListener {
  public:
    explicit TcpListener(const std::string& host_port);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    // Throws NetError on timeout.
    std::unique_ptr<TcpStream> accept(double timeout_s);
    int port() const { return port_; }

  private:
    int fd_;
    int port_ = 0;
};

// Sliding window of acknowledged round-trip times. The one-way estimate is
// half the window median; each sample above budget counts one violation.
class LatencyStats {
  public:
    explicit LatencyStats(double budget_ms = 20.0, size_t window = 64)
        : budget_ms_(budget_ms), window_(window) {}

    void add_rtt_ms(double rtt_ms);
    double one_way_estimate_ms() const;  // 0 with no samples
    double median_rtt_ms() const;
    uint64_t violations() const { return violations_; }
    size_t samples() const { return total_; }
    double budget_ms() const { return budget_ms_; }

  private:
    double budget_ms_;
    size_t window_;
    std::vector<double> ring_;
    size_t head_ = 0, total_ = 0;
    uint64_t violations_ = 0;
};

struct SessionSummary {
    uint64_t frames_sent = 0;
    uint64_t acks_received = 0;
    double one_way_estimate_ms = 0;
    double median_rtt_ms = 0;
    uint64_t latency_violations = 0;
    double budget_ms = 0;
    std::string error;  // empty on a clean session

    nlohmann::json to_json() const;
};

struct DivergenceReport {
    std::array<double, 6> max_joint_delta{};  // received vs applied, radians
    double max_end_effector_gap = 0;          // meters
    uint64_t frames_received = 0;
    uint64_t frames_dropped = 0;  // from seq gaps
    uint64_t out_of_order = 0;    // reported, never reordered
    uint64_t clamped_values = 0;  // joint or aperture clamps on apply
    std::string error;

    nlohmann::json to_json() const;
};

struct PublishOptions {
    double rate_hz = 50.0;
    double budget_ms = 20.0;
    double handshake_timeout_s = 10.0;
};

// Streams joint states over an accepted connection after a HELLO handshake,
// reading ACKs concurrently into LatencyStats.
SessionSummary publish(Stream& stream, const std::vector<std::array<double, 7>>& frames,
                       const PublishOptions& opt);

// Applies each received joint state to the replica model (clamping to its
// limits), ACKs every frame, and accounts for sequence gaps.
DivergenceReport follow(Stream& stream, const ArmModel& model);

}  // namespace twinarm
