#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mocaplink::mavlink {

enum class CodecErrc {
    bad_magic,
    short_frame,
    bad_length,
    bad_checksum,
    unknown_message_id,
    unsupported_flags,
    invariant_violation,
    message_id_overflow,
};

std::string_view to_string(CodecErrc code);

class CodecError : public std::runtime_error {
public:
    CodecError(CodecErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    CodecErrc code() const noexcept { return code_; }

private:
    CodecErrc code_;
};

// ---------------------------------------------------------------------------
// Checksums

/// CRC-16/MCRF4XX as used by MAVLink (X.25 polynomial, reflected, init 0xFFFF).
class X25Crc {
public:
    void accumulate(std::uint8_t byte) noexcept {
        std::uint8_t t = byte ^ static_cast<std::uint8_t>(crc_ & 0xFF);
        t = static_cast<std::uint8_t>(t ^ (t << 4));
        crc_ = static_cast<std::uint16_t>((crc_ >> 8) ^ (t << 8) ^ (t << 3) ^ (t >> 4));
    }
    void accumulate(std::span<const std::uint8_t> bytes) noexcept {
        for (auto b : bytes) accumulate(b);
    }
    void accumulate(std::string_view text) noexcept {
        for (char c : text) accumulate(static_cast<std::uint8_t>(c));
    }
    std::uint16_t value() const noexcept { return crc_; }

private:
    std::uint16_t crc_ = 0xFFFF;
};

std::uint16_t x25_crc(std::span<const std::uint8_t> bytes) noexcept;
std::uint16_t x25_crc(std::string_view text) noexcept;

enum class BaseType { u8, i8, u16, i16, u32, i32, u64, i64, f32, f64, character };

std::size_t type_size(BaseType type);
std::string_view type_name(BaseType type);

struct FieldDef {
    BaseType type;
    std::string name;
    std::uint8_t array_length = 0;  ///< 0 for scalars
};

/// A message definition in declaration (XML) order, base fields only.
struct MessageDefinition {
    std::string name;
    std::uint32_t id;
    std::vector<FieldDef> fields;
};

/// Fields sorted into wire order: by base-type size descending, stable.
std::vector<FieldDef> wire_order(const std::vector<FieldDef>& fields);

/// 8-bit seed hashed from a message definition; mixed into every frame CRC.
std::uint8_t crc_extra(const MessageDefinition& def);

// ---------------------------------------------------------------------------
// Messages

struct HilGps {
    static constexpr std::uint32_t id = 113;
    static constexpr std::size_t payload_length = 36;
    static constexpr std::uint16_t unknown_cog = 65535;
    static constexpr std::uint16_t unknown_vel = 65535;
    static constexpr std::uint8_t unknown_satellites = 255;

    std::uint64_t time_usec = 0;
    std::int32_t lat = 0;  ///< degE7
    std::int32_t lon = 0;  ///< degE7
    std::int32_t alt = 0;  ///< mm above ellipsoid
    std::uint16_t eph = 0;
    std::uint16_t epv = 0;
    std::uint16_t vel = 0;  ///< cm/s
    std::int16_t vn = 0;    ///< cm/s
    std::int16_t ve = 0;
    std::int16_t vd = 0;
    std::uint16_t cog = 0;  ///< cdeg
    std::uint8_t fix_type = 0;
    std::uint8_t satellites_visible = 0;

    friend bool operator==(const HilGps&, const HilGps&) = default;
};

struct LocalPositionNed {
    static constexpr std::uint32_t id = 32;
    static constexpr std::size_t payload_length = 28;

    std::uint32_t time_boot_ms = 0;
    float x = 0, y = 0, z = 0;
    float vx = 0, vy = 0, vz = 0;

    friend bool operator==(const LocalPositionNed&, const LocalPositionNed&) = default;
};

struct AttPosMocap {
    static constexpr std::uint32_t id = 138;
    static constexpr std::size_t payload_length = 36;

    std::uint64_t time_usec = 0;
    std::array<float, 4> q{1.0f, 0.0f, 0.0f, 0.0f};  ///< w, x, y, z
    float x = 0, y = 0, z = 0;

    friend bool operator==(const AttPosMocap&, const AttPosMocap&) = default;
};

using Message = std::variant<HilGps, LocalPositionNed, AttPosMocap>;

enum class MessageType { hil_gps, local_position_ned, att_pos_mocap };

std::string_view to_string(MessageType type);
MessageType message_type_from_string(std::string_view name);  ///< throws std::invalid_argument
MessageType message_type(const Message& message);
std::uint32_t message_id(MessageType type);

const MessageDefinition& definition(MessageType type);

// Seeds produced by crc_extra() over the definitions above and confirmed
// against the reference generator's constants.
inline constexpr std::uint8_t kHilGpsCrcExtra = 124;
inline constexpr std::uint8_t kLocalPositionNedCrcExtra = 185;
inline constexpr std::uint8_t kAttPosMocapCrcExtra = 109;

std::uint8_t pinned_crc_extra(MessageType type);

/// Throws CodecError(invariant_violation) if the message is not sendable.
void validate(const Message& message);

/// Full, untruncated little-endian payload.
std::vector<std::uint8_t> pack_payload(const Message& message);

/// Inverse of pack_payload. Shorter input is zero-extended; longer input
/// (extension fields) is ignored.
Message unpack_payload(MessageType type, std::span<const std::uint8_t> payload);

// ---------------------------------------------------------------------------
// Framing

struct FrameHeader {
    std::uint8_t protocol_version = 2;  ///< 1 or 2
    std::uint8_t sequence = 0;
    std::uint8_t system_id = 1;
    std::uint8_t component_id = 1;
    std::uint32_t message_id = 0;  ///< 24 bits on v2, 8 bits on v1

    friend bool operator==(const FrameHeader&, const FrameHeader&) = default;
};

inline constexpr std::uint8_t kMagicV1 = 0xFE;
inline constexpr std::uint8_t kMagicV2 = 0xFD;
inline constexpr std::size_t kHeaderLengthV1 = 6;
inline constexpr std::size_t kHeaderLengthV2 = 10;
inline constexpr std::size_t kChecksumLength = 2;

std::vector<std::uint8_t> encode_frame(const FrameHeader& header, const Message& message, std::uint8_t crc_seed);

struct DecodedFrame {
    FrameHeader header;
    Message message;
    std::size_t frame_length;  ///< bytes consumed from the input
};

DecodedFrame decode_frame(std::span<const std::uint8_t> bytes);

/// Owns one outbound stream's sequence counter.
class FrameEncoder {
public:
    FrameEncoder(std::uint8_t system_id, std::uint8_t component_id, std::uint8_t protocol_version = 2);

    std::vector<std::uint8_t> encode(const Message& message);

    std::uint8_t next_sequence() const { return sequence_; }
    std::uint8_t protocol_version() const { return protocol_version_; }
    void set_identity(std::uint8_t system_id, std::uint8_t component_id, std::uint8_t protocol_version);

private:
    std::uint8_t system_id_;
    std::uint8_t component_id_;
    std::uint8_t protocol_version_;
    std::uint8_t sequence_ = 0;
};

// ---------------------------------------------------------------------------
// Field access by name (for the CLI and test fixtures)

class FieldParseError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

Message default_message(MessageType type);

/// Sets one field from text. Array elements are addressed as "q[2]" or set
/// together as a comma list. Throws FieldParseError for an unknown name or
/// a value that does not parse or does not fit the field's type.
void set_field(Message& message, std::string_view name, std::string_view value);

/// Builds a message from "name=value" assignments over default_message and
/// validates it; invariant violations are reported as FieldParseError.
Message parse_message_fields(MessageType type, const std::vector<std::string>& assignments);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);  ///< throws std::invalid_argument

}  // namespace mocaplink::mavlink
