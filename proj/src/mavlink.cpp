#include "mocaplink/mavlink.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>

namespace mocaplink::mavlink {

std::string_view to_string(CodecErrc code) {
    switch (code) {
    case CodecErrc::bad_magic: return "BadMagic";
    case CodecErrc::short_frame: return "ShortFrame";
    case CodecErrc::bad_length: return "BadLength";
    case CodecErrc::bad_checksum: return "BadChecksum";
    case CodecErrc::unknown_message_id: return "UnknownMessageId";
    case CodecErrc::unsupported_flags: return "UnsupportedFlags";
    case CodecErrc::invariant_violation: return "InvariantViolation";
    case CodecErrc::message_id_overflow: return "MessageIdOverflow";
    }
    return "Unknown";
}

std::uint16_t x25_crc(std::span<const std::uint8_t> bytes) noexcept {
    X25Crc crc;
    crc.accumulate(bytes);
    return crc.value();
}

std::uint16_t x25_crc(std::string_view text) noexcept {
    X25Crc crc;
    crc.accumulate(text);
    return crc.value();
}

std::size_t type_size(BaseType type) {
    switch (type) {
    case BaseType::u8:
    case BaseType::i8:
    case BaseType::character: return 1;
    case BaseType::u16:
    case BaseType::i16: return 2;
    case BaseType::u32:
    case BaseType::i32:
    case BaseType::f32: return 4;
    case BaseType::u64:
    case BaseType::i64:
    case BaseType::f64: return 8;
    }
    return 0;
}

std::string_view type_name(BaseType type) {
    switch (type) {
    case BaseType::u8: return "uint8_t";
    case BaseType::i8: return "int8_t";
    case BaseType::u16: return "uint16_t";
    case BaseType::i16: return "int16_t";
    case BaseType::u32: return "uint32_t";
    case BaseType::i32: return "int32_t";
    case BaseType::u64: return "uint64_t";
    case BaseType::i64: return "int64_t";
    case BaseType::f32: return "float";
    case BaseType::f64: return "double";
    case BaseType::character: return "char";
    }
    return "";
}

std::vector<FieldDef> wire_order(const std::vector<FieldDef>& fields) {
    std::vector<FieldDef> sorted = fields;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const FieldDef& a, const FieldDef& b) { return type_size(a.type) > type_size(b.type); });
    return sorted;
}

std::uint8_t crc_extra(const MessageDefinition& def) {
    X25Crc crc;
    crc.accumulate(def.name);
    crc.accumulate(" ");
    for (const auto& field : wire_order(def.fields)) {
        crc.accumulate(type_name(field.type));
        crc.accumulate(" ");
        crc.accumulate(field.name);
        crc.accumulate(" ");
        if (field.array_length > 0) {
            crc.accumulate(field.array_length);
        }
    }
    const std::uint16_t v = crc.value();
    return static_cast<std::uint8_t>((v & 0xFF) ^ (v >> 8));
}

// ---------------------------------------------------------------------------

std::string_view to_string(MessageType type) {
    switch (type) {
    case MessageType::hil_gps: return "HIL_GPS";
    case MessageType::local_position_ned: return "LOCAL_POSITION_NED";
    case MessageType::att_pos_mocap: return "ATT_POS_MOCAP";
    }
    return "";
}

MessageType message_type_from_string(std::string_view name) {
    for (auto t : {MessageType::hil_gps, MessageType::local_position_ned, MessageType::att_pos_mocap}) {
        if (to_string(t) == name) return t;
    }
    throw std::invalid_argument("unknown message type '" + std::string(name) + "'");
}

MessageType message_type(const Message& message) {
    return static_cast<MessageType>(message.index());
}

std::uint32_t message_id(MessageType type) {
    switch (type) {
    case MessageType::hil_gps: return HilGps::id;
    case MessageType::local_position_ned: return LocalPositionNed::id;
    case MessageType::att_pos_mocap: return AttPosMocap::id;
    }
    return 0;
}

const MessageDefinition& definition(MessageType type) {
    using enum BaseType;
    static const MessageDefinition hil_gps{"HIL_GPS",
                                           HilGps::id,
                                           {{u64, "time_usec"},
                                            {u8, "fix_type"},
                                            {i32, "lat"},
                                            {i32, "lon"},
                                            {i32, "alt"},
                                            {u16, "eph"},
                                            {u16, "epv"},
                                            {u16, "vel"},
                                            {i16, "vn"},
                                            {i16, "ve"},
                                            {i16, "vd"},
                                            {u16, "cog"},
                                            {u8, "satellites_visible"}}};
    static const MessageDefinition local_position_ned{
        "LOCAL_POSITION_NED",
        LocalPositionNed::id,
        {{u32, "time_boot_ms"}, {f32, "x"}, {f32, "y"}, {f32, "z"}, {f32, "vx"}, {f32, "vy"}, {f32, "vz"}}};
    static const MessageDefinition att_pos_mocap{
        "ATT_POS_MOCAP", AttPosMocap::id, {{u64, "time_usec"}, {f32, "q", 4}, {f32, "x"}, {f32, "y"}, {f32, "z"}}};
    switch (type) {
    case MessageType::hil_gps: return hil_gps;
    case MessageType::local_position_ned: return local_position_ned;
    case MessageType::att_pos_mocap: return att_pos_mocap;
    }
    throw std::invalid_argument("bad message type");
}

std::uint8_t pinned_crc_extra(MessageType type) {
    switch (type) {
    case MessageType::hil_gps: return kHilGpsCrcExtra;
    case MessageType::local_position_ned: return kLocalPositionNedCrcExtra;
    case MessageType::att_pos_mocap: return kAttPosMocapCrcExtra;
    }
    return 0;
}

namespace {

std::size_t payload_length(MessageType type) {
    switch (type) {
    case MessageType::hil_gps: return HilGps::payload_length;
    case MessageType::local_position_ned: return LocalPositionNed::payload_length;
    case MessageType::att_pos_mocap: return AttPosMocap::payload_length;
    }
    return 0;
}

std::optional<MessageType> type_for_id(std::uint32_t id) {
    switch (id) {
    case HilGps::id: return MessageType::hil_gps;
    case LocalPositionNed::id: return MessageType::local_position_ned;
    case AttPosMocap::id: return MessageType::att_pos_mocap;
    default: return std::nullopt;
    }
}

class Writer {
public:
    explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

    template <typename T>
    void put(T value) {
        if constexpr (std::is_floating_point_v<T>) {
            put(std::bit_cast<std::uint32_t>(value));
        } else {
            using U = std::make_unsigned_t<T>;
            auto u = static_cast<U>(value);
            for (std::size_t i = 0; i < sizeof(T); ++i) {
                out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
            }
        }
    }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        if constexpr (std::is_floating_point_v<T>) {
            return std::bit_cast<float>(get<std::uint32_t>());
        } else {
            using U = std::make_unsigned_t<T>;
            U u = 0;
            for (std::size_t i = 0; i < sizeof(T); ++i) {
                u = static_cast<U>(u | (static_cast<U>(bytes_[pos_ + i]) << (8 * i)));
            }
            pos_ += sizeof(T);
            return static_cast<T>(u);
        }
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void require(bool ok, const char* what) {
    if (!ok) throw CodecError(CodecErrc::invariant_violation, what);
}

}  // namespace

void validate(const Message& message) {
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, HilGps>) {
                require(m.cog <= 35999 || m.cog == HilGps::unknown_cog, "HIL_GPS cog out of range");
                require(m.fix_type <= 3, "HIL_GPS fix_type out of range");
            } else if constexpr (std::is_same_v<T, LocalPositionNed>) {
                for (float v : {m.x, m.y, m.z, m.vx, m.vy, m.vz}) {
                    require(std::isfinite(v), "LOCAL_POSITION_NED field not finite");
                }
            } else {
                for (float v : {m.x, m.y, m.z, m.q[0], m.q[1], m.q[2], m.q[3]}) {
                    require(std::isfinite(v), "ATT_POS_MOCAP field not finite");
                }
                double n = 0.0;
                for (float c : m.q) n += double(c) * double(c);
                require(std::abs(std::sqrt(n) - 1.0) <= 1e-3, "ATT_POS_MOCAP quaternion not unit");
            }
        },
        message);
}

std::vector<std::uint8_t> pack_payload(const Message& message) {
    validate(message);
    return std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            Writer w(T::payload_length);
            if constexpr (std::is_same_v<T, HilGps>) {
                w.put(m.time_usec);
                w.put(m.lat);
                w.put(m.lon);
                w.put(m.alt);
                w.put(m.eph);
                w.put(m.epv);
                w.put(m.vel);
                w.put(m.vn);
                w.put(m.ve);
                w.put(m.vd);
                w.put(m.cog);
                w.put(m.fix_type);
                w.put(m.satellites_visible);
            } else if constexpr (std::is_same_v<T, LocalPositionNed>) {
                w.put(m.time_boot_ms);
                for (float v : {m.x, m.y, m.z, m.vx, m.vy, m.vz}) w.put(v);
            } else {
                w.put(m.time_usec);
                for (float v : m.q) w.put(v);
                for (float v : {m.x, m.y, m.z}) w.put(v);
            }
            return w.take();
        },
        message);
}

Message unpack_payload(MessageType type, std::span<const std::uint8_t> payload) {
    std::array<std::uint8_t, 64> full{};
    const std::size_t length = payload_length(type);
    std::copy_n(payload.begin(), std::min(payload.size(), length), full.begin());
    Reader r({full.data(), length});
    switch (type) {
    case MessageType::hil_gps: {
        HilGps m;
        m.time_usec = r.get<std::uint64_t>();
        m.lat = r.get<std::int32_t>();
        m.lon = r.get<std::int32_t>();
        m.alt = r.get<std::int32_t>();
        m.eph = r.get<std::uint16_t>();
        m.epv = r.get<std::uint16_t>();
        m.vel = r.get<std::uint16_t>();
        m.vn = r.get<std::int16_t>();
        m.ve = r.get<std::int16_t>();
        m.vd = r.get<std::int16_t>();
        m.cog = r.get<std::uint16_t>();
        m.fix_type = r.get<std::uint8_t>();
        m.satellites_visible = r.get<std::uint8_t>();
        return m;
    }
    case MessageType::local_position_ned: {
        LocalPositionNed m;
        m.time_boot_ms = r.get<std::uint32_t>();
        m.x = r.get<float>();
        m.y = r.get<float>();
        m.z = r.get<float>();
        m.vx = r.get<float>();
        m.vy = r.get<float>();
        m.vz = r.get<float>();
        return m;
    }
    case MessageType::att_pos_mocap: {
        AttPosMocap m;
        m.time_usec = r.get<std::uint64_t>();
        for (auto& c : m.q) c = r.get<float>();
        m.x = r.get<float>();
        m.y = r.get<float>();
        m.z = r.get<float>();
        return m;
    }
    }
    throw std::invalid_argument("bad message type");
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_frame(const FrameHeader& header, const Message& message, std::uint8_t crc_seed) {
    const MessageType type = message_type(message);
    if (header.message_id != message_id(type)) {
        throw CodecError(CodecErrc::invariant_violation, "header message_id does not match message type");
    }
    std::vector<std::uint8_t> payload = pack_payload(message);

    std::vector<std::uint8_t> frame;
    if (header.protocol_version == 1) {
        if (header.message_id > 0xFF) {
            throw CodecError(CodecErrc::message_id_overflow, "message id does not fit a v1 frame");
        }
        frame.reserve(kHeaderLengthV1 + payload.size() + kChecksumLength);
        frame.push_back(kMagicV1);
        frame.push_back(static_cast<std::uint8_t>(payload.size()));
        frame.push_back(header.sequence);
        frame.push_back(header.system_id);
        frame.push_back(header.component_id);
        frame.push_back(static_cast<std::uint8_t>(header.message_id));
    } else if (header.protocol_version == 2) {
        while (payload.size() > 1 && payload.back() == 0) {
            payload.pop_back();
        }
        frame.reserve(kHeaderLengthV2 + payload.size() + kChecksumLength);
        frame.push_back(kMagicV2);
        frame.push_back(static_cast<std::uint8_t>(payload.size()));
        frame.push_back(0);  // incompat_flags
        frame.push_back(0);  // compat_flags
        frame.push_back(header.sequence);
        frame.push_back(header.system_id);
        frame.push_back(header.component_id);
        frame.push_back(static_cast<std::uint8_t>(header.message_id));
        frame.push_back(static_cast<std::uint8_t>(header.message_id >> 8));
        frame.push_back(static_cast<std::uint8_t>(header.message_id >> 16));
    } else {
        throw CodecError(CodecErrc::invariant_violation, "protocol_version must be 1 or 2");
    }
    frame.insert(frame.end(), payload.begin(), payload.end());

    X25Crc crc;
    crc.accumulate(std::span(frame).subspan(1));
    crc.accumulate(crc_seed);
    frame.push_back(static_cast<std::uint8_t>(crc.value() & 0xFF));
    frame.push_back(static_cast<std::uint8_t>(crc.value() >> 8));
    return frame;
}

DecodedFrame decode_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        throw CodecError(CodecErrc::short_frame, "empty buffer");
    }
    FrameHeader header;
    std::size_t header_length = 0;
    if (bytes[0] == kMagicV1) {
        header.protocol_version = 1;
        header_length = kHeaderLengthV1;
    } else if (bytes[0] == kMagicV2) {
        header.protocol_version = 2;
        header_length = kHeaderLengthV2;
    } else {
        throw CodecError(CodecErrc::bad_magic, "bad start byte");
    }
    if (bytes.size() < header_length) {
        throw CodecError(CodecErrc::short_frame, "buffer shorter than frame header");
    }
    const std::size_t length = bytes[1];
    const std::size_t frame_length = header_length + length + kChecksumLength;
    if (bytes.size() < frame_length) {
        throw CodecError(CodecErrc::short_frame, "buffer shorter than declared frame");
    }
    if (header.protocol_version == 1) {
        header.sequence = bytes[2];
        header.system_id = bytes[3];
        header.component_id = bytes[4];
        header.message_id = bytes[5];
    } else {
        if (bytes[2] != 0) {
            throw CodecError(CodecErrc::unsupported_flags, "incompat_flags set (signing is not supported)");
        }
        header.sequence = bytes[4];
        header.system_id = bytes[5];
        header.component_id = bytes[6];
        header.message_id = std::uint32_t{bytes[7]} | (std::uint32_t{bytes[8]} << 8) | (std::uint32_t{bytes[9]} << 16);
    }

    const auto type = type_for_id(header.message_id);
    if (!type) {
        throw CodecError(CodecErrc::unknown_message_id, "unsupported message id " + std::to_string(header.message_id));
    }
    const std::size_t full_length = payload_length(*type);
    if (header.protocol_version == 1 ? length != full_length : length == 0) {
        throw CodecError(CodecErrc::bad_length, "payload length " + std::to_string(length) + " invalid for " +
                                                    std::string(to_string(*type)));
    }

    X25Crc crc;
    crc.accumulate(bytes.subspan(1, header_length - 1 + length));
    crc.accumulate(pinned_crc_extra(*type));
    const std::uint16_t wire = static_cast<std::uint16_t>(bytes[header_length + length] |
                                                          (bytes[header_length + length + 1] << 8));
    if (wire != crc.value()) {
        throw CodecError(CodecErrc::bad_checksum, "checksum mismatch");
    }
    return {header, unpack_payload(*type, bytes.subspan(header_length, length)), frame_length};
}

// ---------------------------------------------------------------------------

FrameEncoder::FrameEncoder(std::uint8_t system_id, std::uint8_t component_id, std::uint8_t protocol_version)
    : system_id_(system_id), component_id_(component_id), protocol_version_(protocol_version) {}

void FrameEncoder::set_identity(std::uint8_t system_id, std::uint8_t component_id, std::uint8_t protocol_version) {
    system_id_ = system_id;
    component_id_ = component_id;
    protocol_version_ = protocol_version;
}

std::vector<std::uint8_t> FrameEncoder::encode(const Message& message) {
    const MessageType type = message_type(message);
    FrameHeader header{protocol_version_, sequence_, system_id_, component_id_, message_id(type)};
    auto frame = encode_frame(header, message, pinned_crc_extra(type));
    ++sequence_;
    return frame;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument("invalid hex digit");
    };
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
    }
    return out;
}

}  // namespace mocaplink::mavlink
