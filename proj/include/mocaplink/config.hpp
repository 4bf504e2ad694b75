#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mocaplink/geodesy.hpp"
#include "mocaplink/registry.hpp"
#include "mocaplink/replay.hpp"
#include "mocaplink/sender.hpp"
#include "mocaplink/simulator.hpp"
#include "mocaplink/tracking.hpp"

namespace mocaplink::station {

using Json = nlohmann::json;

/// A configuration problem, naming the offending field (dotted path) and,
/// for syntax errors, the line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message, std::optional<std::size_t> line = std::nullopt);
    const std::string& field() const noexcept { return field_; }
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    std::string field_;
    std::optional<std::size_t> line_;
};

enum class SourceKind { simulate, replay, udp };

std::string_view to_string(SourceKind kind);

struct IngestConfig {
    SourceKind kind = SourceKind::simulate;
    ingest::ScenarioSpec scenario;
    std::optional<double> duration_s;  ///< simulate only
    std::filesystem::path replay_path;
    ingest::Pacing pacing = ingest::Pacing::realtime;
    std::string udp_host = "0.0.0.0";
    std::uint16_t udp_port = 51001;
    std::optional<std::filesystem::path> record_path;  ///< optional replay-log writer
};

struct BindAddress {
    std::string host = "127.0.0.1";
    std::uint16_t port = 8080;
    friend bool operator==(const BindAddress&, const BindAddress&) = default;
};

/// "host:port" or ":port".
BindAddress parse_bind_address(std::string_view text);
std::string to_string(const BindAddress& address);

inline constexpr const char* kApiBindEnv = "MOCAPLINK_API_BIND";

struct ApiConfig {
    bool enabled = true;
    BindAddress bind;
    std::optional<std::filesystem::path> static_dir;
};

struct StationConfig {
    IngestConfig ingest;
    geodesy::GeodeticPoint origin;
    geodesy::FrameMapping mapping;
    tracking::FilterParams tracking;
    std::map<std::string, tracking::FilterParams> tracking_overrides;
    streaming::GpsSettings gps;
    std::optional<std::uint64_t> epoch_offset_usec;  ///< default: wall clock at start (0 on a virtual clock)
    ApiConfig api;
    std::vector<std::string> objects;  ///< declared ahead of first capture
    std::vector<streaming::SenderConfig> senders;
};

/// Relative paths in the document resolve against `base_dir`. Applies the
/// MOCAPLINK_API_BIND override when `apply_env` is set.
StationConfig parse_station_config(std::string_view text, const std::filesystem::path& base_dir = ".",
                                   bool apply_env = true);
StationConfig load_station_config(const std::filesystem::path& path, bool apply_env = true);

ingest::ScenarioSpec parse_scenario(const Json& doc, const std::string& prefix = "scenario");
ingest::ScenarioSpec load_scenario(const std::filesystem::path& path);
Json to_json(const ingest::ScenarioSpec& spec);

tracking::FilterParams parse_filter_params(const Json& doc, const std::string& prefix,
                                           const tracking::FilterParams& base = {});

// --- wire documents shared by the config file and the control API ----------

streaming::SenderConfig sender_config_from_json(const Json& doc, const std::string& prefix = "sender");
/// Partial update; endpoint members not present keep their `current` values.
streaming::SenderPatch sender_patch_from_json(const Json& doc, const streaming::SenderConfig& current);

Json to_json(const streaming::SenderConfig& config);
Json to_json(const streaming::SenderStats& stats);
Json to_json(const streaming::MessageSet& messages);
Json to_json(const geodesy::GeodeticPoint& point);

}  // namespace mocaplink::station
