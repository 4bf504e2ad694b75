#include "mocaplink/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mocaplink::station {

ConfigError::ConfigError(std::string field, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error((line ? "line " + std::to_string(*line) + ": " : std::string()) +
                         (field.empty() ? message : field + ": " + message)),
      field_(std::move(field)),
      line_(line) {}

std::string_view to_string(SourceKind kind) {
    switch (kind) {
    case SourceKind::simulate: return "simulate";
    case SourceKind::replay: return "replay";
    case SourceKind::udp: return "udp-ingest";
    }
    return "";
}

BindAddress parse_bind_address(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) {
        throw ConfigError("api.bind", "expected host:port, got '" + std::string(text) + "'");
    }
    BindAddress out;
    if (colon > 0) out.host = std::string(text.substr(0, colon));
    const std::string port(text.substr(colon + 1));
    char* end = nullptr;
    const long value = std::strtol(port.c_str(), &end, 10);
    if (port.empty() || *end != '\0' || value < 0 || value > 65535) {
        throw ConfigError("api.bind", "invalid port '" + port + "'");
    }
    out.port = static_cast<std::uint16_t>(value);
    return out;
}

std::string to_string(const BindAddress& address) { return address.host + ":" + std::to_string(address.port); }

namespace {

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

const Json* member(const Json& obj, const std::string& key) {
    if (!obj.is_object()) return nullptr;
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void require_object(const Json& doc, const std::string& field) {
    if (!doc.is_object()) throw ConfigError(field, "expected an object");
}

double number(const Json& v, const std::string& field) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    return v.get<double>();
}

template <typename T>
T integer(const Json& v, const std::string& field, long long lo, long long hi) {
    if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
    const auto value = v.get<long long>();
    if (value < lo || value > hi) {
        throw ConfigError(field, "must be within [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return static_cast<T>(value);
}

std::string text(const Json& v, const std::string& field) {
    if (!v.is_string()) throw ConfigError(field, "expected a string");
    return v.get<std::string>();
}

bool boolean(const Json& v, const std::string& field) {
    if (!v.is_boolean()) throw ConfigError(field, "expected true or false");
    return v.get<bool>();
}

Vec3 vec3(const Json& v, const std::string& field) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(field, "expected an array of three numbers");
    return {number(v[0], field + "[0]"), number(v[1], field + "[1]"), number(v[2], field + "[2]")};
}

template <typename F>
void optional_field(const Json& obj, const std::string& prefix, const std::string& key, F&& apply) {
    if (const Json* v = member(obj, key)) apply(*v, join(prefix, key));
}

std::size_t line_of(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

Json parse_document(std::string_view text) {
    try {
        return Json::parse(text.begin(), text.end(), nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ConfigError("", e.what(), line_of(text, e.byte == 0 ? 0 : e.byte - 1));
    }
}

std::string read_file(const std::filesystem::path& path, const std::string& field) {
    std::ifstream in(path);
    if (!in) throw ConfigError(field, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

streaming::MessageSet message_set(const Json& v, const std::string& field) {
    if (!v.is_array()) throw ConfigError(field, "expected an array of message names");
    streaming::MessageSet out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string name = text(v[i], field + "[" + std::to_string(i) + "]");
        try {
            out.insert(mavlink::message_type_from_string(name));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(field + "[" + std::to_string(i) + "]", e.what());
        }
    }
    if (out.empty()) throw ConfigError(field, "at least one message type must be enabled");
    return out;
}

streaming::DroneEndpoint endpoint(const Json& doc, const std::string& prefix, streaming::DroneEndpoint base) {
    require_object(doc, prefix);
    optional_field(doc, prefix, "host", [&](const Json& v, const std::string& f) { base.host = text(v, f); });
    optional_field(doc, prefix, "port",
                   [&](const Json& v, const std::string& f) { base.port = integer<std::uint16_t>(v, f, 1, 65535); });
    optional_field(doc, prefix, "system_id", [&](const Json& v, const std::string& f) {
        base.system_id = integer<std::uint8_t>(v, f, 1, 255);
    });
    optional_field(doc, prefix, "component_id", [&](const Json& v, const std::string& f) {
        base.component_id = integer<std::uint8_t>(v, f, 1, 255);
    });
    return base;
}

}  // namespace

tracking::FilterParams parse_filter_params(const Json& doc, const std::string& prefix,
                                           const tracking::FilterParams& base) {
    require_object(doc, prefix);
    tracking::FilterParams p = base;
    optional_field(doc, prefix, "process_noise_psd",
                   [&](const Json& v, const std::string& f) { p.process_noise_psd = number(v, f); });
    optional_field(doc, prefix, "measurement_variance",
                   [&](const Json& v, const std::string& f) { p.measurement_variance = number(v, f); });
    optional_field(doc, prefix, "initial_velocity_variance",
                   [&](const Json& v, const std::string& f) { p.initial_velocity_variance = number(v, f); });
    optional_field(doc, prefix, "staleness_timeout",
                   [&](const Json& v, const std::string& f) { p.staleness_timeout = number(v, f); });
    optional_field(doc, prefix, "gate_enabled",
                   [&](const Json& v, const std::string& f) { p.gate_enabled = boolean(v, f); });
    optional_field(doc, prefix, "gate_threshold",
                   [&](const Json& v, const std::string& f) { p.gate_threshold = number(v, f); });
    try {
        p.validate();
    } catch (const tracking::TrackingError& e) {
        throw ConfigError(prefix, e.what());
    }
    return p;
}

ingest::ScenarioSpec parse_scenario(const Json& doc, const std::string& prefix) {
    require_object(doc, prefix);
    ingest::ScenarioSpec s;
    optional_field(doc, prefix, "kind", [&](const Json& v, const std::string& f) {
        try {
            s.kind = ingest::scenario_kind_from_string(text(v, f));
        } catch (const ingest::ScenarioError& e) {
            throw ConfigError(f, e.what());
        }
    });
    optional_field(doc, prefix, "rate_hz", [&](const Json& v, const std::string& f) { s.rate_hz = number(v, f); });
    optional_field(doc, prefix, "drop_probability",
                   [&](const Json& v, const std::string& f) { s.drop_probability = number(v, f); });
    optional_field(doc, prefix, "seed", [&](const Json& v, const std::string& f) {
        if (!v.is_number_unsigned()) throw ConfigError(f, "expected a non-negative integer");
        s.seed = v.get<std::uint64_t>();
    });
    optional_field(doc, prefix, "objects", [&](const Json& v, const std::string& f) {
        if (!v.is_array()) throw ConfigError(f, "expected an array of names");
        s.objects.clear();
        for (std::size_t i = 0; i < v.size(); ++i) s.objects.push_back(text(v[i], f + "[" + std::to_string(i) + "]"));
    });
    optional_field(doc, prefix, "object_spacing_mm",
                   [&](const Json& v, const std::string& f) { s.object_spacing_mm = vec3(v, f); });
    optional_field(doc, prefix, "noise_std_mm", [&](const Json& v, const std::string& f) {
        if (v.is_number()) {
            const double sigma = number(v, f);
            s.noise_std_mm = {sigma, sigma, sigma};
        } else {
            s.noise_std_mm = vec3(v, f);
        }
    });
    optional_field(doc, prefix, "center_mm", [&](const Json& v, const std::string& f) { s.center_mm = vec3(v, f); });
    optional_field(doc, prefix, "yaw_deg", [&](const Json& v, const std::string& f) { s.yaw_deg = number(v, f); });
    optional_field(doc, prefix, "radius_mm", [&](const Json& v, const std::string& f) { s.radius_mm = number(v, f); });
    optional_field(doc, prefix, "angular_speed_rad_s",
                   [&](const Json& v, const std::string& f) { s.angular_speed_rad_s = number(v, f); });
    optional_field(doc, prefix, "start_mm", [&](const Json& v, const std::string& f) { s.start_mm = vec3(v, f); });
    optional_field(doc, prefix, "velocity_mm_s",
                   [&](const Json& v, const std::string& f) { s.velocity_mm_s = vec3(v, f); });
    optional_field(doc, prefix, "waypoints_mm", [&](const Json& v, const std::string& f) {
        if (!v.is_array()) throw ConfigError(f, "expected an array of points");
        s.waypoints_mm.clear();
        for (std::size_t i = 0; i < v.size(); ++i) s.waypoints_mm.push_back(vec3(v[i], f + "[" + std::to_string(i) + "]"));
    });
    optional_field(doc, prefix, "speed_mm_s", [&](const Json& v, const std::string& f) { s.speed_mm_s = number(v, f); });
    try {
        ingest::validate(s);
    } catch (const ingest::ScenarioError& e) {
        throw ConfigError(prefix, e.what());
    }
    return s;
}

ingest::ScenarioSpec load_scenario(const std::filesystem::path& path) {
    const std::string content = read_file(path, "scenario");
    return parse_scenario(parse_document(content), "");
}

Json to_json(const ingest::ScenarioSpec& s) {
    Json j;
    j["kind"] = std::string(ingest::to_string(s.kind));
    j["rate_hz"] = s.rate_hz;
    j["drop_probability"] = s.drop_probability;
    j["seed"] = s.seed;
    j["objects"] = s.objects;
    j["object_spacing_mm"] = s.object_spacing_mm;
    j["noise_std_mm"] = s.noise_std_mm;
    j["center_mm"] = s.center_mm;
    j["yaw_deg"] = s.yaw_deg;
    j["radius_mm"] = s.radius_mm;
    j["angular_speed_rad_s"] = s.angular_speed_rad_s;
    j["start_mm"] = s.start_mm;
    j["velocity_mm_s"] = s.velocity_mm_s;
    j["waypoints_mm"] = s.waypoints_mm;
    j["speed_mm_s"] = s.speed_mm_s;
    return j;
}

streaming::SenderConfig sender_config_from_json(const Json& doc, const std::string& prefix) {
    require_object(doc, prefix);
    streaming::SenderConfig c;
    const Json* object = member(doc, "object");
    if (!object) object = member(doc, "object_name");
    if (!object) throw ConfigError(join(prefix, "object"), "required field is missing");
    c.object_name = text(*object, join(prefix, "object"));
    if (const Json* ep = member(doc, "endpoint")) c.endpoint = endpoint(*ep, join(prefix, "endpoint"), c.endpoint);
    optional_field(doc, prefix, "rate_hz", [&](const Json& v, const std::string& f) { c.rate_hz = number(v, f); });
    optional_field(doc, prefix, "enabled_messages",
                   [&](const Json& v, const std::string& f) { c.enabled_messages = message_set(v, f); });
    optional_field(doc, prefix, "protocol_version", [&](const Json& v, const std::string& f) {
        c.protocol_version = integer<std::uint8_t>(v, f, 1, 2);
    });
    try {
        c.validate();
    } catch (const streaming::SenderError& e) {
        throw ConfigError(prefix, e.what());
    }
    return c;
}

streaming::SenderPatch sender_patch_from_json(const Json& doc, const streaming::SenderConfig& current) {
    require_object(doc, "");
    streaming::SenderPatch p;
    for (const auto& [key, value] : doc.items()) {
        if (key != "rate_hz" && key != "enabled_messages" && key != "endpoint") {
            throw ConfigError(key, "field cannot be changed at runtime");
        }
    }
    optional_field(doc, "", "rate_hz", [&](const Json& v, const std::string& f) { p.rate_hz = number(v, f); });
    optional_field(doc, "", "enabled_messages",
                   [&](const Json& v, const std::string& f) { p.enabled_messages = message_set(v, f); });
    if (const Json* ep = member(doc, "endpoint")) p.endpoint = endpoint(*ep, "endpoint", current.endpoint);
    return p;
}

Json to_json(const streaming::MessageSet& messages) {
    Json j = Json::array();
    for (auto t : messages.types()) j.push_back(std::string(mavlink::to_string(t)));
    return j;
}

Json to_json(const streaming::SenderConfig& c) {
    return {{"object", c.object_name},
            {"endpoint",
             {{"host", c.endpoint.host},
              {"port", c.endpoint.port},
              {"system_id", c.endpoint.system_id},
              {"component_id", c.endpoint.component_id}}},
            {"rate_hz", c.rate_hz},
            {"enabled_messages", to_json(c.enabled_messages)},
            {"protocol_version", c.protocol_version}};
}

Json to_json(const streaming::SenderStats& s) {
    return {{"ticks_total", s.ticks_total},
            {"frames_sent", s.frames_sent},
            {"deadline_misses", s.deadline_misses},
            {"stale_skips", s.stale_skips},
            {"measured_output_rate_hz", s.measured_output_rate_hz},
            {"drop_rate", s.drop_rate()}};
}

Json to_json(const geodesy::GeodeticPoint& g) {
    return {{"latitude_deg", g.latitude_deg}, {"longitude_deg", g.longitude_deg}, {"altitude_m", g.altitude_m}};
}

// ---------------------------------------------------------------------------

StationConfig parse_station_config(std::string_view content, const std::filesystem::path& base_dir, bool apply_env) {
    const Json doc = parse_document(content);
    require_object(doc, "");
    StationConfig cfg;

    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };

    // origin: required, no defaults
    const Json* origin = member(doc, "origin");
    if (!origin) throw ConfigError("origin.latitude_deg", "required field is missing (no default origin)");
    require_object(*origin, "origin");
    double lat = 0, lon = 0, alt = 0;
    for (const auto& [key, out] : {std::pair<const char*, double*>{"latitude_deg", &lat},
                                   std::pair<const char*, double*>{"longitude_deg", &lon},
                                   std::pair<const char*, double*>{"altitude_m", &alt}}) {
        const Json* v = member(*origin, key);
        if (!v) throw ConfigError(std::string("origin.") + key, "required field is missing (no default origin)");
        *out = number(*v, std::string("origin.") + key);
    }
    try {
        cfg.origin = geodesy::make_geodetic(lat, lon, alt);
    } catch (const geodesy::GeodesyError& e) {
        throw ConfigError("origin", e.what());
    }

    optional_field(doc, "", "frame_mapping", [&](const Json& v, const std::string& f) {
        if (!v.is_array() || v.size() != 9) throw ConfigError(f, "expected 9 integers (row-major)");
        std::array<int, 9> values{};
        for (std::size_t i = 0; i < 9; ++i) values[i] = integer<int>(v[i], f + "[" + std::to_string(i) + "]", -1, 1);
        try {
            cfg.mapping = geodesy::FrameMapping::from_row_major(values);
        } catch (const geodesy::GeodesyError& e) {
            throw ConfigError(f, e.what());
        }
    });

    if (const Json* t = member(doc, "tracking")) {
        cfg.tracking = parse_filter_params(*t, "tracking");
        if (const Json* objects = member(*t, "objects")) {
            require_object(*objects, "tracking.objects");
            for (const auto& [name, params] : objects->items()) {
                cfg.tracking_overrides[name] = parse_filter_params(params, "tracking.objects." + name, cfg.tracking);
            }
        }
    }

    if (const Json* gps = member(doc, "hil_gps")) {
        require_object(*gps, "hil_gps");
        optional_field(*gps, "hil_gps", "eph",
                       [&](const Json& v, const std::string& f) { cfg.gps.eph = integer<std::uint16_t>(v, f, 0, 65535); });
        optional_field(*gps, "hil_gps", "epv",
                       [&](const Json& v, const std::string& f) { cfg.gps.epv = integer<std::uint16_t>(v, f, 0, 65535); });
        optional_field(*gps, "hil_gps", "fix_type", [&](const Json& v, const std::string& f) {
            cfg.gps.fix_type = integer<std::uint8_t>(v, f, 0, 3);
        });
        optional_field(*gps, "hil_gps", "satellites_visible", [&](const Json& v, const std::string& f) {
            cfg.gps.satellites_visible = integer<std::uint8_t>(v, f, 0, 255);
        });
        optional_field(*gps, "hil_gps", "cog_min_speed", [&](const Json& v, const std::string& f) {
            cfg.gps.cog_min_speed = number(v, f);
            if (!(cfg.gps.cog_min_speed >= 0.0)) throw ConfigError(f, "must be >= 0");
        });
    }

    optional_field(doc, "", "epoch_offset_usec", [&](const Json& v, const std::string& f) {
        if (!v.is_number_unsigned()) throw ConfigError(f, "expected a non-negative integer");
        cfg.epoch_offset_usec = v.get<std::uint64_t>();
    });

    const Json* ingest = member(doc, "ingest");
    if (!ingest) throw ConfigError("ingest", "required section is missing");
    require_object(*ingest, "ingest");
    const Json* source = member(*ingest, "source");
    if (!source) throw ConfigError("ingest.source", "required field is missing");
    const std::string kind = text(*source, "ingest.source");
    if (kind == "simulate") {
        cfg.ingest.kind = SourceKind::simulate;
        if (const Json* s = member(*ingest, "scenario")) {
            cfg.ingest.scenario = parse_scenario(*s, "ingest.scenario");
        } else if (const Json* f = member(*ingest, "scenario_file")) {
            const auto path = resolve(text(*f, "ingest.scenario_file"));
            cfg.ingest.scenario = parse_scenario(parse_document(read_file(path, "ingest.scenario_file")), "");
        } else {
            throw ConfigError("ingest.scenario", "simulate source needs 'scenario' or 'scenario_file'");
        }
        optional_field(*ingest, "ingest", "duration_s", [&](const Json& v, const std::string& f) {
            cfg.ingest.duration_s = number(v, f);
        });
    } else if (kind == "replay") {
        cfg.ingest.kind = SourceKind::replay;
        const Json* path = member(*ingest, "path");
        if (!path) throw ConfigError("ingest.path", "required field is missing");
        cfg.ingest.replay_path = resolve(text(*path, "ingest.path"));
        optional_field(*ingest, "ingest", "pacing", [&](const Json& v, const std::string& f) {
            try {
                cfg.ingest.pacing = ingest::pacing_from_string(text(v, f));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(f, e.what());
            }
        });
    } else if (kind == "udp" || kind == "udp-ingest") {
        cfg.ingest.kind = SourceKind::udp;
        optional_field(*ingest, "ingest", "bind", [&](const Json& v, const std::string& f) {
            BindAddress b;
            try {
                b = parse_bind_address(text(v, f));
            } catch (const ConfigError& e) {
                throw ConfigError(f, e.what());
            }
            cfg.ingest.udp_host = b.host;
            cfg.ingest.udp_port = b.port;
        });
    } else {
        throw ConfigError("ingest.source", "must be one of simulate, replay, udp-ingest");
    }
    optional_field(*ingest, "ingest", "record_path", [&](const Json& v, const std::string& f) {
        cfg.ingest.record_path = resolve(text(v, f));
    });

    if (const Json* api = member(doc, "api")) {
        require_object(*api, "api");
        optional_field(*api, "api", "enabled", [&](const Json& v, const std::string& f) { cfg.api.enabled = boolean(v, f); });
        optional_field(*api, "api", "bind",
                       [&](const Json& v, const std::string& f) { cfg.api.bind = parse_bind_address(text(v, f)); });
        optional_field(*api, "api", "static_dir", [&](const Json& v, const std::string& f) {
            cfg.api.static_dir = resolve(text(v, f));
        });
    }
    if (apply_env) {
        if (const char* env = std::getenv(kApiBindEnv); env != nullptr && *env != '\0') {
            try {
                cfg.api.bind = parse_bind_address(env);
            } catch (const ConfigError& e) {
                throw ConfigError(kApiBindEnv, e.what());
            }
        }
    }

    optional_field(doc, "", "objects", [&](const Json& v, const std::string& f) {
        if (!v.is_array()) throw ConfigError(f, "expected an array of names");
        for (std::size_t i = 0; i < v.size(); ++i) cfg.objects.push_back(text(v[i], f + "[" + std::to_string(i) + "]"));
    });

    optional_field(doc, "", "senders", [&](const Json& v, const std::string& f) {
        if (!v.is_array()) throw ConfigError(f, "expected an array");
        for (std::size_t i = 0; i < v.size(); ++i) {
            cfg.senders.push_back(sender_config_from_json(v[i], f + "[" + std::to_string(i) + "]"));
        }
    });
    return cfg;
}

StationConfig load_station_config(const std::filesystem::path& path, bool apply_env) {
    const std::string content = read_file(path, "config");
    return parse_station_config(content, path.parent_path().empty() ? "." : path.parent_path(), apply_env);
}

}  // namespace mocaplink::station
