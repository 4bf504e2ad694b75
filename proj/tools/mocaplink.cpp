// mocaplink: headless front end for the station.

#include <condition_variable>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <pthread.h>
#include <stop_token>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mocaplink/analysis.hpp"
#include "mocaplink/capture.hpp"
#include "mocaplink/config.hpp"
#include "mocaplink/control_api.hpp"
#include "mocaplink/mavlink.hpp"
#include "mocaplink/station.hpp"

namespace ml = mocaplink;
namespace st = mocaplink::station;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// SIGINT/SIGTERM are blocked in every thread and collected by one waiter,
// which turns them into a stop request.
class SignalStop {
public:
    SignalStop() {
        sigemptyset(&set_);
        sigaddset(&set_, SIGINT);
        sigaddset(&set_, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &set_, nullptr);
        std::thread([this] {
            int sig = 0;
            if (sigwait(&set_, &sig) == 0) {
                spdlog::info("signal {} received, shutting down", sig);
                source_.request_stop();
            }
        }).detach();
    }
    std::stop_token token() const { return source_.get_token(); }

private:
    sigset_t set_{};
    std::stop_source source_;
};

struct Common {
    std::string config_path;
    bool virtual_clock = false;
    std::optional<std::uint64_t> seed;
    std::optional<double> duration;
    std::optional<std::string> api;
    std::string log_level = "info";
};

st::StationConfig load_config(const Common& c) {
    if (c.config_path.empty()) throw UsageError("--config is required");
    st::StationConfig cfg = st::load_station_config(c.config_path);
    if (c.seed) cfg.ingest.scenario.seed = *c.seed;
    if (c.api) cfg.api.bind = st::parse_bind_address(*c.api);
    return cfg;
}

void check_clock(const Common& c, const st::StationConfig& cfg) {
    if (c.virtual_clock && cfg.ingest.kind == st::SourceKind::udp) {
        throw UsageError("--virtual-clock cannot drive a live UDP ingest source");
    }
}

std::unique_ptr<ml::Clock> make_clock(const Common& c) {
    if (c.virtual_clock) return std::make_unique<ml::VirtualClock>();
    return std::make_unique<ml::SteadyClock>();
}

std::string fmt_rate(std::optional<double> v) { return v ? fmt::format("{:.4f}", *v) : std::string("-"); }

void print_objects(const nlohmann::json& objects) {
    fmt::print("{:<16} {:>9} {:>10} {:>10} {:>10} {:>10} {:>10}\n", "OBJECT", "SAMPLES", "RATE_HZ", "DROP", "X_M",
               "Y_M", "Z_M");
    for (const auto& o : objects) {
        std::string x = "-", y = "-", z = "-";
        if (!o["track"].is_null()) {
            const auto& p = o["track"]["position_m"];
            x = fmt::format("{:.3f}", p[0].get<double>());
            y = fmt::format("{:.3f}", p[1].get<double>());
            z = fmt::format("{:.3f}", p[2].get<double>());
        }
        const std::optional<double> drop =
            o["drop_rate"].is_null() ? std::nullopt : std::optional<double>(o["drop_rate"].get<double>());
        fmt::print("{:<16} {:>9} {:>10.1f} {:>10} {:>10} {:>10} {:>10}\n", o["name"].get<std::string>(),
                   o["samples"].get<std::uint64_t>(), o["capture_rate_hz"].get<double>(), fmt_rate(drop), x, y, z);
    }
}

void print_senders(const nlohmann::json& senders) {
    if (senders.empty()) return;
    fmt::print("{:>4} {:<16} {:<22} {:>8} {:>9} {:>9} {:>7} {:>8} {:>10}  {}\n", "ID", "OBJECT", "ENDPOINT", "RATE_HZ",
               "TICKS", "FRAMES", "MISSES", "DROP", "MEASURED", "MESSAGES");
    for (const auto& s : senders) {
        const auto& c = s["config"];
        const auto& k = s["stats"];
        std::string msgs;
        for (const auto& m : c["enabled_messages"]) msgs += (msgs.empty() ? "" : ",") + m.get<std::string>();
        fmt::print("{:>4} {:<16} {:<22} {:>8.1f} {:>9} {:>9} {:>7} {:>8.4f} {:>10.2f}  {}\n", s["id"].get<std::uint64_t>(),
                   c["object"].get<std::string>(),
                   fmt::format("{}:{}", c["endpoint"]["host"].get<std::string>(), c["endpoint"]["port"].get<int>()),
                   c["rate_hz"].get<double>(), k["ticks_total"].get<std::uint64_t>(),
                   k["frames_sent"].get<std::uint64_t>(), k["deadline_misses"].get<std::uint64_t>(),
                   k["drop_rate"].get<double>(), k["measured_output_rate_hz"].get<double>(), msgs);
    }
}

nlohmann::json report_json(const ml::analysis::StreamReport& r) {
    auto stds = [](const std::array<ml::analysis::RunningStats, 3>& a) {
        return nlohmann::json::array({a[0].stddev(), a[1].stddev(), a[2].stddev()});
    };
    return {{"frames", r.frames},
            {"decode_errors", r.decode_errors},
            {"sequence_breaks", r.sequence_breaks},
            {"HIL_GPS", r.hil_gps},
            {"LOCAL_POSITION_NED", r.local_position_ned},
            {"ATT_POS_MOCAP", r.att_pos_mocap},
            {"output_rate_hz", r.output_rate_hz},
            {"local_ned_std_m", stds(r.ned_position)},
            {"gps_ned_std_m", stds(r.gps_ned)}};
}

void write_capture(const std::string& path, const std::vector<ml::streaming::CapturedFrame>& frames) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& f : frames) {
        out << fmt::format("{:.6f} {}:{} {}\n", f.time, f.endpoint.host, f.endpoint.port, ml::mavlink::to_hex(f.bytes));
    }
}

// Runs a station to completion and prints the outcome. Shared by simulate,
// replay and record.
struct RunOptions {
    bool until_ingest_done = true;
    std::string capture_path;
    bool report = false;
    bool json = false;
    double report_skip = 0.0;
};

int run_station(const Common& c, st::StationConfig cfg, const RunOptions& opt, std::stop_token interrupt) {
    check_clock(c, cfg);
    if (cfg.ingest.kind == st::SourceKind::udp && !c.duration) {
        throw UsageError("a live UDP ingest needs --duration (or use serve)");
    }
    if (c.duration && cfg.ingest.kind == st::SourceKind::simulate) cfg.ingest.duration_s = *c.duration;
    auto clock = make_clock(c);
    // Loopback UDP cannot keep up with a virtual clock; capture in memory.
    const bool use_capture = !opt.capture_path.empty() || opt.report || c.virtual_clock;
    ml::streaming::CaptureSink sink(*clock);
    auto factory = use_capture ? sink.factory() : ml::streaming::udp_transport_factory();
    const auto origin = cfg.origin;
    const bool api = c.api.has_value();
    const auto static_dir = cfg.api.static_dir;
    const auto bind = cfg.api.bind;

    st::Station station(std::move(cfg), *clock, nullptr, factory);
    std::unique_ptr<st::ControlServer> server;
    if (api) {
        server = std::make_unique<st::ControlServer>(station, bind, static_dir);
        server->start();
    }
    const auto final_stats = station.run(c.duration, opt.until_ingest_done, interrupt);
    const auto objects = st::objects_json(station.snapshot_world());
    if (server) server->stop();

    nlohmann::json senders = nlohmann::json::array();
    for (const auto& s : final_stats) senders.push_back(st::to_json(s));
    nlohmann::json reports = nlohmann::json::array();
    if (use_capture) {
        if (!opt.capture_path.empty()) write_capture(opt.capture_path, sink.frames());
        if (opt.report) {
            for (const auto& s : final_stats) {
                const auto r =
                    ml::analysis::analyze_stream(sink.frames_for(s.config.endpoint.port), origin, opt.report_skip);
                auto j = report_json(r);
                j["id"] = s.id;
                j["object"] = s.config.object_name;
                reports.push_back(j);
            }
        }
    }

    if (opt.json) {
        nlohmann::json out = {{"objects", objects}, {"senders", senders}};
        if (opt.report) out["reports"] = reports;
        fmt::print("{}\n", out.dump(2));
        return kExitOk;
    }
    print_objects(objects);
    if (!senders.empty()) {
        fmt::print("\n");
        print_senders(senders);
    }
    if (opt.report && !reports.empty()) {
        fmt::print("\n{:>4} {:<16} {:>8} {:>10} {:>28} {:>28}\n", "ID", "OBJECT", "FRAMES", "RATE_HZ",
                   "LOCAL_NED_STD_MM (N,E,D)", "GPS_STD_MM (N,E,D)");
        for (const auto& r : reports) {
            auto triple = [](const nlohmann::json& a) {
                return fmt::format("{:.2f},{:.2f},{:.2f}", a[0].get<double>() * 1e3, a[1].get<double>() * 1e3,
                                   a[2].get<double>() * 1e3);
            };
            fmt::print("{:>4} {:<16} {:>8} {:>10.2f} {:>28} {:>28}\n", r["id"].get<std::uint64_t>(),
                       r["object"].get<std::string>(), r["frames"].get<std::size_t>(), r["output_rate_hz"].get<double>(),
                       triple(r["local_ned_std_m"]), triple(r["gps_ned_std_m"]));
        }
    }
    return kExitOk;
}

int cmd_serve(const Common& c, std::stop_token interrupt) {
    st::StationConfig cfg = load_config(c);
    check_clock(c, cfg);
    if (c.duration && cfg.ingest.kind == st::SourceKind::simulate && !cfg.ingest.duration_s) {
        cfg.ingest.duration_s = *c.duration;
    }
    auto clock = make_clock(c);
    const auto bind = cfg.api.bind;
    const auto static_dir = cfg.api.static_dir;
    const bool api_enabled = cfg.api.enabled;
    st::Station station(std::move(cfg), *clock);
    std::unique_ptr<st::ControlServer> server;
    if (api_enabled) {
        server = std::make_unique<st::ControlServer>(station, bind, static_dir);
        server->start();
        fmt::print("api listening on {}:{}\n", bind.host, server->port());
        std::fflush(stdout);
    }
    const auto final_stats = station.run(c.duration, false, interrupt);
    if (server) server->stop();
    nlohmann::json senders = nlohmann::json::array();
    for (const auto& s : final_stats) senders.push_back(st::to_json(s));
    fmt::print("final sender stats:\n");
    print_senders(senders);
    return kExitOk;
}

int cmd_stats(const Common& c, bool watch, std::stop_token interrupt) {
    std::string addr = c.api.value_or("");
    if (addr.empty()) {
        const char* env = std::getenv(st::kApiBindEnv);
        addr = env && *env ? env : "127.0.0.1:8080";
    }
    const st::BindAddress bind = st::parse_bind_address(addr);
    httplib::Client client(bind.host.empty() ? "127.0.0.1" : bind.host, bind.port);
    client.set_connection_timeout(2, 0);
    client.set_read_timeout(5, 0);

    auto fetch = [&](const char* path) {
        auto res = client.Get(path);
        if (!res) throw std::runtime_error(fmt::format("cannot reach station at {}: {}", addr, httplib::to_string(res.error())));
        if (res->status != 200) throw std::runtime_error(fmt::format("{} returned HTTP {}", path, res->status));
        return nlohmann::json::parse(res->body);
    };

    const auto start = std::chrono::steady_clock::now();
    for (std::size_t refresh = 1;; ++refresh) {
        const auto station = fetch("/api/station");
        const auto objects = fetch("/api/objects");
        const auto senders = fetch("/api/senders");
        fmt::print("== refresh {} | station uptime {:.1f} s | ingest {} ==\n", refresh,
                   station["uptime_s"].get<double>(), station["ingest"]["description"].get<std::string>());
        print_objects(objects);
        if (!senders.empty()) {
            fmt::print("\n");
            print_senders(senders);
        }
        std::fflush(stdout);
        if (!watch) break;
        const auto next = start + std::chrono::seconds(static_cast<long>(refresh));
        if (c.duration && next - start >= std::chrono::duration<double>(*c.duration)) break;
        std::mutex m;
        std::condition_variable_any cv;
        std::unique_lock lock(m);
        cv.wait_until(lock, interrupt, next, [] { return false; });
        if (interrupt.stop_requested()) break;
    }
    return kExitOk;
}

int cmd_encode_test(const std::string& type_name, const std::vector<std::string>& fields, int seq, int sysid,
                    int compid, int version) {
    const auto type = ml::mavlink::message_type_from_string(type_name);
    const auto message = ml::mavlink::parse_message_fields(type, fields);
    ml::mavlink::FrameHeader h;
    h.protocol_version = static_cast<std::uint8_t>(version);
    h.sequence = static_cast<std::uint8_t>(seq);
    h.system_id = static_cast<std::uint8_t>(sysid);
    h.component_id = static_cast<std::uint8_t>(compid);
    h.message_id = ml::mavlink::message_id(type);
    const auto frame = ml::mavlink::encode_frame(h, message, ml::mavlink::pinned_crc_extra(type));
    fmt::print("{}\n", ml::mavlink::to_hex(frame));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    SignalStop signals;

    CLI::App app{"Motion-capture to MAVLink bridge"};
    app.require_subcommand(1);
    Common c;
    app.add_option("--config", c.config_path, "Station config file (JSON)");
    app.add_flag("--virtual-clock", c.virtual_clock, "Drive ingest and senders from a simulated clock");
    app.add_option("--seed", c.seed, "Override the simulator seed");
    app.add_option("--duration", c.duration, "Stop after this many seconds of service time")->check(CLI::PositiveNumber);
    app.add_option("--api", c.api, "Control API address host:port");
    app.add_option("--log-level", c.log_level, "trace, debug, info, warn, error or off");

    auto* serve = app.add_subcommand("serve", "Run the station and control API until interrupted");

    RunOptions sim_opt;
    std::string scenario;
    auto* simulate = app.add_subcommand("simulate", "Run a simulated scenario and print the outcome");
    simulate->add_option("--scenario", scenario, "Scenario file (JSON) replacing the config's scenario");
    simulate->add_option("--capture", sim_opt.capture_path, "Write every emitted frame to this file");
    simulate->add_flag("--report", sim_opt.report, "Decode emitted frames and print per-sender statistics");
    simulate->add_option("--report-skip", sim_opt.report_skip, "Ignore frames sent before this service time");
    simulate->add_flag("--json", sim_opt.json, "Print the outcome as JSON");

    RunOptions replay_opt;
    std::string log_path;
    std::string pacing;
    auto* replay = app.add_subcommand("replay", "Stream a recorded log through the configured senders");
    replay->add_option("--log", log_path, "Replay log")->required();
    replay->add_option("--pacing", pacing, "realtime or fast");
    replay->add_option("--capture", replay_opt.capture_path, "Write every emitted frame to this file");
    replay->add_flag("--report", replay_opt.report, "Decode emitted frames and print per-sender statistics");
    replay->add_flag("--json", replay_opt.json, "Print the outcome as JSON");

    std::string record_out;
    bool record_json = false;
    auto* record = app.add_subcommand("record", "Record the configured ingest source to a replay log");
    record->add_option("--out", record_out, "Output log")->required();
    record->add_flag("--json", record_json, "Print the outcome as JSON");

    bool watch = false;
    auto* stats = app.add_subcommand("stats", "Print objects and senders of a running station");
    stats->add_flag("--watch", watch, "Refresh once per second");

    std::string msg_type;
    std::vector<std::string> fields;
    int seq = 0, sysid = 1, compid = 1, version = 2;
    auto* encode = app.add_subcommand("encode-test", "Print one encoded frame as hex");
    encode->add_option("--type", msg_type, "HIL_GPS, LOCAL_POSITION_NED or ATT_POS_MOCAP")->required();
    encode->add_option("--seq", seq, "Sequence number")->check(CLI::Range(0, 255));
    encode->add_option("--sysid", sysid, "System id")->check(CLI::Range(0, 255));
    encode->add_option("--compid", compid, "Component id")->check(CLI::Range(0, 255));
    encode->add_option("--version", version, "MAVLink protocol version")->check(CLI::IsMember({1, 2}));
    encode->add_option("fields", fields, "name=value assignments");

    for (auto* sub : {serve, simulate, replay, record, stats, encode}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    auto logger = spdlog::stderr_color_mt("mocaplink");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(c.log_level));

    try {
        if (*serve) return cmd_serve(c, signals.token());
        if (*simulate) {
            st::StationConfig cfg = load_config(c);
            if (!scenario.empty()) {
                cfg.ingest.kind = st::SourceKind::simulate;
                cfg.ingest.scenario = st::load_scenario(scenario);
                if (c.seed) cfg.ingest.scenario.seed = *c.seed;
            }
            if (cfg.ingest.kind != st::SourceKind::simulate) throw UsageError("simulate needs a simulate ingest source");
            return run_station(c, std::move(cfg), sim_opt, signals.token());
        }
        if (*replay) {
            st::StationConfig cfg = load_config(c);
            cfg.ingest.kind = st::SourceKind::replay;
            cfg.ingest.replay_path = log_path;
            if (!pacing.empty()) cfg.ingest.pacing = ml::ingest::pacing_from_string(pacing);
            return run_station(c, std::move(cfg), replay_opt, signals.token());
        }
        if (*record) {
            st::StationConfig cfg = load_config(c);
            cfg.ingest.record_path = record_out;
            cfg.senders.clear();
            RunOptions opt;
            opt.json = record_json;
            return run_station(c, std::move(cfg), opt, signals.token());
        }
        if (*stats) return cmd_stats(c, watch, signals.token());
        if (*encode) return cmd_encode_test(msg_type, fields, seq, sysid, compid, version);
    } catch (const UsageError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const st::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kExitUsage;
    } catch (const ml::mavlink::FieldParseError& e) {
        fmt::print(stderr, "field error: {}\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
