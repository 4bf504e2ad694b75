#include "mocaplink/control_api.hpp"

#include <charconv>
#include <deque>
#include <fstream>
#include <sstream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

namespace mocaplink::station {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

// --- documents --------------------------------------------------------------

namespace {

Json vec_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

Json quat_json(const Quaternion& q) { return Json::array({q.w, q.x, q.y, q.z}); }

}  // namespace

Json to_json(const ObjectView& view) {
    Json j;
    j["name"] = view.name;
    j["samples"] = view.samples;
    j["capture_rate_hz"] = view.capture_rate_hz;
    j["drop_rate"] = view.drop_rate ? Json(*view.drop_rate) : Json(nullptr);
    j["first_seen"] = view.first_seen;
    j["last_seen"] = view.last_seen;
    if (view.latest) {
        j["frame_number"] = view.latest->frame_number;
        j["occluded"] = view.latest->occluded;
        j["position_mm"] = vec_json(view.latest->position_mm);
        j["orientation"] = quat_json(view.latest->orientation);
    } else {
        j["frame_number"] = nullptr;
    }
    if (view.track) {
        j["track"] = {{"position_m", vec_json(view.track->position)},
                      {"velocity_m_s", vec_json(view.track->velocity)},
                      {"state_time", view.track->state_time},
                      {"last_measurement_time", view.track->last_measurement_time}};
    } else {
        j["track"] = nullptr;
    }
    return j;
}

Json objects_json(const std::vector<ObjectView>& views) {
    Json out = Json::array();
    for (const auto& v : views) out.push_back(to_json(v));
    return out;
}

Json to_json(const SenderInfo& info) {
    return {{"id", info.id}, {"config", to_json(info.config)}, {"stats", to_json(info.stats)}};
}

Json senders_json(const std::vector<SenderInfo>& senders) {
    Json out = Json::array();
    for (const auto& s : senders) out.push_back(to_json(s));
    return out;
}

Json station_json(const Station& station) {
    const StationConfig& cfg = station.config();
    const auto counters = station.ingest_counters();
    Json mapping = Json::array();
    for (const auto& row : cfg.mapping.matrix()) {
        for (int v : row) mapping.push_back(v);
    }
    return {{"uptime_s", station.uptime()},
            {"time", station.clock().now()},
            {"clock", station.clock().is_virtual() ? "virtual" : "steady"},
            {"origin", to_json(cfg.origin)},
            {"frame_mapping", mapping},
            {"ingest",
             {{"source", std::string(to_string(cfg.ingest.kind))},
              {"description", station.source_description()},
              {"finished", station.ingest_finished()},
              {"applied", counters.applied},
              {"rejected", counters.rejected},
              {"source_errors", counters.source_errors}}},
            {"tracking",
             {{"process_noise_psd", cfg.tracking.process_noise_psd},
              {"measurement_variance", cfg.tracking.measurement_variance},
              {"initial_velocity_variance", cfg.tracking.initial_velocity_variance},
              {"staleness_timeout", cfg.tracking.staleness_timeout}}},
            {"objects", station.registry().names().size()},
            {"senders", station.senders().size()},
            {"api", to_string(cfg.api.bind)}};
}

Json objects_event(const Station& station) {
    return {{"type", "objects"}, {"time", station.clock().now()}, {"objects", objects_json(station.snapshot_world())}};
}

Json senders_event(const Station& station) {
    return {{"type", "senders"}, {"time", station.clock().now()}, {"senders", senders_json(station.senders())}};
}

// --- routing ----------------------------------------------------------------

namespace {

ApiResponse json_response(int status, const Json& body) { return {status, "application/json", body.dump()}; }

ApiResponse error_response(int status, std::string_view code, const std::string& message,
                           const std::string& field = "") {
    Json body = {{"error", code}, {"message", message}};
    if (!field.empty()) body["field"] = field;
    return json_response(status, body);
}

int status_for(StationErrc code) {
    switch (code) {
    case StationErrc::unknown_sender: return 404;
    case StationErrc::unknown_object: return 422;
    case StationErrc::invalid_config: return 400;
    case StationErrc::insufficient_data: return 409;
    }
    return 500;
}

std::optional<std::uint64_t> parse_id(std::string_view text) {
    std::uint64_t id = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
    return id;
}

std::string_view content_type_for(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    if (ext == ".map") return "application/json";
    return "application/octet-stream";
}

ApiResponse serve_static(std::string_view path, const std::optional<std::filesystem::path>& static_dir) {
    if (!static_dir) return error_response(404, "NotFound", "no such resource");
    std::string rel(path.substr(1));
    if (rel.empty() || rel.back() == '/') rel += "index.html";
    const std::filesystem::path relative(rel);
    for (const auto& part : relative) {
        if (part == "..") return error_response(404, "NotFound", "no such resource");
    }
    const auto file = *static_dir / relative;
    std::ifstream in(file, std::ios::binary);
    if (!in || std::filesystem::is_directory(file)) return error_response(404, "NotFound", "no such resource");
    std::ostringstream ss;
    ss << in.rdbuf();
    return {200, std::string(content_type_for(file)), ss.str()};
}

ApiResponse route_senders(Station& station, std::string_view method, std::string_view rest, std::string_view body) {
    if (rest.empty()) {
        if (method == "GET") return json_response(200, senders_json(station.senders()));
        if (method == "POST") {
            Json doc;
            try {
                doc = Json::parse(body);
            } catch (const Json::parse_error& e) {
                return error_response(400, "InvalidConfig", e.what());
            }
            const auto cfg = sender_config_from_json(doc, "");
            const auto id = station.create_sender(cfg);
            return json_response(201, {{"id", id}});
        }
        return error_response(405, "MethodNotAllowed", "use GET or POST");
    }
    const auto id = parse_id(rest);
    if (!id) return error_response(404, "UnknownSender", "bad sender id '" + std::string(rest) + "'");
    if (method == "GET") {
        const auto info = station.sender(*id);
        if (!info) return error_response(404, "UnknownSender", "no sender " + std::to_string(*id));
        return json_response(200, to_json(*info));
    }
    if (method == "PATCH") {
        const auto info = station.sender(*id);
        if (!info) return error_response(404, "UnknownSender", "no sender " + std::to_string(*id));
        Json doc;
        try {
            doc = Json::parse(body);
        } catch (const Json::parse_error& e) {
            return error_response(400, "InvalidConfig", e.what());
        }
        const auto patch = sender_patch_from_json(doc, info->config);
        return json_response(200, to_json(station.update_sender(*id, patch)));
    }
    if (method == "DELETE") {
        const auto info = station.stop_sender(*id);
        return json_response(200, {{"id", info.id}, {"stats", to_json(info.stats)}});
    }
    return error_response(405, "MethodNotAllowed", "use GET, PATCH or DELETE");
}

}  // namespace

ApiResponse handle_request(Station& station, std::string_view method, std::string_view target, std::string_view body,
                           const std::optional<std::filesystem::path>& static_dir) {
    std::string_view path = target.substr(0, target.find('?'));
    try {
        if (path == "/api/objects") {
            if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
            return json_response(200, objects_json(station.snapshot_world()));
        }
        if (path == "/api/station") {
            if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
            return json_response(200, station_json(station));
        }
        constexpr std::string_view senders_prefix = "/api/senders";
        if (path.starts_with(senders_prefix)) {
            std::string_view rest = path.substr(senders_prefix.size());
            if (rest.empty() || rest == "/") return route_senders(station, method, "", body);
            if (rest.front() == '/') return route_senders(station, method, rest.substr(1), body);
        }
        if (path.starts_with("/api/")) return error_response(404, "NotFound", "no such endpoint");
        if (method != "GET" && method != "HEAD") return error_response(405, "MethodNotAllowed", "use GET");
        return serve_static(path, static_dir);
    } catch (const ConfigError& e) {
        return error_response(400, "InvalidConfig", e.what(), e.field());
    } catch (const StationError& e) {
        return error_response(status_for(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        spdlog::error("api: {} {}: {}", method, target, e.what());
        return error_response(500, "InternalError", e.what());
    }
}

// --- server -----------------------------------------------------------------

namespace {

class StreamSession : public std::enable_shared_from_this<StreamSession> {
public:
    StreamSession(tcp::socket&& socket, Station& station)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), station_(station) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&StreamSession::on_accept, shared_from_this()));
    }

private:
    static constexpr std::size_t kMaxQueued = 64;  // slow consumers lose events

    void on_accept(beast::error_code ec) {
        if (ec) return;
        ws_.text(true);
        do_read();
        on_timer({});
    }

    void do_read() {
        ws_.async_read(read_buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->close();
                return;
            }
            self->read_buf_.consume(self->read_buf_.size());
            self->do_read();
        });
    }

    void on_timer(beast::error_code ec) {
        if (ec || closed_) return;
        const auto per_sender = static_cast<unsigned>(kObjectStreamHz / kSenderStreamHz);
        try {
            if (tick_ % per_sender == 0) enqueue(senders_event(station_).dump());
            enqueue(objects_event(station_).dump());
        } catch (const std::exception& e) {
            spdlog::warn("api stream: {}", e.what());
        }
        ++tick_;
        timer_.expires_after(std::chrono::microseconds(static_cast<long>(1e6 / kObjectStreamHz)));
        timer_.async_wait(beast::bind_front_handler(&StreamSession::on_timer, shared_from_this()));
    }

    void enqueue(std::string message) {
        if (queue_.size() >= kMaxQueued) return;
        queue_.push_back(std::move(message));
        if (queue_.size() == 1) do_write();
    }

    void do_write() {
        ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->close();
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) self->do_write();
        });
    }

    void close() {
        closed_ = true;
        timer_.cancel();
    }

    websocket::stream<beast::tcp_stream> ws_;
    net::steady_timer timer_;
    Station& station_;
    beast::flat_buffer read_buf_;
    std::deque<std::string> queue_;
    unsigned tick_ = 0;
    bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, Station& station, const std::optional<std::filesystem::path>& static_dir)
        : stream_(std::move(socket)), station_(station), static_dir_(static_dir) {}

    void run() { do_read(); }

private:
    void do_read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec == http::error::end_of_stream) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        if (ec) return;

        if (websocket::is_upgrade(req_)) {
            const std::string_view target(req_.target().data(), req_.target().size());
            if (target.substr(0, target.find('?')) == "/api/stream") {
                stream_.expires_never();
                std::make_shared<StreamSession>(stream_.release_socket(), station_)->run(std::move(req_));
                return;
            }
        }

        const std::string method(req_.method_string());
        const std::string_view target(req_.target().data(), req_.target().size());
        const ApiResponse r = handle_request(station_, method, target, req_.body(), static_dir_);

        auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(r.status),
                                                                       req_.version());
        res->set(http::field::server, "mocaplink");
        res->set(http::field::content_type, r.content_type);
        res->set(http::field::access_control_allow_origin, "*");
        res->keep_alive(req_.keep_alive());
        if (req_.method() != http::verb::head) res->body() = r.body;
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
            if (wec) return;
            if (res->need_eof()) {
                beast::error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                return;
            }
            self->do_read();
        });
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    Station& station_;
    const std::optional<std::filesystem::path>& static_dir_;
};

}  // namespace

struct ControlServer::Impl {
    Impl(Station& s, BindAddress b, std::optional<std::filesystem::path> dir)
        : station(s), bind(std::move(b)), static_dir(std::move(dir)) {}

    void do_accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;  // closed
            std::make_shared<HttpSession>(std::move(socket), station, static_dir)->run();
            do_accept();
        });
    }

    Station& station;
    BindAddress bind;
    std::optional<std::filesystem::path> static_dir;
    net::io_context io{1};
    tcp::acceptor acceptor{io};
    std::thread thread;
};

ControlServer::ControlServer(Station& station, BindAddress bind, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(station, std::move(bind), std::move(static_dir))) {}

ControlServer::~ControlServer() { stop(); }

void ControlServer::start() {
    if (impl_->thread.joinable()) return;
    beast::error_code ec;
    net::ip::address address;
    const std::string& host = impl_->bind.host;
    address = net::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
    if (ec) throw BindError("api: invalid bind host '" + host + "'");
    const tcp::endpoint endpoint(address, impl_->bind.port);
    auto& acc = impl_->acceptor;
    acc.open(endpoint.protocol(), ec);
    if (!ec) acc.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acc.bind(endpoint, ec);
    if (!ec) acc.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
        beast::error_code ignored;
        acc.close(ignored);
        throw BindError("api: cannot bind " + to_string(impl_->bind) + ": " + ec.message());
    }
    port_ = acc.local_endpoint().port();
    impl_->do_accept();
    impl_->thread = std::thread([this] { impl_->io.run(); });
    spdlog::info("api: listening on {}:{}", host, port_);
}

void ControlServer::stop() {
    if (!impl_ || !impl_->thread.joinable()) return;
    net::post(impl_->io, [this] {
        beast::error_code ignored;
        impl_->acceptor.close(ignored);
    });
    impl_->io.stop();
    impl_->thread.join();
}

}  // namespace mocaplink::station
