#include "mocaplink/replay.hpp"

#include <string>

namespace mocaplink::ingest {

Pacing pacing_from_string(std::string_view name) {
    if (name == "realtime") return Pacing::realtime;
    if (name == "fast" || name == "as-fast-as-possible") return Pacing::fast;
    throw std::invalid_argument("unknown pacing '" + std::string(name) + "'");
}

ReplayReader::ReplayReader(const std::filesystem::path& path) {
    auto file = std::make_unique<std::ifstream>(path);
    if (!*file) {
        throw IngestError(IngestErrc::io_error, "cannot open replay log " + path.string());
    }
    in_ = std::move(file);
    read_header();
}

ReplayReader::ReplayReader(std::unique_ptr<std::istream> stream) : in_(std::move(stream)) { read_header(); }

void ReplayReader::read_header() {
    std::string line;
    if (!std::getline(*in_, line)) {
        throw IngestError(IngestErrc::corrupt_log, "replay log is empty (missing header)");
    }
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kLogHeader) {
        throw IngestError(IngestErrc::corrupt_log, "bad replay log header '" + line + "'");
    }
}

std::optional<RigidBodySample> ReplayReader::replay_next(Pacing pacing, Clock* clock, std::stop_token stop) {
    std::string line;
    while (std::getline(*in_, line)) {
        ++line_;
        if (line.empty() || line == "\r") continue;
        RigidBodySample sample;
        try {
            sample = parse_ingest_record(line);
        } catch (const IngestError& e) {
            throw IngestError(IngestErrc::corrupt_log, "line " + std::to_string(line_) + ": " + e.what());
        }
        if (last_time_ && sample.capture_time < *last_time_) {
            throw IngestError(IngestErrc::clock_skew, "line " + std::to_string(line_) + ": capture_time decreases");
        }
        last_time_ = sample.capture_time;

        if (pacing == Pacing::realtime && clock != nullptr) {
            if (!first_capture_) {
                first_capture_ = sample.capture_time;
                release_epoch_ = clock->now();
            } else if (!clock->sleep_until(release_epoch_ + (sample.capture_time - *first_capture_), stop,
                                           WakeOrder::ingest)) {
                return std::nullopt;
            }
        }
        return sample;
    }
    if (in_->bad()) {
        throw IngestError(IngestErrc::io_error, "read error in replay log");
    }
    return std::nullopt;
}

ReplayWriter::ReplayWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) {
        throw IngestError(IngestErrc::io_error, "cannot create replay log " + path.string());
    }
    out_ << kLogHeader << '\n';
}

void ReplayWriter::write(const RigidBodySample& sample) { out_ << format_ingest_record(sample) << '\n'; }

void ReplayWriter::flush() { out_.flush(); }

ReplaySource::ReplaySource(const std::filesystem::path& path, Pacing pacing, Clock& clock)
    : path_(path), reader_(path), pacing_(pacing), clock_(clock) {}

std::optional<RigidBodySample> ReplaySource::next(std::stop_token stop) {
    if (stop.stop_requested()) return std::nullopt;
    return reader_.replay_next(pacing_, &clock_, stop);
}

std::string ReplaySource::describe() const {
    return "replay " + path_.string() + (pacing_ == Pacing::realtime ? " (realtime)" : " (fast)");
}

}  // namespace mocaplink::ingest
