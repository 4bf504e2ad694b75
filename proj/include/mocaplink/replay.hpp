#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>

#include "mocaplink/clock.hpp"
#include "mocaplink/ingest.hpp"

namespace mocaplink::ingest {

enum class Pacing { realtime, fast };

Pacing pacing_from_string(std::string_view name);

/// Reads a `#MOCAPLOG v1` log. Records must have non-decreasing capture_time.
class ReplayReader {
public:
    /// Throws IngestError(corrupt_log) if the header is missing or wrong.
    explicit ReplayReader(const std::filesystem::path& path);
    explicit ReplayReader(std::unique_ptr<std::istream> stream);

    /// Next sample, or nullopt at end of stream. In realtime pacing the call
    /// blocks until the record's capture_time offset (relative to the first
    /// record) has elapsed on `clock` since the first release.
    std::optional<RigidBodySample> replay_next(Pacing pacing, Clock* clock = nullptr, std::stop_token stop = {});

    std::size_t line_number() const { return line_; }

private:
    void read_header();

    std::unique_ptr<std::istream> in_;
    std::size_t line_ = 0;
    std::optional<double> last_time_;
    std::optional<double> first_capture_;
    double release_epoch_ = 0.0;
};

/// Writes a replay log; safe to call from one producer thread.
class ReplayWriter {
public:
    explicit ReplayWriter(const std::filesystem::path& path);
    void write(const RigidBodySample& sample);
    void flush();

private:
    std::ofstream out_;
};

class ReplaySource final : public SampleSource {
public:
    ReplaySource(const std::filesystem::path& path, Pacing pacing, Clock& clock);

    std::optional<RigidBodySample> next(std::stop_token stop) override;
    std::string describe() const override;

private:
    std::filesystem::path path_;
    ReplayReader reader_;
    Pacing pacing_;
    Clock& clock_;
};

}  // namespace mocaplink::ingest
