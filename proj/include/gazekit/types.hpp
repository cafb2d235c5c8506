#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazekit {

/// The two event classes scored by the pipeline. There is deliberately no
/// noise/pursuit class; ground-truth samples outside this set are excluded
/// from evaluation at ingest time.
enum class EventLabel { fixation, saccade };

const char* to_string(EventLabel label);

/// Case-insensitive parse of "fixation"/"saccade"; anything else -> nullopt.
std::optional<EventLabel> parse_event_label(std::string_view text);

enum class CoordUnits { pixel, degree };
enum class TimeUnits { s, ms, us, ns };

const char* to_string(CoordUnits units);
const char* to_string(TimeUnits units);
std::optional<CoordUnits> parse_coord_units(std::string_view text);

/// One gaze sample. After cleaning, t is in seconds and x/y are finite.
struct GazeSample {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;

    bool operator==(const GazeSample&) const = default;
};

/// An ordered gaze stream plus the unit bookkeeping the detectors rely on.
/// coord_units is always declared by the producer, never inferred downstream.
struct GazeRecording {
    std::vector<GazeSample> samples;
    CoordUnits coord_units = CoordUnits::pixel;
    TimeUnits time_units_detected = TimeUnits::s;
    std::string source_id;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// Screen geometry for the small-angle pixel->degree conversion.
struct GeometryConfig {
    double pixel_pitch_mm = 0.0;
    double viewing_distance_mm = 0.0;

    bool valid() const { return pixel_pitch_mm > 0.0 && viewing_distance_mm > 0.0; }
};

/// Per-sample labels aligned one-to-one with the recording that produced them.
struct LabeledSeries {
    std::vector<double> t;
    std::vector<EventLabel> label;

    std::size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }
};

/// A maximal run of like-labeled samples. Indices are inclusive.
struct EventSegment {
    EventLabel label = EventLabel::fixation;
    std::size_t start_index = 0;
    std::size_t end_index = 0;
    double t_start = 0.0;
    double t_end = 0.0;

    double duration() const { return t_end - t_start; }
    std::size_t sample_count() const { return end_index - start_index + 1; }

    bool operator==(const EventSegment&) const = default;
};

/// Velocity-threshold detector parameters (defaults match the standard
/// 30 deg/s threshold and 60 ms minimum fixation).
struct IvtParams {
    double velocity_threshold_dps = 30.0;
    double min_fixation_s = 0.060;
    bool enforce_min_fix = true;
    int smooth_window = 3;

    bool operator==(const IvtParams&) const = default;
};

/// Dispersion-threshold detector parameters (1 deg span, 100 ms window).
struct IdtParams {
    double dispersion_threshold_deg = 1.0;
    double min_fixation_s = 0.100;
    int smooth_window = 3;

    bool operator==(const IdtParams&) const = default;
};

/// Returns every violated invariant as a message; empty means ok.
/// Total function: never throws, order of messages is fixed.
std::vector<std::string> validate_params(const IvtParams& p);
std::vector<std::string> validate_params(const IdtParams& p);

}  // namespace gazekit
