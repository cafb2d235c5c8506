#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "gazekit/preprocess.hpp"
#include "gazekit/types.hpp"

namespace gazekit {

using DetectorParams = std::variant<IvtParams, IdtParams>;

/// Per-sample labels plus their run-length segments. `segments` is always the
/// exact run-length encoding of `labels`, so the segment spans tile the
/// recording without overlap.
struct DetectionResult {
    LabeledSeries labels;
    std::vector<EventSegment> segments;
    DetectorParams params_used;
    std::optional<std::vector<double>> velocity_trace;  // velocity detector only
    // Dispersion detector only: every accepted window, in acceptance order.
    // Adjacent windows may merge into one segment in `segments`.
    std::vector<EventSegment> fixation_windows;
};

/// Maximal runs of equal labels; t_start/t_end come from the run's first and
/// last sample timestamps, so single-sample runs have zero duration.
std::vector<EventSegment> merge_segments(const LabeledSeries& labels);

/// Velocity-threshold classification: saccade iff v >= threshold, then merge
/// runs and, when enforce_min_fix is set, relabel every fixation run whose
/// timestamp span (max - min) is shorter than min_fixation_s as saccade.
DetectionResult detect_ivt(const DegreeSeries& ds, const IvtParams& p);

/// Dispersion-threshold classification over smoothed coordinates. For each
/// start index the shortest window meeting the duration constraint is tested
/// against the L1 dispersion bound (maxX-minX)+(maxY-minY) <= threshold; a
/// passing window is grown to its maximal right endpoint and labeled
/// fixation, otherwise the start sample is a saccade and the search advances
/// by one.
DetectionResult detect_idt(const DegreeSeries& ds, const IdtParams& p);

/// Convenience wrappers: conditioning (unit conversion, smoothing with the
/// params' window, robust deltas) followed by detection.
DetectionResult run_ivt(const GazeRecording& rec,
                        const std::optional<GeometryConfig>& geo,
                        const IvtParams& p);
DetectionResult run_idt(const GazeRecording& rec,
                        const std::optional<GeometryConfig>& geo,
                        const IdtParams& p);

}  // namespace gazekit
