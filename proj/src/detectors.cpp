#include "gazekit/detectors.hpp"

#include <algorithm>

#include "gazekit/errors.hpp"

namespace gazekit {

std::vector<EventSegment> merge_segments(const LabeledSeries& labels) {
    std::vector<EventSegment> segments;
    const std::size_t n = labels.size();
    if (n == 0) return segments;

    std::size_t start = 0;
    for (std::size_t i = 1; i <= n; ++i) {
        if (i == n || labels.label[i] != labels.label[start]) {
            segments.push_back(EventSegment{labels.label[start], start, i - 1,
                                            labels.t[start], labels.t[i - 1]});
            start = i;
        }
    }
    return segments;
}

namespace {

// Timestamp span of a run, robust to non-monotonic stamps.
double run_span(const std::vector<double>& t, std::size_t first, std::size_t last) {
    double lo = t[first];
    double hi = t[first];
    for (std::size_t i = first + 1; i <= last; ++i) {
        lo = std::min(lo, t[i]);
        hi = std::max(hi, t[i]);
    }
    return hi - lo;
}

}  // namespace

DetectionResult detect_ivt(const DegreeSeries& ds, const IvtParams& p) {
    if (ds.empty()) throw EmptyInput("detect_ivt: empty series");

    DetectionResult result;
    result.params_used = p;
    result.velocity_trace = angular_velocity(ds);
    const std::vector<double>& v = *result.velocity_trace;

    const std::size_t n = ds.size();
    result.labels.t = ds.t;
    result.labels.label.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        result.labels.label[i] =
            v[i] >= p.velocity_threshold_dps ? EventLabel::saccade : EventLabel::fixation;

    if (p.enforce_min_fix) {
        for (const EventSegment& seg : merge_segments(result.labels)) {
            if (seg.label != EventLabel::fixation) continue;
            if (run_span(ds.t, seg.start_index, seg.end_index) < p.min_fixation_s) {
                for (std::size_t i = seg.start_index; i <= seg.end_index; ++i)
                    result.labels.label[i] = EventLabel::saccade;
            }
        }
    }

    result.segments = merge_segments(result.labels);
    return result;
}

DetectionResult detect_idt(const DegreeSeries& ds, const IdtParams& p) {
    if (ds.empty()) throw EmptyInput("detect_idt: empty series");

    DetectionResult result;
    result.params_used = p;

    const std::size_t n = ds.size();
    const std::vector<double>& t = ds.t;
    const std::vector<double>& x = ds.x_smooth;
    const std::vector<double>& y = ds.y_smooth;

    result.labels.t = t;
    result.labels.label.assign(n, EventLabel::saccade);

    std::size_t i = 0;
    while (i < n) {
        // Smallest right endpoint meeting the duration constraint. Linear scan
        // keeps the predicate exact on non-monotonic stamps.
        std::size_t j0 = n;
        for (std::size_t j = i; j < n; ++j) {
            if (t[j] - t[i] >= p.min_fixation_s) {
                j0 = j;
                break;
            }
        }
        if (j0 < n) {
            double min_x = x[i], max_x = x[i];
            double min_y = y[i], max_y = y[i];
            for (std::size_t k = i + 1; k <= j0; ++k) {
                min_x = std::min(min_x, x[k]);
                max_x = std::max(max_x, x[k]);
                min_y = std::min(min_y, y[k]);
                max_y = std::max(max_y, y[k]);
            }
            if ((max_x - min_x) + (max_y - min_y) <= p.dispersion_threshold_deg) {
                // Grow to the maximal right endpoint still within the bound.
                std::size_t j = j0;
                while (j + 1 < n) {
                    const double nmin_x = std::min(min_x, x[j + 1]);
                    const double nmax_x = std::max(max_x, x[j + 1]);
                    const double nmin_y = std::min(min_y, y[j + 1]);
                    const double nmax_y = std::max(max_y, y[j + 1]);
                    if ((nmax_x - nmin_x) + (nmax_y - nmin_y) > p.dispersion_threshold_deg)
                        break;
                    min_x = nmin_x;
                    max_x = nmax_x;
                    min_y = nmin_y;
                    max_y = nmax_y;
                    ++j;
                }
                for (std::size_t k = i; k <= j; ++k)
                    result.labels.label[k] = EventLabel::fixation;
                result.fixation_windows.push_back(
                    EventSegment{EventLabel::fixation, i, j, t[i], t[j]});
                i = j + 1;
                continue;
            }
        }
        // No qualifying window from this start: the sample is a saccade.
        i += 1;
    }

    result.segments = merge_segments(result.labels);
    return result;
}

DetectionResult run_ivt(const GazeRecording& rec,
                        const std::optional<GeometryConfig>& geo,
                        const IvtParams& p) {
    return detect_ivt(prepare_degree_series(rec, geo, p.smooth_window), p);
}

DetectionResult run_idt(const GazeRecording& rec,
                        const std::optional<GeometryConfig>& geo,
                        const IdtParams& p) {
    return detect_idt(prepare_degree_series(rec, geo, p.smooth_window), p);
}

}  // namespace gazekit
