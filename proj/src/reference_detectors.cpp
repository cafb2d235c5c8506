#include "gazekit/reference_detectors.hpp"

#include <cmath>

#include "gazekit/errors.hpp"

namespace gazekit {

namespace {

// Local run-length scan so the reference path shares nothing with the
// production merge.
std::vector<EventSegment> scan_runs(const LabeledSeries& labels) {
    std::vector<EventSegment> out;
    std::size_t i = 0;
    while (i < labels.size()) {
        std::size_t j = i;
        while (j + 1 < labels.size() && labels.label[j + 1] == labels.label[i]) ++j;
        out.push_back(EventSegment{labels.label[i], i, j, labels.t[i], labels.t[j]});
        i = j + 1;
    }
    return out;
}

double dispersion_full_scan(const DegreeSeries& ds, std::size_t i, std::size_t j) {
    double min_x = ds.x_smooth[i], max_x = ds.x_smooth[i];
    double min_y = ds.y_smooth[i], max_y = ds.y_smooth[i];
    for (std::size_t k = i; k <= j; ++k) {
        min_x = std::min(min_x, ds.x_smooth[k]);
        max_x = std::max(max_x, ds.x_smooth[k]);
        min_y = std::min(min_y, ds.y_smooth[k]);
        max_y = std::max(max_y, ds.y_smooth[k]);
    }
    return (max_x - min_x) + (max_y - min_y);
}

}  // namespace

DetectionResult detect_ivt_reference(const DegreeSeries& ds, const IvtParams& p) {
    if (ds.empty()) throw EmptyInput("detect_ivt_reference: empty series");

    const std::size_t n = ds.size();
    std::vector<double> v(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double dx = ds.x_smooth[i] - ds.x_smooth[i - 1];
        const double dy = ds.y_smooth[i] - ds.y_smooth[i - 1];
        v[i] = std::sqrt(dx * dx + dy * dy) / ds.dt[i];
    }

    DetectionResult result;
    result.params_used = p;
    result.velocity_trace = v;
    result.labels.t = ds.t;
    result.labels.label.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        result.labels.label[i] =
            v[i] >= p.velocity_threshold_dps ? EventLabel::saccade : EventLabel::fixation;

    if (p.enforce_min_fix) {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && result.labels.label[j + 1] == result.labels.label[i]) ++j;
            if (result.labels.label[i] == EventLabel::fixation) {
                double t_min = ds.t[i], t_max = ds.t[i];
                for (std::size_t k = i; k <= j; ++k) {
                    t_min = std::min(t_min, ds.t[k]);
                    t_max = std::max(t_max, ds.t[k]);
                }
                if (t_max - t_min < p.min_fixation_s)
                    for (std::size_t k = i; k <= j; ++k)
                        result.labels.label[k] = EventLabel::saccade;
            }
            i = j + 1;
        }
    }

    result.segments = scan_runs(result.labels);
    return result;
}

DetectionResult detect_idt_reference(const DegreeSeries& ds, const IdtParams& p) {
    if (ds.empty()) throw EmptyInput("detect_idt_reference: empty series");

    const std::size_t n = ds.size();
    DetectionResult result;
    result.params_used = p;
    result.labels.t = ds.t;
    result.labels.label.assign(n, EventLabel::saccade);

    std::size_t i = 0;
    while (i < n) {
        std::size_t j0 = n;
        for (std::size_t j = i; j < n; ++j) {
            if (ds.t[j] - ds.t[i] >= p.min_fixation_s) {
                j0 = j;
                break;
            }
        }
        bool accepted = false;
        if (j0 < n && dispersion_full_scan(ds, i, j0) <= p.dispersion_threshold_deg) {
            std::size_t best = j0;
            for (std::size_t j = j0; j < n; ++j) {
                if (dispersion_full_scan(ds, i, j) <= p.dispersion_threshold_deg)
                    best = j;
                else
                    break;  // dispersion never shrinks as the window grows
            }
            for (std::size_t k = i; k <= best; ++k)
                result.labels.label[k] = EventLabel::fixation;
            result.fixation_windows.push_back(
                EventSegment{EventLabel::fixation, i, best, ds.t[i], ds.t[best]});
            i = best + 1;
            accepted = true;
        }
        if (!accepted) i += 1;
    }

    result.segments = scan_runs(result.labels);
    return result;
}

}  // namespace gazekit
