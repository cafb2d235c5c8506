#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gazekit/types.hpp"

namespace gazekit {

struct AlignmentConfig {
    double asof_tolerance_s = 0.002;
};

struct MatchedPair {
    EventLabel truth;
    EventLabel pred;
};

struct AlignmentResult {
    std::vector<MatchedPair> pairs;
    std::size_t unmatched_gt = 0;
    std::size_t unmatched_pred = 0;
};

/// Nearest-neighbor as-of merge with ground truth as the anchor stream: every
/// truth sample picks the temporally nearest prediction (ties resolve to the
/// earlier one) and the pair is kept when |dt| <= tolerance. Both series must
/// be sorted ascending. Throws NoMatches when nothing survives the tolerance.
AlignmentResult align_asof(const LabeledSeries& pred, const LabeledSeries& truth,
                           const AlignmentConfig& cfg = {});

/// Precision/recall/F1 for one class. A metric whose denominator is zero is
/// left unset (serialized as null, rendered as "--"), never forced to 0.
struct ClassMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::size_t support = 0;
};

struct MetricsReport {
    ClassMetrics fixation;
    ClassMetrics saccade;
    // confusion[truth][pred], index 0 = fixation, 1 = saccade
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    std::size_t matched_samples = 0;
    std::size_t unmatched_gt = 0;
    std::size_t unmatched_pred = 0;
    std::string aggregation = "single";

    const ClassMetrics& for_label(EventLabel label) const {
        return label == EventLabel::fixation ? fixation : saccade;
    }
};

MetricsReport compute_metrics(const AlignmentResult& alignment);

/// Micro-average: pool confusion counts across reports, then re-derive.
MetricsReport merge_reports(std::span<const MetricsReport> reports);

/// Drops samples whose raw label is outside {fixation, saccade}; two-class
/// scoring only ever sees this filtered view.
LabeledSeries to_two_class_series(std::span<const double> t,
                                  std::span<const std::string> raw_labels);

nlohmann::ordered_json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

/// Fixed-width table with one row per detector/class combination:
/// detector, class, precision, recall, f1, support. Undefined cells show "--".
std::string render_metrics_table(
    std::span<const std::pair<std::string, MetricsReport>> rows);

}  // namespace gazekit
