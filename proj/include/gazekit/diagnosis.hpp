#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazekit/detectors.hpp"
#include "gazekit/evaluation.hpp"

namespace gazekit {

enum class FlagCode {
    all_saccade_collapse,
    fixation_starvation,
    no_saccades,
    no_fixations,
    unit_suspect,
};

enum class Severity { info, warning, critical };

const char* to_string(FlagCode code);
const char* to_string(Severity severity);

/// Partial parameter proposal attached to a flag. Never auto-applied.
struct ParamSuggestion {
    std::optional<double> velocity_threshold_dps;
    std::optional<double> dispersion_threshold_deg;
    std::optional<double> min_fixation_s;
};

struct DiagnosisFlag {
    FlagCode code;
    Severity severity;
    nlohmann::ordered_json evidence;  // named numeric values from the inputs
    std::string suggestion;
    std::optional<ParamSuggestion> suggested_params;
};

struct SignalStats {
    std::optional<double> median_velocity_dps;  // absent without a velocity trace
    std::optional<double> p95_velocity_dps;
    double saccade_sample_ratio = 0.0;
};

struct DiagnosisReport {
    std::vector<DiagnosisFlag> flags;
    SignalStats signal_stats;

    bool has_critical() const;
};

/// Rule-based scan for degenerate detection outcomes. Metrics are optional
/// (ground truth may be unavailable); label- and velocity-based rules still
/// run without them. Pure function of its inputs: same metrics and result
/// always produce the same flags.
DiagnosisReport diagnose(const std::optional<MetricsReport>& metrics,
                         const DetectionResult& result);

nlohmann::ordered_json diagnosis_to_json(const DiagnosisReport& report);

/// Plain-text report with Results / Diagnosis / Recommendations / Conclusion
/// sections.
std::string render_diagnosis_text(const DiagnosisReport& report,
                                  const std::optional<MetricsReport>& metrics,
                                  const std::string& detector_name);

}  // namespace gazekit
