#include "gazekit/diagnosis.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "gazekit/preprocess.hpp"

namespace gazekit {

namespace {

// Rule cutoffs. The suggested threshold range matches the commonly accepted
// 30-100 deg/s operating band.
constexpr double kCollapseRecallMin = 0.99;
constexpr double kCollapsePrecisionMax = 0.30;
constexpr double kStarvationRecallMax = 0.05;
constexpr double kStarvationPrecisionMin = 0.90;
constexpr double kUnitSuspectMedianDps = 1000.0;
constexpr double kThetaSuggestLo = 30.0;
constexpr double kThetaSuggestHi = 100.0;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

}  // namespace

const char* to_string(FlagCode code) {
    switch (code) {
        case FlagCode::all_saccade_collapse: return "ALL_SACCADE_COLLAPSE";
        case FlagCode::fixation_starvation: return "FIXATION_STARVATION";
        case FlagCode::no_saccades: return "NO_SACCADES";
        case FlagCode::no_fixations: return "NO_FIXATIONS";
        case FlagCode::unit_suspect: return "UNIT_SUSPECT";
    }
    return "UNKNOWN";
}

const char* to_string(Severity severity) {
    switch (severity) {
        case Severity::info: return "info";
        case Severity::warning: return "warning";
        case Severity::critical: return "critical";
    }
    return "info";
}

bool DiagnosisReport::has_critical() const {
    return std::any_of(flags.begin(), flags.end(), [](const DiagnosisFlag& f) {
        return f.severity == Severity::critical;
    });
}

DiagnosisReport diagnose(const std::optional<MetricsReport>& metrics,
                         const DetectionResult& result) {
    DiagnosisReport report;

    std::size_t pred_fixation = 0;
    std::size_t pred_saccade = 0;
    for (EventLabel label : result.labels.label)
        (label == EventLabel::fixation ? pred_fixation : pred_saccade) += 1;
    const std::size_t total = result.labels.size();
    report.signal_stats.saccade_sample_ratio =
        total > 0 ? static_cast<double>(pred_saccade) / static_cast<double>(total) : 0.0;

    if (result.velocity_trace && !result.velocity_trace->empty()) {
        report.signal_stats.median_velocity_dps = median(*result.velocity_trace);
        report.signal_stats.p95_velocity_dps = percentile(*result.velocity_trace, 0.95);
    }

    const bool is_ivt = std::holds_alternative<IvtParams>(result.params_used);

    bool collapsed = false;
    if (metrics) {
        const ClassMetrics& sac = metrics->saccade;
        if (sac.recall && sac.precision && *sac.recall > kCollapseRecallMin &&
            *sac.precision < kCollapsePrecisionMax) {
            collapsed = true;
            DiagnosisFlag flag;
            flag.code = FlagCode::all_saccade_collapse;
            flag.severity = Severity::critical;
            flag.evidence["saccade_recall"] = *sac.recall;
            flag.evidence["saccade_precision"] = *sac.precision;
            std::string text =
                "nearly every sample was labeled saccade (saccade recall " +
                fmt(*sac.recall) + ", precision " + fmt(*sac.precision) + ").";
            if (is_ivt) {
                text += " Raise the velocity threshold and verify coordinate/time units";
                if (report.signal_stats.p95_velocity_dps) {
                    const double theta = std::clamp(*report.signal_stats.p95_velocity_dps,
                                                    kThetaSuggestLo, kThetaSuggestHi);
                    text += "; suggested threshold " + fmt1(theta) +
                            " deg/s (95th percentile of the velocity trace, clamped to "
                            "[30, 100] deg/s)";
                    ParamSuggestion ps;
                    ps.velocity_threshold_dps = theta;
                    flag.suggested_params = ps;
                }
                text += ".";
            } else {
                text += " Tighten the dispersion threshold and verify coordinate/time units.";
            }
            flag.suggestion = text;
            report.flags.push_back(std::move(flag));
        }

        const ClassMetrics& fix = metrics->fixation;
        if (!collapsed && fix.recall && fix.precision &&
            *fix.recall < kStarvationRecallMax && *fix.precision > kStarvationPrecisionMin) {
            DiagnosisFlag flag;
            flag.code = FlagCode::fixation_starvation;
            flag.severity = Severity::critical;
            flag.evidence["fixation_recall"] = *fix.recall;
            flag.evidence["fixation_precision"] = *fix.precision;
            flag.suggestion =
                "almost no fixations were recovered (fixation recall " + fmt(*fix.recall) +
                " at precision " + fmt(*fix.precision) +
                "); the detector is rejecting nearly all candidate fixations.";
            report.flags.push_back(std::move(flag));
        }
    }

    if (total > 0 && pred_saccade == 0) {
        DiagnosisFlag flag;
        flag.code = FlagCode::no_saccades;
        flag.severity = Severity::critical;
        flag.evidence["predicted_saccade_samples"] = 0;
        flag.evidence["predicted_fixation_samples"] = pred_fixation;
        flag.suggestion = is_ivt
            ? "no saccade was predicted; the velocity threshold is likely above the "
              "signal's velocity range — lower it."
            : "no saccade was predicted; the dispersion threshold or minimum fixation "
              "duration is overly strict for this recording — relax them.";
        report.flags.push_back(std::move(flag));
    }
    if (total > 0 && pred_fixation == 0) {
        DiagnosisFlag flag;
        flag.code = FlagCode::no_fixations;
        flag.severity = Severity::critical;
        flag.evidence["predicted_fixation_samples"] = 0;
        flag.evidence["predicted_saccade_samples"] = pred_saccade;
        flag.suggestion = is_ivt
            ? "no fixation was predicted; raise the velocity threshold or disable "
              "minimum-fixation enforcement to inspect the raw classification."
            : "no fixation was predicted; loosen the dispersion threshold or shorten "
              "the minimum fixation duration.";
        report.flags.push_back(std::move(flag));
    }

    if (report.signal_stats.median_velocity_dps &&
        *report.signal_stats.median_velocity_dps > kUnitSuspectMedianDps) {
        DiagnosisFlag flag;
        flag.code = FlagCode::unit_suspect;
        flag.severity = Severity::warning;
        flag.evidence["median_velocity_dps"] = *report.signal_stats.median_velocity_dps;
        flag.suggestion =
            "median sample velocity is " + fmt1(*report.signal_stats.median_velocity_dps) +
            " deg/s, far beyond physiological range; pixel coordinates may have been "
            "treated as degrees or the time unit was misdetected.";
        report.flags.push_back(std::move(flag));
    }

    return report;
}

namespace {

nlohmann::ordered_json suggestion_to_json(const ParamSuggestion& s) {
    nlohmann::ordered_json j;
    if (s.velocity_threshold_dps) j["velocity_threshold_dps"] = *s.velocity_threshold_dps;
    if (s.dispersion_threshold_deg) j["dispersion_threshold_deg"] = *s.dispersion_threshold_deg;
    if (s.min_fixation_s) j["min_fixation_s"] = *s.min_fixation_s;
    return j;
}

}  // namespace

nlohmann::ordered_json diagnosis_to_json(const DiagnosisReport& report) {
    nlohmann::ordered_json j;
    j["flags"] = nlohmann::ordered_json::array();
    for (const DiagnosisFlag& f : report.flags) {
        nlohmann::ordered_json jf;
        jf["code"] = to_string(f.code);
        jf["severity"] = to_string(f.severity);
        jf["evidence"] = f.evidence;
        jf["suggestion"] = f.suggestion;
        jf["suggested_params"] =
            f.suggested_params ? suggestion_to_json(*f.suggested_params)
                               : nlohmann::ordered_json(nullptr);
        j["flags"].push_back(std::move(jf));
    }
    auto stat = [](const std::optional<double>& v) -> nlohmann::ordered_json {
        if (v) return *v;
        return nullptr;
    };
    j["signal_stats"]["median_velocity_dps"] = stat(report.signal_stats.median_velocity_dps);
    j["signal_stats"]["p95_velocity_dps"] = stat(report.signal_stats.p95_velocity_dps);
    j["signal_stats"]["saccade_sample_ratio"] = report.signal_stats.saccade_sample_ratio;
    return j;
}

std::string render_diagnosis_text(const DiagnosisReport& report,
                                  const std::optional<MetricsReport>& metrics,
                                  const std::string& detector_name) {
    std::ostringstream os;
    os << "Results:\n";
    os << "  detector: " << detector_name << "\n";
    if (metrics) {
        auto line = [&](const char* name, const ClassMetrics& m) {
            auto cell = [](const std::optional<double>& v) {
                return v ? fmt(*v) : std::string("--");
            };
            os << "  " << name << ": precision " << cell(m.precision) << ", recall "
               << cell(m.recall) << ", F1 " << cell(m.f1) << " (support " << m.support
               << ")\n";
        };
        line("fixation", metrics->fixation);
        line("saccade ", metrics->saccade);
    } else {
        os << "  no ground truth supplied; label statistics only\n";
    }
    os << "  saccade sample share: " << fmt(report.signal_stats.saccade_sample_ratio)
       << "\n";
    if (report.signal_stats.median_velocity_dps)
        os << "  velocity: median " << fmt1(*report.signal_stats.median_velocity_dps)
           << " deg/s, p95 " << fmt1(*report.signal_stats.p95_velocity_dps) << " deg/s\n";

    os << "\nDiagnosis:\n";
    if (report.flags.empty()) {
        os << "  no anomalies detected.\n";
    } else {
        for (const DiagnosisFlag& f : report.flags)
            os << "  [" << to_string(f.severity) << "] " << to_string(f.code) << "\n";
    }

    os << "\nRecommendations:\n";
    if (report.flags.empty()) {
        os << "  none; the detection output looks healthy.\n";
    } else {
        for (const DiagnosisFlag& f : report.flags)
            os << "  - " << f.suggestion << "\n";
    }

    std::size_t criticals = 0;
    std::size_t warnings = 0;
    for (const DiagnosisFlag& f : report.flags) {
        if (f.severity == Severity::critical) ++criticals;
        if (f.severity == Severity::warning) ++warnings;
    }
    os << "\nConclusion:\n";
    if (criticals > 0)
        os << "  " << criticals << " critical flag(s), " << warnings
           << " warning(s); the detection output is degenerate. Adjust the suggested "
              "parameters and rerun before trusting these results.\n";
    else if (warnings > 0)
        os << "  " << warnings
           << " warning(s); results may be usable but deserve a closer look.\n";
    else
        os << "  detection output is consistent with a healthy operating regime.\n";
    return os.str();
}

}  // namespace gazekit
