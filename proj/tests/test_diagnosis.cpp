#include <doctest.h>

#include "gazekit/diagnosis.hpp"

using namespace gazekit;

namespace {

DetectionResult make_result(std::size_t n_fix, std::size_t n_sacc, bool ivt,
                            std::optional<std::vector<double>> trace = std::nullopt) {
    DetectionResult result;
    const std::size_t n = n_fix + n_sacc;
    for (std::size_t i = 0; i < n; ++i) {
        result.labels.t.push_back(static_cast<double>(i) * 0.004);
        result.labels.label.push_back(i < n_fix ? EventLabel::fixation
                                                : EventLabel::saccade);
    }
    result.segments = merge_segments(result.labels);
    if (ivt)
        result.params_used = IvtParams{};
    else
        result.params_used = IdtParams{};
    result.velocity_trace = std::move(trace);
    return result;
}

MetricsReport make_metrics(double fp, double fr, double sp, double sr) {
    MetricsReport m;
    m.fixation.precision = fp;
    m.fixation.recall = fr;
    if (fp + fr > 0) m.fixation.f1 = 2 * fp * fr / (fp + fr);
    m.fixation.support = 1000;
    m.saccade.precision = sp;
    m.saccade.recall = sr;
    if (sp + sr > 0) m.saccade.f1 = 2 * sp * sr / (sp + sr);
    m.saccade.support = 100;
    m.matched_samples = 1100;
    return m;
}

std::vector<double> trace_with_p95(double p95_value, std::size_t n = 1000) {
    // 96% small values, top tail at p95_value and above.
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
        v.push_back(frac < 0.95 ? 10.0 : p95_value + (frac - 0.95) * 100.0);
    }
    return v;
}

}  // namespace

TEST_CASE("saccade collapse raises exactly one critical flag with a threshold proposal") {
    const MetricsReport metrics = make_metrics(1.0, 0.0025, 0.0998, 1.0);
    const DetectionResult result = make_result(5, 1995, true, trace_with_p95(180.0));
    const DiagnosisReport report = diagnose(metrics, result);

    std::size_t criticals = 0;
    const DiagnosisFlag* collapse = nullptr;
    for (const auto& flag : report.flags) {
        if (flag.severity == Severity::critical) {
            ++criticals;
            if (flag.code == FlagCode::all_saccade_collapse) collapse = &flag;
        }
    }
    CHECK(criticals == 1);
    REQUIRE(collapse != nullptr);
    REQUIRE(collapse->suggested_params.has_value());
    REQUIRE(collapse->suggested_params->velocity_threshold_dps.has_value());
    const double theta = *collapse->suggested_params->velocity_threshold_dps;
    CHECK(theta >= 30.0);
    CHECK(theta <= 100.0);
    CHECK(!collapse->evidence.empty());
}

TEST_CASE("the corrected balanced metrics raise no critical flags") {
    // A corrected run after raising the threshold: both classes balanced.
    const MetricsReport metrics = make_metrics(0.9697, 0.9672, 0.7099, 0.7265);
    const DetectionResult result = make_result(1500, 500, true, trace_with_p95(60.0));
    const DiagnosisReport report = diagnose(metrics, result);
    CHECK(!report.has_critical());
}

TEST_CASE("healthy metrics yield zero flags") {
    const MetricsReport metrics = make_metrics(0.97, 0.92, 0.80, 0.75);
    const DetectionResult result = make_result(1500, 500, true, trace_with_p95(55.0));
    const DiagnosisReport report = diagnose(metrics, result);
    CHECK(report.flags.empty());
}

TEST_CASE("zero predicted saccades raise NO_SACCADES with a dispersion hint for idt") {
    const DetectionResult result = make_result(2000, 0, false);
    const MetricsReport metrics = make_metrics(0.9071, 1.0, 0.0, 0.0);
    const DiagnosisReport report = diagnose(metrics, result);
    bool found = false;
    for (const auto& flag : report.flags) {
        if (flag.code == FlagCode::no_saccades) {
            found = true;
            CHECK(flag.severity == Severity::critical);
            CHECK(flag.suggestion.find("dispersion") != std::string::npos);
        }
    }
    CHECK(found);
}

TEST_CASE("zero predicted fixations raise NO_FIXATIONS") {
    const DetectionResult result = make_result(0, 500, true);
    const DiagnosisReport report = diagnose(std::nullopt, result);
    REQUIRE(report.flags.size() >= 1);
    CHECK(report.flags[0].code == FlagCode::no_fixations);
    CHECK(report.flags[0].severity == Severity::critical);
}

TEST_CASE("implausible median velocity raises the unit warning") {
    std::vector<double> trace(500, 5000.0);
    const DetectionResult result = make_result(100, 400, true, trace);
    const DiagnosisReport report = diagnose(std::nullopt, result);
    bool found = false;
    for (const auto& flag : report.flags)
        if (flag.code == FlagCode::unit_suspect) {
            found = true;
            CHECK(flag.severity == Severity::warning);
        }
    CHECK(found);
}

TEST_CASE("fixation starvation fires on its own but defers to the collapse flag") {
    // Starvation without collapse: saccade recall below the collapse cutoff.
    const MetricsReport starved = make_metrics(0.99, 0.01, 0.25, 0.90);
    const DetectionResult result = make_result(10, 1990, true, trace_with_p95(70.0));
    const DiagnosisReport report = diagnose(starved, result);
    bool has_starvation = false;
    for (const auto& flag : report.flags)
        if (flag.code == FlagCode::fixation_starvation) has_starvation = true;
    CHECK(has_starvation);

    // With a full collapse both patterns hold; only the collapse is flagged.
    const MetricsReport collapsed = make_metrics(1.0, 0.0025, 0.0998, 1.0);
    const DiagnosisReport collapse_report = diagnose(collapsed, result);
    for (const auto& flag : collapse_report.flags)
        CHECK(flag.code != FlagCode::fixation_starvation);
}

TEST_CASE("rules are pure functions of their inputs") {
    const MetricsReport metrics = make_metrics(1.0, 0.0025, 0.0998, 1.0);
    const DetectionResult result = make_result(5, 1995, true, trace_with_p95(80.0));
    const auto a = diagnosis_to_json(diagnose(metrics, result));
    const auto b = diagnosis_to_json(diagnose(metrics, result));
    CHECK(a == b);
}

TEST_CASE("signal stats are computed from the result") {
    const DetectionResult result = make_result(300, 100, true,
                                               std::vector<double>(400, 20.0));
    const DiagnosisReport report = diagnose(std::nullopt, result);
    CHECK(report.signal_stats.saccade_sample_ratio == doctest::Approx(0.25));
    REQUIRE(report.signal_stats.median_velocity_dps.has_value());
    CHECK(*report.signal_stats.median_velocity_dps == 20.0);

    const DetectionResult no_trace = make_result(300, 100, false);
    const DiagnosisReport report2 = diagnose(std::nullopt, no_trace);
    CHECK(!report2.signal_stats.median_velocity_dps.has_value());
}

TEST_CASE("text rendering carries the four report sections") {
    const MetricsReport metrics = make_metrics(1.0, 0.0025, 0.0998, 1.0);
    const DetectionResult result = make_result(5, 1995, true, trace_with_p95(180.0));
    const DiagnosisReport report = diagnose(metrics, result);
    const std::string text = render_diagnosis_text(report, metrics, "ivt");
    for (const char* heading : {"Results:", "Diagnosis:", "Recommendations:", "Conclusion:"})
        CHECK(text.find(heading) != std::string::npos);
    CHECK(text.find("ALL_SACCADE_COLLAPSE") != std::string::npos);
}

TEST_CASE("diagnosis JSON shape") {
    const DetectionResult result = make_result(0, 500, true);
    const auto j = diagnosis_to_json(diagnose(std::nullopt, result));
    REQUIRE(j.contains("flags"));
    REQUIRE(j.contains("signal_stats"));
    REQUIRE(j["flags"].is_array());
    REQUIRE(!j["flags"].empty());
    CHECK(j["flags"][0]["code"] == "NO_FIXATIONS");
    CHECK(j["flags"][0]["severity"] == "critical");
    CHECK(j["flags"][0].contains("evidence"));
    CHECK(j["signal_stats"]["median_velocity_dps"].is_null());
}
