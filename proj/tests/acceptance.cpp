// Acceptance suite: one line per criterion, PASS/FAIL/SKIP, nonzero exit on
// any failure. Criterion 3 is dataset-gated and skips when no dataset is
// provided via GAZECOM_CSV_DIR.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazekit/detectors.hpp"
#include "gazekit/diagnosis.hpp"
#include "gazekit/evaluation.hpp"
#include "gazekit/ingest.hpp"
#include "gazekit/llm.hpp"
#include "gazekit/preprocess.hpp"
#include "gazekit/reference_detectors.hpp"
#include "gazekit/synthetic.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace gazekit;

namespace {

struct Outcome {
    enum Kind { pass, fail, skip } kind = pass;
    std::string detail;
};

Outcome ok() { return {Outcome::pass, ""}; }
Outcome failed(const std::string& why) { return {Outcome::fail, why}; }
Outcome skipped(const std::string& why) { return {Outcome::skip, why}; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// --- criterion 1: oracle equivalence ---------------------------------------

Outcome oracle_equivalence() {
    std::mt19937_64 rng(20240901);
    const TimeUnits units[] = {TimeUnits::s, TimeUnits::ms, TimeUnits::us, TimeUnits::ns};
    const GeometryConfig geometry{0.25, 600.0};
    for (int round = 0; round < 100; ++round) {
        const std::size_t n = 10 + rng() % 1991;  // [10, 2000]
        const TimeUnits unit = units[round % 4];
        auto rec = testsupport::normalize_time(
            testsupport::random_recording(rng, n, unit, true));
        // Alternate coordinate units too; odd rounds run the pixel conversion.
        std::optional<GeometryConfig> geo;
        if (round % 2 == 1) {
            rec.coord_units = CoordUnits::pixel;
            geo = geometry;
        }
        const IvtParams ivt = testsupport::random_ivt_params(rng);
        const IdtParams idt = testsupport::random_idt_params(rng);

        const auto ds_ivt = prepare_degree_series(rec, geo, ivt.smooth_window);
        if (detect_ivt(ds_ivt, ivt).labels.label !=
            detect_ivt_reference(ds_ivt, ivt).labels.label)
            return failed("velocity-detector mismatch at round " + std::to_string(round));

        const auto ds_idt = prepare_degree_series(rec, geo, idt.smooth_window);
        if (detect_idt(ds_idt, idt).labels.label !=
            detect_idt_reference(ds_idt, idt).labels.label)
            return failed("dispersion-detector mismatch at round " + std::to_string(round));
    }
    return ok();
}

// --- criterion 2: synthetic recoverability ----------------------------------

Outcome synthetic_recoverability() {
    std::vector<MetricsReport> ivt_reports;
    std::vector<MetricsReport> idt_reports;
    for (std::uint64_t seed : {101, 202, 303}) {
        SyntheticConfig cfg;  // defaults pin the generator contract
        cfg.duration_s = 20.0;
        const SyntheticRecording synth = generate_scanpath(cfg, seed);

        const auto ivt = run_ivt(synth.recording, std::nullopt, IvtParams{});
        ivt_reports.push_back(
            compute_metrics(align_asof(ivt.labels, synth.truth, AlignmentConfig{})));

        const auto idt = run_idt(synth.recording, std::nullopt, IdtParams{});
        idt_reports.push_back(
            compute_metrics(align_asof(idt.labels, synth.truth, AlignmentConfig{})));
    }
    const MetricsReport ivt = merge_reports(ivt_reports);
    const MetricsReport idt = merge_reports(idt_reports);

    if (!ivt.fixation.f1 || *ivt.fixation.f1 < 0.95)
        return failed("velocity fixation F1 " +
                      (ivt.fixation.f1 ? fmt(*ivt.fixation.f1) : "--") + " < 0.95");
    if (!ivt.saccade.f1 || *ivt.saccade.f1 < 0.85)
        return failed("velocity saccade F1 " +
                      (ivt.saccade.f1 ? fmt(*ivt.saccade.f1) : "--") + " < 0.85");
    if (!idt.fixation.f1 || *idt.fixation.f1 < 0.90)
        return failed("dispersion fixation F1 " +
                      (idt.fixation.f1 ? fmt(*idt.fixation.f1) : "--") + " < 0.90");
    return ok();
}

// --- criterion 3: dataset-gated reproduction --------------------------------

Outcome dataset_reproduction() {
    const std::string dir = testsupport::env_or("GAZECOM_CSV_DIR", "");
    if (dir.empty()) return skipped("GAZECOM_CSV_DIR not set");
    if (!fs::is_directory(dir)) return skipped("GAZECOM_CSV_DIR is not a directory");

    std::optional<GeometryConfig> geometry;
    CoordUnits units = CoordUnits::degree;
    const fs::path geo_path = fs::path(dir) / "geometry.json";
    if (fs::exists(geo_path)) {
        const auto j = nlohmann::json::parse(testsupport::read_file(geo_path));
        geometry = GeometryConfig{j.value("pixel_pitch_mm", 0.0),
                                  j.value("viewing_distance_mm", 0.0)};
        units = CoordUnits::pixel;
    }

    std::vector<MetricsReport> ivt_reports;
    std::vector<MetricsReport> idt_reports;
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".csv") continue;
        ++files;
        const std::string bytes = testsupport::read_file(entry.path());
        const SchemaDescription schema = sniff_schema(bytes, 65536);
        const ColumnMapping mapping = infer_mapping(schema);
        if (!mapping.label_col) continue;
        CleanResult cleaned = clean(parse_table(bytes, schema), mapping, schema, {});
        cleaned.recording.coord_units = units;

        std::vector<double> t;
        for (const auto& s : cleaned.recording.samples) t.push_back(s.t);
        const LabeledSeries truth = to_two_class_series(t, *cleaned.truth_labels);
        if (truth.empty()) continue;

        const auto ivt = run_ivt(cleaned.recording, geometry, IvtParams{});
        ivt_reports.push_back(
            compute_metrics(align_asof(ivt.labels, truth, AlignmentConfig{})));
        const auto idt = run_idt(cleaned.recording, geometry, IdtParams{});
        idt_reports.push_back(
            compute_metrics(align_asof(idt.labels, truth, AlignmentConfig{})));
    }
    if (ivt_reports.empty())
        return skipped("no labeled csv files under GAZECOM_CSV_DIR (" +
                       std::to_string(files) + " csv files seen)");

    const MetricsReport ivt = merge_reports(ivt_reports);
    const MetricsReport idt = merge_reports(idt_reports);
    if (!ivt.fixation.f1 || std::abs(*ivt.fixation.f1 - 0.9756) > 0.05)
        return failed("velocity fixation F1 " +
                      (ivt.fixation.f1 ? fmt(*ivt.fixation.f1) : "--") +
                      " outside 0.9756 +/- 0.05");
    if (!idt.fixation.f1 || std::abs(*idt.fixation.f1 - 0.9495) > 0.05)
        return failed("dispersion fixation F1 " +
                      (idt.fixation.f1 ? fmt(*idt.fixation.f1) : "--") +
                      " outside 0.9495 +/- 0.05");
    return ok();
}

// --- criterion 4: invariant property suites ---------------------------------

Outcome invariant_min_fixation() {
    std::mt19937_64 rng(41);
    for (int round = 0; round < 200; ++round) {
        auto rec = testsupport::normalize_time(
            testsupport::random_recording(rng, 50 + rng() % 400, TimeUnits::ms, true));
        std::stable_sort(rec.samples.begin(), rec.samples.end(),
                         [](const GazeSample& a, const GazeSample& b) { return a.t < b.t; });
        IvtParams p = testsupport::random_ivt_params(rng);
        p.enforce_min_fix = true;
        const auto result = run_ivt(rec, std::nullopt, p);
        for (const auto& seg : result.segments)
            if (seg.label == EventLabel::fixation && seg.duration() < p.min_fixation_s)
                return failed("fixation segment of " + fmt(seg.duration()) +
                              " s < minimum " + fmt(p.min_fixation_s) + " s");
    }
    return ok();
}

Outcome invariant_dispersion_windows() {
    std::mt19937_64 rng(42);
    for (int round = 0; round < 200; ++round) {
        auto rec = testsupport::normalize_time(
            testsupport::random_recording(rng, 50 + rng() % 400, TimeUnits::s, true));
        std::stable_sort(rec.samples.begin(), rec.samples.end(),
                         [](const GazeSample& a, const GazeSample& b) { return a.t < b.t; });
        const IdtParams p = testsupport::random_idt_params(rng);
        const auto ds = prepare_degree_series(rec, std::nullopt, p.smooth_window);
        const auto result = detect_idt(ds, p);
        for (const auto& window : result.fixation_windows) {
            const std::size_t s = window.start_index;
            const std::size_t e = window.end_index;
            if (testsupport::dispersion_of(ds, s, e) > p.dispersion_threshold_deg)
                return failed("window dispersion exceeds the threshold");
            if (ds.t[e] - ds.t[s] < p.min_fixation_s)
                return failed("window shorter than the minimum duration");
            if (e + 1 < ds.size() &&
                testsupport::dispersion_of(ds, s, e + 1) <= p.dispersion_threshold_deg)
                return failed("window is not right-maximal");
        }
    }
    return ok();
}

Outcome invariant_velocity_translation() {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> offset(-50.0, 50.0);
    for (int round = 0; round < 200; ++round) {
        auto rec = testsupport::normalize_time(
            testsupport::random_recording(rng, 50 + rng() % 300, TimeUnits::s, true));
        GazeRecording shifted = rec;
        const double cx = offset(rng);
        const double cy = offset(rng);
        for (auto& s : shifted.samples) {
            s.x += cx;
            s.y += cy;
        }
        const auto v1 = angular_velocity(prepare_degree_series(rec, std::nullopt, 3));
        const auto v2 = angular_velocity(prepare_degree_series(shifted, std::nullopt, 3));
        for (std::size_t i = 0; i < v1.size(); ++i) {
            const double scale = std::max({1.0, std::abs(v1[i]), std::abs(v2[i])});
            if (std::abs(v1[i] - v2[i]) > 1e-9 * scale)
                return failed("velocity changed under translation by (" + fmt(cx) + "," +
                              fmt(cy) + ")");
        }
    }
    return ok();
}

Outcome invariant_metric_identities() {
    std::mt19937_64 rng(44);
    for (int round = 0; round < 200; ++round) {
        AlignmentResult alignment;
        const auto emit = [&](EventLabel truth, EventLabel pred, std::size_t count) {
            for (std::size_t i = 0; i < count; ++i)
                alignment.pairs.push_back({truth, pred});
        };
        emit(EventLabel::fixation, EventLabel::fixation, rng() % 100);
        emit(EventLabel::fixation, EventLabel::saccade, rng() % 100);
        emit(EventLabel::saccade, EventLabel::fixation, rng() % 100);
        emit(EventLabel::saccade, EventLabel::saccade, rng() % 100);
        if (alignment.pairs.empty())
            alignment.pairs.push_back({EventLabel::fixation, EventLabel::fixation});

        const MetricsReport report = compute_metrics(alignment);
        // two-class duality: FP(fixation) == FN(saccade), FP(saccade) == FN(fixation)
        const std::size_t fp_fix = report.confusion[1][0];
        const std::size_t fn_sac = report.confusion[1][0];
        const std::size_t fp_sac = report.confusion[0][1];
        const std::size_t fn_fix = report.confusion[0][1];
        if (fp_fix != fn_sac || fp_sac != fn_fix)
            return failed("confusion duality violated");

        // F1 equals the harmonic mean recomputed independently from counts.
        const auto check_f1 = [&](std::size_t tp, std::size_t fp, std::size_t fn,
                                  const ClassMetrics& m) -> bool {
            if (tp + fp == 0 || tp + fn == 0) return !m.f1.has_value();
            const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
            const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
            if (p + r == 0.0) return !m.f1.has_value();
            if (!m.f1) return false;
            return std::abs(*m.f1 - 2.0 * p * r / (p + r)) < 1e-12;
        };
        if (!check_f1(report.confusion[0][0], fp_fix, fn_fix, report.fixation))
            return failed("fixation F1 identity violated");
        if (!check_f1(report.confusion[1][1], fp_sac, fn_sac, report.saccade))
            return failed("saccade F1 identity violated");
    }
    return ok();
}

// --- criterion 5: formula spot checks ----------------------------------------

Outcome formula_spot_checks() {
    const double k = visual_angle_scale(GeometryConfig{0.25, 600.0});
    const double expected = (180.0 / std::numbers::pi) * 0.25 / 600.0;
    if (std::abs(k - expected) > 1e-12 * expected)
        return failed("angle scale differs from the closed form");

    const std::vector<double> t = {0.0, 1.0, 1.0, 2.0};
    const RobustDeltas rd = robust_deltas(t);
    if (rd.epsilon != 1.0) return failed("epsilon != 1 on [0,1,1,2]");
    if (rd.dt[2] != 1.0) return failed("dt[2] != 1 on [0,1,1,2]");

    const std::vector<double> flat = {5.0, 5.0, 5.0};
    const RobustDeltas fb = robust_deltas(flat);
    if (fb.epsilon != 1e-3) return failed("fallback epsilon != 1e-3");
    for (double dt : fb.dt)
        if (dt != 1e-3) return failed("fallback dt != 1e-3");
    return ok();
}

// --- criterion 6: diagnosis fixtures -----------------------------------------

Outcome diagnosis_fixtures() {
    auto make_metrics = [](double fp, double fr, double sp, double sr) {
        MetricsReport m;
        m.fixation.precision = fp;
        m.fixation.recall = fr;
        m.fixation.f1 = 2 * fp * fr / (fp + fr);
        m.saccade.precision = sp;
        m.saccade.recall = sr;
        m.saccade.f1 = 2 * sp * sr / (sp + sr);
        return m;
    };
    auto make_result = [](std::size_t n_fix, std::size_t n_sacc, double p95) {
        DetectionResult result;
        const std::size_t n = n_fix + n_sacc;
        for (std::size_t i = 0; i < n; ++i) {
            result.labels.t.push_back(static_cast<double>(i) * 0.004);
            result.labels.label.push_back(i < n_fix ? EventLabel::fixation
                                                    : EventLabel::saccade);
        }
        result.segments = merge_segments(result.labels);
        result.params_used = IvtParams{};
        std::vector<double> trace;
        for (std::size_t i = 0; i < n; ++i) {
            const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
            trace.push_back(frac < 0.95 ? 12.0 : p95 + (frac - 0.95) * 50.0);
        }
        result.velocity_trace = std::move(trace);
        return result;
    };

    const MetricsReport collapsed = make_metrics(1.0, 0.0025, 0.0998, 1.0);
    const DiagnosisReport report = diagnose(collapsed, make_result(5, 1995, 170.0));
    std::size_t criticals = 0;
    const DiagnosisFlag* collapse = nullptr;
    for (const auto& flag : report.flags)
        if (flag.severity == Severity::critical) {
            ++criticals;
            if (flag.code == FlagCode::all_saccade_collapse) collapse = &flag;
        }
    if (criticals != 1)
        return failed(std::to_string(criticals) + " critical flags, expected exactly 1");
    if (!collapse) return failed("the critical flag is not ALL_SACCADE_COLLAPSE");
    if (!collapse->suggested_params || !collapse->suggested_params->velocity_threshold_dps)
        return failed("no velocity-threshold suggestion attached");
    const double theta = *collapse->suggested_params->velocity_threshold_dps;
    if (theta < 30.0 || theta > 100.0)
        return failed("suggested threshold " + fmt(theta) + " outside [30, 100]");

    const MetricsReport corrected = make_metrics(0.9697, 0.9672, 0.7099, 0.7265);
    const DiagnosisReport healthy = diagnose(corrected, make_result(1400, 600, 55.0));
    if (healthy.has_critical())
        return failed("corrected second-run metrics still raise a critical flag");
    return ok();
}

// --- criterion 7: schema contract --------------------------------------------

Outcome schema_contract() {
    const std::string fixture = testsupport::read_file(testsupport::data_dir() /
                                                       "appendix_inspect.csv");
    if (fixture.empty()) return failed("fixture appendix_inspect.csv not found");
    const SchemaDescription sniffed = sniff_schema(fixture, 65536);

    // The JSON must validate against the contract parser.
    const SchemaDescription parsed =
        schema_from_json(nlohmann::json::parse(schema_to_json(sniffed).dump()));
    if (!(parsed == sniffed)) return failed("schema does not round-trip");

    const std::vector<std::string> expected_names = {"time", "x", "y", "confidence"};
    if (sniffed.columns.size() != 4) return failed("expected 4 columns");
    for (std::size_t i = 0; i < 4; ++i) {
        if (sniffed.columns[i].name != expected_names[i])
            return failed("column " + std::to_string(i) + " is '" +
                          sniffed.columns[i].name + "'");
        if (sniffed.columns[i].type_guess != "float")
            return failed("column " + sniffed.columns[i].name + " typed as " +
                          sniffed.columns[i].type_guess);
    }

    const std::string reference = testsupport::read_file(testsupport::data_dir() /
                                                         "appendix_schema.json");
    LlmProviderConfig cfg;
    cfg.endpoint_url = "http://mock";
    cfg.model_name = "mock";
    const Transport transport = [&](const std::string&) {
        nlohmann::json envelope;
        envelope["choices"] = nlohmann::json::array();
        envelope["choices"].push_back(
            {{"message",
              {{"role", "assistant"},
               {"content", "The file is a four-column csv table.\n\n" + reference}}}});
        return envelope.dump();
    };
    const SchemaDescription via_llm = infer_schema_llm(
        fixture, cfg, builtin_template(TemplateName::stage1_detailed), transport);
    if (!(via_llm == sniffed))
        return failed("provider-backed schema differs from the sniffed schema");
    return ok();
}

// --- criterion 8: pipeline determinism ----------------------------------------

Outcome pipeline_determinism() {
    const std::string cli = testsupport::env_or("GAZE_CLI", "");
    if (cli.empty()) return failed("GAZE_CLI not set; cannot run the pipeline binary");

    const auto dir = testsupport::fresh_temp_dir("acc-determinism");
    const auto input = dir / "rec.csv";
    {
        SyntheticConfig cfg;
        cfg.duration_s = 6.0;
        const SyntheticRecording synth = generate_scanpath(cfg, 555);
        std::ostringstream csv;
        csv << "time,x,y,label\n";
        for (std::size_t i = 0; i < synth.recording.size(); ++i) {
            const auto& s = synth.recording.samples[i];
            csv << format_double(s.t) << ',' << format_double(s.x) << ','
                << format_double(s.y) << ',' << to_string(synth.truth.label[i]) << "\n";
        }
        testsupport::write_file(input, csv.str());
    }

    // Identical invocation twice into the same directory; a snapshot taken
    // between the runs collects the first run's bytes.
    const std::string base = cli + " pipeline --offline --units degree '" +
                             input.string() + "' -o '" + (dir / "out").string() + "'";
    const auto a = testsupport::run_cmd(base);
    if (a.exit_code != 0) return failed("first pipeline run exited nonzero: " + a.err);
    fs::copy(dir / "out", dir / "snapshot", fs::copy_options::recursive);
    const auto b = testsupport::run_cmd(base);
    if (b.exit_code != 0) return failed("second pipeline run exited nonzero: " + b.err);

    auto collect = [](const fs::path& root) {
        std::vector<fs::path> rel;
        for (auto it = fs::recursive_directory_iterator(root);
             it != fs::recursive_directory_iterator(); ++it)
            if (it->is_regular_file()) rel.push_back(fs::relative(it->path(), root));
        std::sort(rel.begin(), rel.end());
        return rel;
    };
    const auto rel_a = collect(dir / "out");
    const auto rel_b = collect(dir / "snapshot");
    if (rel_a != rel_b) return failed("output file sets differ between runs");
    if (rel_a.size() < 8) return failed("suspiciously few output files");

    for (const auto& rel : rel_a) {
        const std::string bytes_a = testsupport::read_file(dir / "out" / rel);
        const std::string bytes_b = testsupport::read_file(dir / "snapshot" / rel);
        if (bytes_a != bytes_b) return failed("byte difference in " + rel.string());
    }
    fs::remove_all(dir);
    return ok();
}

struct Criterion {
    std::string name;
    double time_budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"oracle-equivalence (100 random recordings)", 30.0, oracle_equivalence},
        {"synthetic-recoverability (default params)", 10.0, synthetic_recoverability},
        {"dataset-reproduction (gated)", 0.0, dataset_reproduction},
        {"invariant: min-fixation enforcement", 60.0, invariant_min_fixation},
        {"invariant: dispersion windows", 60.0, invariant_dispersion_windows},
        {"invariant: velocity translation", 60.0, invariant_velocity_translation},
        {"invariant: metric identities", 60.0, invariant_metric_identities},
        {"formula spot checks", 0.0, formula_spot_checks},
        {"diagnosis fixtures", 0.0, diagnosis_fixtures},
        {"schema contract", 0.0, schema_contract},
        {"pipeline determinism", 0.0, pipeline_determinism},
    };

    int failures = 0;
    double invariants_total = 0.0;
    for (const auto& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome = failed(std::string("exception: ") + e.what());
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        if (criterion.name.rfind("invariant:", 0) == 0) invariants_total += elapsed;

        if (outcome.kind == Outcome::pass && criterion.time_budget_s > 0.0 &&
            elapsed > criterion.time_budget_s)
            outcome = failed("runtime " + fmt(elapsed) + " s exceeded budget " +
                             fmt(criterion.time_budget_s) + " s");

        const char* verdict = outcome.kind == Outcome::pass ? "PASS"
                              : outcome.kind == Outcome::skip ? "SKIP"
                                                              : "FAIL";
        std::printf("[%s] %-46s (%6.2f s)%s%s\n", verdict, criterion.name.c_str(),
                    elapsed, outcome.detail.empty() ? "" : " - ",
                    outcome.detail.c_str());
        if (outcome.kind == Outcome::fail) ++failures;
    }
    if (invariants_total > 60.0) {
        std::printf("[FAIL] invariant suites total runtime %.2f s exceeded 60 s\n",
                    invariants_total);
        ++failures;
    }
    return failures == 0 ? 0 : 1;
}
