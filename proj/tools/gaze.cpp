// gaze: inspect / clean / detect / evaluate / diagnose / pipeline over raw
// eye-tracking tables. Config file plus flag overrides; flags win.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazekit/detectors.hpp"
#include "gazekit/diagnosis.hpp"
#include "gazekit/errors.hpp"
#include "gazekit/evaluation.hpp"
#include "gazekit/ingest.hpp"
#include "gazekit/llm.hpp"
#include "gazekit/types.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace gazekit;

namespace {

// Exit codes: 0 ok, 1 internal, 2 unreadable input / config conflict,
// 3 empty after cleaning, 4 missing geometry, 5 provider failure.
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUnreadable = 2;
constexpr int kExitEmpty = 3;
constexpr int kExitNoGeometry = 4;
constexpr int kExitProvider = 5;

struct AppConfig {
    std::vector<std::string> inputs;
    fs::path output_dir = "gaze-out";
    std::string detector = "both";  // ivt | idt | both
    std::optional<CoordUnits> units;
    std::optional<GeometryConfig> geometry;

    std::optional<std::string> time_col, x_col, y_col, label_col;
    CleanOptions clean_options;

    IvtParams ivt;
    IdtParams idt;
    AlignmentConfig alignment;

    bool offline = false;
    bool run_diagnosis = true;

    bool llm_enabled = false;
    LlmProviderConfig llm;
    std::string llm_template = "detailed";  // detailed | simple
    bool llm_fallback = false;
    std::size_t sample_chars = 65536;
};

// Flag values land here as optionals; only provided ones override the file.
struct FlagOverrides {
    std::optional<std::string> detector, units, time_col, x_col, y_col, label_col;
    std::optional<double> pitch_mm, distance_mm;
    std::optional<double> theta, delta;
    std::optional<double> ivt_min_fix_ms, idt_min_fix_ms;
    std::optional<int> smooth_window;
    bool no_enforce_min_fix = false;
    std::optional<double> tolerance_s;
    std::optional<double> min_confidence;
    std::optional<std::string> confidence_col;
    bool offline = false;
    bool no_diagnosis = false;
    bool llm = false;
    std::optional<std::string> llm_endpoint, llm_model, llm_key_env, llm_template;
    std::optional<double> llm_timeout_s;
    bool llm_fallback = false;
    std::optional<std::size_t> sample_chars;
    std::optional<std::string> output_dir;
};

std::string read_raw_bytes(const fs::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw UnreadableInput("cannot open file: " + path.string());
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot write file: " + path.string());
    file << text;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Re-throws with the pipeline stage name prefixed, keeping the error type so
// exit codes stay meaningful.
template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
    auto prefix = [&](const std::exception& e) { return name + ": " + e.what(); };
    try {
        return body();
    } catch (const UnreadableInput& e) {
        throw UnreadableInput(prefix(e));
    } catch (const EmptyAfterCleaning& e) {
        throw EmptyAfterCleaning(prefix(e));
    } catch (const MissingGeometry& e) {
        throw MissingGeometry(prefix(e));
    } catch (const ProviderTimeout& e) {
        throw ProviderTimeout(prefix(e));
    } catch (const SchemaValidationFailed& e) {
        throw SchemaValidationFailed(prefix(e), e.raw_response);
    } catch (const NoMatches& e) {
        throw NoMatches(prefix(e));
    } catch (const Error& e) {
        throw Error(prefix(e));
    }
}

// --- config file ----------------------------------------------------------

void config_from_json(const nlohmann::json& j, AppConfig& cfg) {
    if (j.contains("inputs")) cfg.inputs = j.at("inputs").get<std::vector<std::string>>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("detector")) cfg.detector = j.at("detector").get<std::string>();
    if (j.contains("coord_units")) {
        const auto units = parse_coord_units(j.at("coord_units").get<std::string>());
        if (!units) throw UnreadableInput("config: coord_units must be pixel or degree");
        cfg.units = units;
    }
    if (j.contains("geometry") && !j.at("geometry").is_null()) {
        GeometryConfig geo;
        geo.pixel_pitch_mm = j.at("geometry").value("pixel_pitch_mm", 0.0);
        geo.viewing_distance_mm = j.at("geometry").value("viewing_distance_mm", 0.0);
        cfg.geometry = geo;
    }
    if (j.contains("mapping")) {
        const auto& m = j.at("mapping");
        auto opt = [&](const char* key) -> std::optional<std::string> {
            if (!m.contains(key) || m.at(key).is_null()) return std::nullopt;
            return m.at(key).get<std::string>();
        };
        cfg.time_col = opt("time_col");
        cfg.x_col = opt("x_col");
        cfg.y_col = opt("y_col");
        cfg.label_col = opt("label_col");
    }
    if (j.contains("clean")) {
        const auto& c = j.at("clean");
        if (c.contains("min_confidence") && !c.at("min_confidence").is_null())
            cfg.clean_options.min_confidence = c.at("min_confidence").get<double>();
        if (c.contains("confidence_col") && !c.at("confidence_col").is_null())
            cfg.clean_options.confidence_col = c.at("confidence_col").get<std::string>();
    }
    if (j.contains("ivt")) {
        const auto& p = j.at("ivt");
        cfg.ivt.velocity_threshold_dps =
            p.value("velocity_threshold_dps", cfg.ivt.velocity_threshold_dps);
        if (p.contains("min_fixation_ms"))
            cfg.ivt.min_fixation_s = p.at("min_fixation_ms").get<double>() / 1000.0;
        cfg.ivt.enforce_min_fix = p.value("enforce_min_fix", cfg.ivt.enforce_min_fix);
        cfg.ivt.smooth_window = p.value("smooth_window", cfg.ivt.smooth_window);
    }
    if (j.contains("idt")) {
        const auto& p = j.at("idt");
        cfg.idt.dispersion_threshold_deg =
            p.value("dispersion_threshold_deg", cfg.idt.dispersion_threshold_deg);
        if (p.contains("min_fixation_ms"))
            cfg.idt.min_fixation_s = p.at("min_fixation_ms").get<double>() / 1000.0;
        cfg.idt.smooth_window = p.value("smooth_window", cfg.idt.smooth_window);
    }
    if (j.contains("alignment"))
        cfg.alignment.asof_tolerance_s =
            j.at("alignment").value("asof_tolerance_s", cfg.alignment.asof_tolerance_s);
    if (j.contains("offline")) cfg.offline = j.at("offline").get<bool>();
    if (j.contains("diagnosis")) cfg.run_diagnosis = j.at("diagnosis").get<bool>();
    if (j.contains("sample_chars"))
        cfg.sample_chars = j.at("sample_chars").get<std::size_t>();
    if (j.contains("llm")) {
        const auto& l = j.at("llm");
        cfg.llm_enabled = l.value("enabled", false);
        cfg.llm.endpoint_url = l.value("endpoint_url", cfg.llm.endpoint_url);
        cfg.llm.model_name = l.value("model_name", cfg.llm.model_name);
        cfg.llm.api_key_env_var = l.value("api_key_env_var", cfg.llm.api_key_env_var);
        cfg.llm.timeout_s = l.value("timeout_s", cfg.llm.timeout_s);
        cfg.llm.max_snippet_chars =
            l.value("max_snippet_chars", cfg.llm.max_snippet_chars);
        cfg.llm_template = l.value("template", cfg.llm_template);
        cfg.llm_fallback = l.value("fallback", cfg.llm_fallback);
    }
}

void apply_overrides(const FlagOverrides& flags, AppConfig& cfg) {
    if (flags.output_dir) cfg.output_dir = *flags.output_dir;
    if (flags.detector) cfg.detector = *flags.detector;
    if (flags.units) {
        const auto units = parse_coord_units(*flags.units);
        if (!units) throw UnreadableInput("--units must be pixel or degree");
        cfg.units = units;
    }
    if (flags.pitch_mm || flags.distance_mm) {
        GeometryConfig geo = cfg.geometry.value_or(GeometryConfig{});
        if (flags.pitch_mm) geo.pixel_pitch_mm = *flags.pitch_mm;
        if (flags.distance_mm) geo.viewing_distance_mm = *flags.distance_mm;
        cfg.geometry = geo;
    }
    if (flags.time_col) cfg.time_col = flags.time_col;
    if (flags.x_col) cfg.x_col = flags.x_col;
    if (flags.y_col) cfg.y_col = flags.y_col;
    if (flags.label_col) cfg.label_col = flags.label_col;
    if (flags.min_confidence) cfg.clean_options.min_confidence = flags.min_confidence;
    if (flags.confidence_col) cfg.clean_options.confidence_col = flags.confidence_col;
    if (flags.theta) cfg.ivt.velocity_threshold_dps = *flags.theta;
    if (flags.delta) cfg.idt.dispersion_threshold_deg = *flags.delta;
    if (flags.ivt_min_fix_ms) cfg.ivt.min_fixation_s = *flags.ivt_min_fix_ms / 1000.0;
    if (flags.idt_min_fix_ms) cfg.idt.min_fixation_s = *flags.idt_min_fix_ms / 1000.0;
    if (flags.smooth_window) {
        cfg.ivt.smooth_window = *flags.smooth_window;
        cfg.idt.smooth_window = *flags.smooth_window;
    }
    if (flags.no_enforce_min_fix) cfg.ivt.enforce_min_fix = false;
    if (flags.tolerance_s) cfg.alignment.asof_tolerance_s = *flags.tolerance_s;
    if (flags.offline) cfg.offline = true;
    if (flags.no_diagnosis) cfg.run_diagnosis = false;
    if (flags.llm) cfg.llm_enabled = true;
    if (flags.llm_endpoint) cfg.llm.endpoint_url = *flags.llm_endpoint;
    if (flags.llm_model) cfg.llm.model_name = *flags.llm_model;
    if (flags.llm_key_env) cfg.llm.api_key_env_var = *flags.llm_key_env;
    if (flags.llm_timeout_s) cfg.llm.timeout_s = *flags.llm_timeout_s;
    if (flags.llm_template) cfg.llm_template = *flags.llm_template;
    if (flags.llm_fallback) cfg.llm_fallback = true;
    if (flags.sample_chars) cfg.sample_chars = *flags.sample_chars;
}

ordered_json config_to_json(const AppConfig& cfg) {
    ordered_json j;
    j["inputs"] = cfg.inputs;
    j["output_dir"] = cfg.output_dir.string();
    j["detector"] = cfg.detector;
    j["coord_units"] =
        cfg.units ? ordered_json(to_string(*cfg.units)) : ordered_json(nullptr);
    if (cfg.geometry) {
        j["geometry"]["pixel_pitch_mm"] = cfg.geometry->pixel_pitch_mm;
        j["geometry"]["viewing_distance_mm"] = cfg.geometry->viewing_distance_mm;
    } else {
        j["geometry"] = nullptr;
    }
    auto opt_str = [](const std::optional<std::string>& v) {
        return v ? ordered_json(*v) : ordered_json(nullptr);
    };
    j["mapping"]["time_col"] = opt_str(cfg.time_col);
    j["mapping"]["x_col"] = opt_str(cfg.x_col);
    j["mapping"]["y_col"] = opt_str(cfg.y_col);
    j["mapping"]["label_col"] = opt_str(cfg.label_col);
    j["clean"]["min_confidence"] = cfg.clean_options.min_confidence
                                       ? ordered_json(*cfg.clean_options.min_confidence)
                                       : ordered_json(nullptr);
    j["clean"]["confidence_col"] = opt_str(cfg.clean_options.confidence_col);
    j["ivt"]["velocity_threshold_dps"] = cfg.ivt.velocity_threshold_dps;
    j["ivt"]["min_fixation_ms"] = cfg.ivt.min_fixation_s * 1000.0;
    j["ivt"]["enforce_min_fix"] = cfg.ivt.enforce_min_fix;
    j["ivt"]["smooth_window"] = cfg.ivt.smooth_window;
    j["idt"]["dispersion_threshold_deg"] = cfg.idt.dispersion_threshold_deg;
    j["idt"]["min_fixation_ms"] = cfg.idt.min_fixation_s * 1000.0;
    j["idt"]["smooth_window"] = cfg.idt.smooth_window;
    j["alignment"]["asof_tolerance_s"] = cfg.alignment.asof_tolerance_s;
    j["offline"] = cfg.offline;
    j["diagnosis"] = cfg.run_diagnosis;
    j["sample_chars"] = cfg.sample_chars;
    j["llm"]["enabled"] = cfg.llm_enabled;
    j["llm"]["endpoint_url"] = cfg.llm.endpoint_url;
    j["llm"]["model_name"] = cfg.llm.model_name;
    j["llm"]["api_key_env_var"] = cfg.llm.api_key_env_var;
    j["llm"]["timeout_s"] = cfg.llm.timeout_s;
    j["llm"]["max_snippet_chars"] = cfg.llm.max_snippet_chars;
    j["llm"]["template"] = cfg.llm_template;
    j["llm"]["fallback"] = cfg.llm_fallback;
    return j;
}

AppConfig build_config(const std::optional<std::string>& config_path,
                       const FlagOverrides& flags) {
    AppConfig cfg;
    if (config_path) {
        const std::string text = read_raw_bytes(*config_path);
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded())
            throw UnreadableInput("config file is not valid JSON: " + *config_path);
        config_from_json(j, cfg);
    }
    apply_overrides(flags, cfg);
    return cfg;
}

void check_llm_offline_conflict(const AppConfig& cfg) {
    if (cfg.llm_enabled && cfg.offline)
        throw UnreadableInput(
            "configuration error: LLM assistance requested but offline mode forbids "
            "network calls; drop --llm or --offline");
}

ordered_json params_to_json(const DetectorParams& params) {
    ordered_json j;
    if (const auto* p = std::get_if<IvtParams>(&params)) {
        j["detector"] = "ivt";
        j["velocity_threshold_dps"] = p->velocity_threshold_dps;
        j["min_fixation_s"] = p->min_fixation_s;
        j["enforce_min_fix"] = p->enforce_min_fix;
        j["smooth_window"] = p->smooth_window;
    } else {
        const auto& q = std::get<IdtParams>(params);
        j["detector"] = "idt";
        j["dispersion_threshold_deg"] = q.dispersion_threshold_deg;
        j["min_fixation_s"] = q.min_fixation_s;
        j["smooth_window"] = q.smooth_window;
    }
    return j;
}

ordered_json segments_to_json(const DetectionResult& result) {
    ordered_json j;
    j["params"] = params_to_json(result.params_used);
    j["segments"] = ordered_json::array();
    for (const EventSegment& seg : result.segments) {
        ordered_json js;
        js["label"] = to_string(seg.label);
        js["start_index"] = seg.start_index;
        js["end_index"] = seg.end_index;
        js["t_start"] = seg.t_start;
        js["t_end"] = seg.t_end;
        js["duration"] = seg.duration();
        j["segments"].push_back(std::move(js));
    }
    return j;
}

// --- schema + clean front end ---------------------------------------------

SchemaDescription obtain_schema(const std::string& bytes, const AppConfig& cfg,
                                std::ostream& log) {
    if (!cfg.llm_enabled) return sniff_schema(bytes, cfg.sample_chars);
    check_llm_offline_conflict(cfg);
    const TemplateName name = cfg.llm_template == "simple" ? TemplateName::stage1_simple
                                                           : TemplateName::stage1_detailed;
    try {
        return infer_schema_llm(bytes, cfg.llm, builtin_template(name),
                                http_transport(cfg.llm));
    } catch (const Error& e) {
        if (!cfg.llm_fallback) throw;
        log << "llm schema inference failed (" << e.what()
            << "); falling back to the offline sniffer\n";
        return sniff_schema(bytes, cfg.sample_chars);
    }
}

ColumnMapping resolve_mapping(const SchemaDescription& schema, const AppConfig& cfg) {
    ColumnMapping mapping = infer_mapping(schema);
    if (cfg.time_col) mapping.time_col = *cfg.time_col;
    if (cfg.x_col) mapping.x_col = *cfg.x_col;
    if (cfg.y_col) mapping.y_col = *cfg.y_col;
    if (cfg.label_col) mapping.label_col = cfg.label_col;
    if (mapping.time_col.empty() || mapping.x_col.empty() || mapping.y_col.empty())
        throw UnreadableInput(
            "could not identify time/x/y columns; pass --time-col/--x-col/--y-col");
    return mapping;
}

bool looks_precleaned(const std::string& bytes) {
    return bytes.rfind("time_s,", 0) == 0;
}

struct LoadedInput {
    CleanResult cleaned;
    std::optional<SchemaDescription> schema;  // absent for pre-cleaned files
    std::optional<ColumnMapping> mapping;
};

LoadedInput load_input(const fs::path& path, const AppConfig& cfg, std::ostream& log) {
    const std::string bytes = read_raw_bytes(path);
    LoadedInput out;
    if (looks_precleaned(bytes)) {
        out.cleaned = read_recording_csv(path);
    } else {
        out.schema = stage("inspect", [&] { return obtain_schema(bytes, cfg, log); });
        out.mapping = resolve_mapping(*out.schema, cfg);
        out.cleaned = stage("clean", [&] {
            const RawTable table = parse_table(bytes, *out.schema);
            return clean(table, *out.mapping, *out.schema, cfg.clean_options);
        });
    }
    if (cfg.units) out.cleaned.recording.coord_units = *cfg.units;
    out.cleaned.recording.source_id = path.string();
    return out;
}

void require_units(const AppConfig& cfg) {
    if (!cfg.units)
        throw UnreadableInput(
            "coordinate units must be declared: pass --units pixel|degree (or coord_units "
            "in the config file)");
}

// --- detection + evaluation per recording ----------------------------------

struct DetectorRun {
    std::string name;  // "ivt" | "idt"
    DetectionResult result;
    std::optional<MetricsReport> metrics;
    DiagnosisReport diagnosis;
};

std::vector<std::string> detectors_for(const std::string& selection) {
    if (selection == "ivt") return {"ivt"};
    if (selection == "idt") return {"idt"};
    if (selection == "both") return {"ivt", "idt"};
    throw UnreadableInput("detector must be ivt, idt, or both");
}

std::vector<DetectorRun> run_detectors(const LoadedInput& input, const AppConfig& cfg) {
    std::optional<LabeledSeries> truth;
    if (input.cleaned.truth_labels) {
        std::vector<double> t;
        t.reserve(input.cleaned.recording.size());
        for (const GazeSample& s : input.cleaned.recording.samples) t.push_back(s.t);
        LabeledSeries filtered = to_two_class_series(t, *input.cleaned.truth_labels);
        if (!filtered.empty()) truth = std::move(filtered);
    }

    std::vector<DetectorRun> runs;
    for (const std::string& name : detectors_for(cfg.detector)) {
        DetectorRun run;
        run.name = name;
        run.result = stage("detect", [&] {
            return name == "ivt" ? run_ivt(input.cleaned.recording, cfg.geometry, cfg.ivt)
                                 : run_idt(input.cleaned.recording, cfg.geometry, cfg.idt);
        });
        if (truth) {
            run.metrics = stage("evaluate", [&] {
                return compute_metrics(align_asof(run.result.labels, *truth, cfg.alignment));
            });
        }
        run.diagnosis = diagnose(run.metrics, run.result);
        runs.push_back(std::move(run));
    }
    return runs;
}

ordered_json write_detection_outputs(const fs::path& outdir, const fs::path& input,
                                     const std::vector<DetectorRun>& runs,
                                     bool with_diagnosis) {
    fs::create_directories(outdir);
    const bool multiple = runs.size() > 1;
    const std::string stem = input.stem().string();

    ordered_json summary;
    summary["input"] = input.string();
    ordered_json metrics_json;
    bool any_metrics = false;

    for (const DetectorRun& run : runs) {
        const std::string file_stem = multiple ? stem + "." + run.name : stem;
        const fs::path labels_path = outdir / (file_stem + ".labels.csv");
        const fs::path segments_path = outdir / (file_stem + ".segments.json");
        write_labels_csv(labels_path, run.result.labels);
        write_text(segments_path, segments_to_json(run.result).dump(2) + "\n");
        summary["detectors"][run.name]["labels"] = labels_path.filename().string();
        summary["detectors"][run.name]["segments"] = segments_path.filename().string();
        summary["detectors"][run.name]["params"] = params_to_json(run.result.params_used);
        if (run.metrics) {
            metrics_json[run.name] = metrics_to_json(*run.metrics);
            any_metrics = true;
        }
        if (with_diagnosis) {
            const fs::path dj = outdir / (file_stem + ".diagnosis.json");
            const fs::path dt = outdir / (file_stem + ".diagnosis.txt");
            write_text(dj, diagnosis_to_json(run.diagnosis).dump(2) + "\n");
            write_text(dt, render_diagnosis_text(run.diagnosis, run.metrics, run.name));
            summary["detectors"][run.name]["diagnosis"] = dj.filename().string();
        }
    }
    if (any_metrics) {
        const fs::path metrics_path = outdir / (stem + ".metrics.json");
        write_text(metrics_path, metrics_json.dump(2) + "\n");
        summary["metrics"] = metrics_path.filename().string();
    }
    return summary;
}

std::string metrics_table_for_runs(const std::vector<DetectorRun>& runs) {
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (const DetectorRun& run : runs)
        if (run.metrics) rows.emplace_back(run.name, *run.metrics);
    if (rows.empty()) return {};
    return render_metrics_table(rows);
}

// --- subcommands ------------------------------------------------------------

int cmd_inspect(const fs::path& file, const AppConfig& cfg, bool json_only) {
    check_llm_offline_conflict(cfg);
    const std::string bytes = read_raw_bytes(file);
    const SchemaDescription schema = obtain_schema(bytes, cfg, std::cerr);
    std::cout << schema_to_json(schema).dump(2) << "\n";
    if (!json_only) {
        std::cout << "\n" << file.string() << ": " << to_string(schema.format) << ", "
                  << schema.columns.size() << " column(s), header "
                  << (schema.has_header ? "present" : "absent") << ", "
                  << schema.row_count_estimate << " rows, missing-value patterns: ";
        if (schema.missing_values_patterns.empty()) {
            std::cout << "none observed";
        } else {
            for (std::size_t i = 0; i < schema.missing_values_patterns.size(); ++i)
                std::cout << (i ? ", " : "") << '"' << schema.missing_values_patterns[i]
                          << '"';
        }
        std::cout << ".\n";
        for (const ColumnSchema& col : schema.columns)
            std::cout << "  - " << col.name << ": " << col.type_guess
                      << (col.nullable ? " (nullable)" : "") << "\n";
    }
    return kExitOk;
}

int cmd_clean(const fs::path& file, const AppConfig& cfg,
              const std::optional<std::string>& out_path, bool json_only) {
    const LoadedInput input = load_input(file, cfg, std::cerr);
    const fs::path out = out_path ? fs::path(*out_path)
                                  : fs::path(file.stem().string() + ".cleaned.csv");
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_recording_csv(out, input.cleaned.recording, input.cleaned.truth_labels);
    ordered_json j = clean_report_to_json(input.cleaned.report);
    j["output"] = out.string();
    std::cout << j.dump(2) << "\n";
    if (!json_only)
        std::cout << "kept " << input.cleaned.report.kept << "/"
                  << input.cleaned.report.input_rows << " rows -> " << out.string()
                  << "\n";
    return kExitOk;
}

int cmd_detect(const fs::path& file, const AppConfig& cfg, bool with_diagnosis,
               bool json_only) {
    require_units(cfg);
    const LoadedInput input = load_input(file, cfg, std::cerr);
    const std::vector<DetectorRun> runs = run_detectors(input, cfg);
    const ordered_json summary =
        write_detection_outputs(cfg.output_dir, file, runs, with_diagnosis);
    if (json_only) {
        std::cout << summary.dump(2) << "\n";
    } else {
        const std::string table = metrics_table_for_runs(runs);
        if (!table.empty()) std::cout << table;
        std::cout << "outputs written to " << cfg.output_dir.string() << "\n";
    }
    return kExitOk;
}

LabeledSeries load_truth_series(const fs::path& path, const AppConfig& cfg) {
    const std::string bytes = read_raw_bytes(path);
    if (bytes.rfind("time_s,label", 0) == 0) return read_labels_csv(path);
    if (looks_precleaned(bytes)) {
        CleanResult cleaned = read_recording_csv(path);
        if (!cleaned.truth_labels)
            throw UnreadableInput("truth file has no label column: " + path.string());
        std::vector<double> t;
        for (const GazeSample& s : cleaned.recording.samples) t.push_back(s.t);
        return to_two_class_series(t, *cleaned.truth_labels);
    }
    AppConfig truth_cfg = cfg;
    truth_cfg.llm_enabled = false;  // truth loading stays deterministic
    std::ostringstream sink;
    const LoadedInput input = load_input(path, truth_cfg, sink);
    if (!input.cleaned.truth_labels)
        throw UnreadableInput("truth file has no label column: " + path.string());
    std::vector<double> t;
    for (const GazeSample& s : input.cleaned.recording.samples) t.push_back(s.t);
    return to_two_class_series(t, *input.cleaned.truth_labels);
}

int cmd_evaluate(const fs::path& pred_path, const fs::path& truth_path,
                 const AppConfig& cfg, const std::optional<std::string>& out_path,
                 bool json_only) {
    const LabeledSeries pred = read_labels_csv(pred_path);
    const LabeledSeries truth = load_truth_series(truth_path, cfg);
    if (truth.empty())
        throw UnreadableInput("truth series contains no fixation/saccade samples");
    const MetricsReport report = compute_metrics(align_asof(pred, truth, cfg.alignment));
    const ordered_json j = metrics_to_json(report);
    if (out_path) write_text(*out_path, j.dump(2) + "\n");
    if (json_only) {
        std::cout << j.dump(2) << "\n";
    } else {
        const std::vector<std::pair<std::string, MetricsReport>> rows = {{"pred", report}};
        std::cout << render_metrics_table(rows);
    }
    return kExitOk;
}

int cmd_diagnose(const fs::path& labels_path,
                 const std::optional<std::string>& metrics_path,
                 const std::string& detector, const AppConfig& cfg,
                 const std::optional<std::string>& out_path, bool json_only) {
    check_llm_offline_conflict(cfg);
    DetectionResult result;
    result.labels = read_labels_csv(labels_path);
    if (result.labels.empty()) throw UnreadableInput("labels file is empty");
    result.segments = merge_segments(result.labels);
    if (detector == "idt")
        result.params_used = cfg.idt;
    else
        result.params_used = cfg.ivt;

    std::optional<MetricsReport> metrics;
    if (metrics_path) {
        nlohmann::json mj =
            nlohmann::json::parse(read_raw_bytes(*metrics_path), nullptr, false);
        if (mj.is_discarded())
            throw UnreadableInput("metrics file is not valid JSON: " + *metrics_path);
        // Accept either a bare report or a {detector: report} bundle.
        if (mj.contains("per_class")) metrics = metrics_from_json(mj);
        else if (mj.contains(detector)) metrics = metrics_from_json(mj.at(detector));
        else throw UnreadableInput("metrics file has no report for detector " + detector);
    }

    if (cfg.llm_enabled) {
        if (!metrics) throw UnreadableInput("--llm diagnosis requires --metrics");
        try {
            const DiagnosisNarrative narrative = diagnose_llm(
                *metrics, cfg.llm, builtin_template(TemplateName::stage3_diagnose),
                http_transport(cfg.llm));
            std::cout << narrative.narrative << "\n";
            if (!narrative.suggestions.empty()) {
                ordered_json js = ordered_json::array();
                for (const ExtractedSuggestion& s : narrative.suggestions)
                    js.push_back({{"context", s.context}, {"value", s.value}});
                std::cout << "\nextracted suggestions: " << js.dump() << "\n";
            }
            return kExitOk;
        } catch (const Error& e) {
            if (!cfg.llm_fallback) throw;
            std::cerr << "llm diagnosis failed (" << e.what()
                      << "); falling back to the rule engine\n";
        }
    }

    const DiagnosisReport report = diagnose(metrics, result);
    const ordered_json j = diagnosis_to_json(report);
    if (out_path) write_text(*out_path, j.dump(2) + "\n");
    if (json_only)
        std::cout << j.dump(2) << "\n";
    else
        std::cout << render_diagnosis_text(report, metrics, detector);
    return kExitOk;
}

// --- pipeline ---------------------------------------------------------------

struct PipelineFileOutcome {
    ordered_json summary;
    std::string log;
    std::string table;
    std::vector<std::pair<std::string, MetricsReport>> metrics;  // detector -> report
};

PipelineFileOutcome pipeline_one(const fs::path& input, const AppConfig& cfg) {
    PipelineFileOutcome outcome;
    std::ostringstream log;

    const std::string bytes = read_raw_bytes(input);
    const std::string stem = input.stem().string();

    LoadedInput loaded;
    const fs::path cleaned_path = cfg.output_dir / (stem + ".cleaned.csv");
    if (looks_precleaned(bytes)) {
        loaded.cleaned = read_recording_csv(input);
        log << "clean[" << stem << "]: input already cleaned\n";
    } else {
        const SchemaDescription schema =
            stage("inspect", [&] { return obtain_schema(bytes, cfg, log); });
        write_text(cfg.output_dir / (stem + ".schema.json"),
                   schema_to_json(schema).dump(2) + "\n");
        const ColumnMapping mapping = resolve_mapping(schema, cfg);

        // Content-hash cache over input bytes + everything that shapes cleaning.
        ordered_json clean_key;
        clean_key["schema"] = schema_to_json(schema);
        clean_key["mapping"] = {{"time", mapping.time_col},
                                {"x", mapping.x_col},
                                {"y", mapping.y_col},
                                {"label", mapping.label_col ? *mapping.label_col : ""}};
        clean_key["min_confidence"] = cfg.clean_options.min_confidence
                                          ? ordered_json(*cfg.clean_options.min_confidence)
                                          : ordered_json(nullptr);
        const std::string key = hex64(fnv1a(bytes)) + "-" + hex64(fnv1a(clean_key.dump()));
        const fs::path cache_dir = cfg.output_dir / ".cache";
        const fs::path cache_file = cache_dir / (key + ".cleaned.csv");

        if (fs::exists(cache_file)) {
            loaded.cleaned = read_recording_csv(cache_file);
            log << "clean[" << stem << "]: cache hit (" << key << ")\n";
        } else {
            loaded.cleaned = stage("clean", [&] {
                const RawTable table = parse_table(bytes, schema);
                return clean(table, mapping, schema, cfg.clean_options);
            });
            fs::create_directories(cache_dir);
            write_recording_csv(cache_file, loaded.cleaned.recording,
                                loaded.cleaned.truth_labels);
            log << "clean[" << stem << "]: cache miss (" << key << ")\n";
        }
    }
    if (cfg.units) loaded.cleaned.recording.coord_units = *cfg.units;
    loaded.cleaned.recording.source_id = input.string();
    write_recording_csv(cleaned_path, loaded.cleaned.recording,
                        loaded.cleaned.truth_labels);

    const std::vector<DetectorRun> runs = run_detectors(loaded, cfg);
    outcome.summary =
        write_detection_outputs(cfg.output_dir, input, runs, cfg.run_diagnosis);
    outcome.summary["cleaned"] = cleaned_path.filename().string();
    outcome.summary["clean_report"] = clean_report_to_json(loaded.cleaned.report);
    for (const DetectorRun& run : runs)
        if (run.metrics) outcome.metrics.emplace_back(run.name, *run.metrics);
    outcome.table = metrics_table_for_runs(runs);
    outcome.log = log.str();
    return outcome;
}

int cmd_pipeline(const AppConfig& cfg, bool json_only) {
    check_llm_offline_conflict(cfg);
    if (cfg.inputs.empty())
        throw UnreadableInput("pipeline requires at least one input file");
    require_units(cfg);

    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "effective_config.json",
               config_to_json(cfg).dump(2) + "\n");

    // Parallel across files; outputs are per-file paths so no write contention.
    std::vector<std::future<PipelineFileOutcome>> futures;
    futures.reserve(cfg.inputs.size());
    for (const std::string& input : cfg.inputs)
        futures.push_back(std::async(std::launch::async, [&cfg, input] {
            return pipeline_one(fs::path(input), cfg);
        }));

    ordered_json summary;
    summary["inputs"] = ordered_json::array();
    std::string tables;
    std::string logs;
    std::map<std::string, std::vector<MetricsReport>> pooled;
    for (auto& future : futures) {
        PipelineFileOutcome outcome = future.get();
        summary["inputs"].push_back(std::move(outcome.summary));
        for (auto& [detector, report] : outcome.metrics)
            pooled[detector].push_back(std::move(report));
        tables += outcome.table;
        logs += outcome.log;
    }

    // Micro-averaged pooled metrics across inputs (per-recording reports stay
    // in the per-file artifacts).
    if (!pooled.empty() && cfg.inputs.size() > 1) {
        std::vector<std::pair<std::string, MetricsReport>> pooled_rows;
        for (const auto& [detector, reports] : pooled) {
            const MetricsReport merged = merge_reports(reports);
            summary["pooled_metrics"][detector] = metrics_to_json(merged);
            pooled_rows.emplace_back(detector, merged);
        }
        tables += "pooled (micro):\n" + render_metrics_table(pooled_rows);
    }

    write_text(cfg.output_dir / "pipeline_summary.json", summary.dump(2) + "\n");
    std::cerr << logs;
    if (json_only) {
        std::cout << summary.dump(2) << "\n";
    } else {
        if (!tables.empty()) std::cout << tables;
        std::cout << "pipeline outputs written to " << cfg.output_dir.string() << "\n";
    }
    return kExitOk;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const UnreadableInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUnreadable;
    } catch (const EmptyAfterCleaning& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEmpty;
    } catch (const MissingGeometry& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoGeometry;
    } catch (const ProviderTimeout& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const SchemaValidationFailed& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixation/saccade event detection over raw eye-tracking tables"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    FlagOverrides flags;
    bool json_only = false;
    bool detect_diagnose = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_flag("--offline", flags.offline, "forbid any network call");
        sub->add_flag("--json", json_only, "machine-readable stdout");
        sub->add_option("-o,--output-dir", flags.output_dir, "output directory");
        sub->add_flag("--llm", flags.llm, "use the chat-completion provider");
        sub->add_option("--llm-endpoint", flags.llm_endpoint, "chat-completion URL");
        sub->add_option("--llm-model", flags.llm_model, "model name");
        sub->add_option("--llm-key-env", flags.llm_key_env,
                        "environment variable holding the API key");
        sub->add_option("--llm-timeout", flags.llm_timeout_s, "provider timeout, seconds");
        sub->add_option("--llm-template", flags.llm_template,
                        "stage-1 template: detailed|simple");
        sub->add_flag("--llm-fallback", flags.llm_fallback,
                      "fall back to offline paths on provider failure");
        sub->add_option("--sample-chars", flags.sample_chars,
                        "max snippet characters for schema inference");
    };
    auto add_mapping = [&](CLI::App* sub) {
        sub->add_option("--time-col", flags.time_col, "timestamp column name");
        sub->add_option("--x-col", flags.x_col, "x column name");
        sub->add_option("--y-col", flags.y_col, "y column name");
        sub->add_option("--label-col", flags.label_col, "ground-truth label column name");
        sub->add_option("--min-confidence", flags.min_confidence,
                        "drop samples below this confidence");
        sub->add_option("--confidence-col", flags.confidence_col,
                        "confidence column name");
    };
    auto add_detection = [&](CLI::App* sub) {
        sub->add_option("--detector", flags.detector, "ivt|idt|both");
        sub->add_option("--units", flags.units, "coordinate units: pixel|degree");
        sub->add_option("--pitch-mm", flags.pitch_mm, "pixel pitch, millimeters");
        sub->add_option("--distance-mm", flags.distance_mm,
                        "viewing distance, millimeters");
        sub->add_option("--theta", flags.theta, "velocity threshold, deg/s");
        sub->add_option("--ivt-min-fix-ms", flags.ivt_min_fix_ms,
                        "minimum fixation duration for the velocity detector, ms");
        sub->add_flag("--no-enforce-min-fix", flags.no_enforce_min_fix,
                      "keep sub-minimum fixation runs");
        sub->add_option("--delta", flags.delta, "dispersion threshold, degrees");
        sub->add_option("--idt-min-fix-ms", flags.idt_min_fix_ms,
                        "minimum fixation duration for the dispersion detector, ms");
        sub->add_option("--smooth-window", flags.smooth_window,
                        "median smoothing window (odd)");
        sub->add_option("--tolerance", flags.tolerance_s, "as-of matching tolerance, s");
    };

    std::string file_arg;
    std::string truth_arg;
    std::vector<std::string> input_args;
    std::optional<std::string> out_file;
    std::optional<std::string> metrics_file;
    std::string diagnose_detector = "ivt";

    CLI::App* inspect = app.add_subcommand("inspect", "infer file structure");
    inspect->add_option("file", file_arg, "input file")->required();
    add_common(inspect);

    CLI::App* clean_cmd = app.add_subcommand("clean", "clean and normalize a recording");
    clean_cmd->add_option("file", file_arg, "input file")->required();
    clean_cmd->add_option("--out", out_file, "cleaned CSV path");
    add_common(clean_cmd);
    add_mapping(clean_cmd);

    CLI::App* detect = app.add_subcommand("detect", "label fixations and saccades");
    detect->add_option("file", file_arg, "input file")->required();
    detect->add_flag("--diagnose", detect_diagnose, "also write a diagnosis report");
    add_common(detect);
    add_mapping(detect);
    add_detection(detect);

    CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against truth");
    evaluate->add_option("pred", file_arg, "predicted labels CSV (time_s,label)")
        ->required();
    evaluate->add_option("truth", truth_arg, "ground-truth file")->required();
    evaluate->add_option("--out", out_file, "metrics JSON path");
    evaluate->add_option("--tolerance", flags.tolerance_s, "as-of matching tolerance, s");
    add_common(evaluate);
    add_mapping(evaluate);

    CLI::App* diagnose_cmd = app.add_subcommand("diagnose", "flag degenerate outcomes");
    diagnose_cmd->add_option("labels", file_arg, "labels CSV (time_s,label)")->required();
    diagnose_cmd->add_option("--metrics", metrics_file, "metrics JSON to analyze");
    diagnose_cmd->add_option("--detector", diagnose_detector, "ivt|idt (params context)");
    diagnose_cmd->add_option("--out", out_file, "diagnosis JSON path");
    add_common(diagnose_cmd);

    CLI::App* pipeline = app.add_subcommand(
        "pipeline", "inspect -> clean -> detect -> evaluate -> diagnose");
    pipeline->add_option("inputs", input_args, "input files");
    pipeline->add_flag("--no-diagnosis", flags.no_diagnosis, "skip the diagnosis stage");
    add_common(pipeline);
    add_mapping(pipeline);
    add_detection(pipeline);

    CLI11_PARSE(app, argc, argv);

    return guarded([&]() -> int {
        AppConfig cfg = build_config(config_path, flags);
        if (!input_args.empty()) cfg.inputs = input_args;
        if (inspect->parsed()) return cmd_inspect(file_arg, cfg, json_only);
        if (clean_cmd->parsed()) return cmd_clean(file_arg, cfg, out_file, json_only);
        if (detect->parsed()) return cmd_detect(file_arg, cfg, detect_diagnose, json_only);
        if (evaluate->parsed())
            return cmd_evaluate(file_arg, truth_arg, cfg, out_file, json_only);
        if (diagnose_cmd->parsed())
            return cmd_diagnose(file_arg, metrics_file, diagnose_detector, cfg, out_file,
                                json_only);
        if (pipeline->parsed()) return cmd_pipeline(cfg, json_only);
        return kExitInternal;
    });
}
