// gaze-synth: seeded synthetic scanpath generator for testing the pipeline.
// Emits a CSV with exact ground-truth labels (degrees, seconds).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "gazekit/ingest.hpp"
#include "gazekit/synthetic.hpp"
#include "gazekit/types.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic gaze scanpath generator"};

    gazekit::SyntheticConfig cfg;
    std::uint64_t seed = 42;
    std::string out_path = "synthetic.csv";
    bool precleaned = false;
    double fix_min_ms = cfg.fixation_min_s * 1000.0;
    double fix_max_ms = cfg.fixation_max_s * 1000.0;
    double sacc_min_ms = cfg.saccade_min_s * 1000.0;
    double sacc_max_ms = cfg.saccade_max_s * 1000.0;

    app.add_option("--seed", seed, "generator seed");
    app.add_option("--duration-s", cfg.duration_s, "recording length, seconds");
    app.add_option("--rate-hz", cfg.sample_rate_hz, "sampling rate, Hz");
    app.add_option("--jitter-sigma", cfg.jitter_sigma_deg, "fixation jitter sigma, deg");
    app.add_option("--speed-dps", cfg.saccade_speed_dps, "saccade speed, deg/s");
    app.add_option("--fix-min-ms", fix_min_ms, "min fixation duration, ms");
    app.add_option("--fix-max-ms", fix_max_ms, "max fixation duration, ms");
    app.add_option("--sacc-min-ms", sacc_min_ms, "min saccade duration, ms");
    app.add_option("--sacc-max-ms", sacc_max_ms, "max saccade duration, ms");
    app.add_option("-o,--out", out_path, "output CSV path");
    app.add_flag("--precleaned", precleaned,
                 "emit the cleaned header (time_s,x,y,label) instead of raw columns");

    CLI11_PARSE(app, argc, argv);
    cfg.fixation_min_s = fix_min_ms / 1000.0;
    cfg.fixation_max_s = fix_max_ms / 1000.0;
    cfg.saccade_min_s = sacc_min_ms / 1000.0;
    cfg.saccade_max_s = sacc_max_ms / 1000.0;

    const gazekit::SyntheticRecording synth = gazekit::generate_scanpath(cfg, seed);
    std::vector<std::string> labels;
    labels.reserve(synth.truth.size());
    for (gazekit::EventLabel label : synth.truth.label)
        labels.emplace_back(gazekit::to_string(label));

    const std::filesystem::path out(out_path);
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    if (precleaned) {
        gazekit::write_recording_csv(out, synth.recording, labels);
    } else {
        std::ofstream file(out, std::ios::binary);
        if (!file) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return 1;
        }
        file << "time,x,y,label\n";
        for (std::size_t i = 0; i < synth.recording.size(); ++i) {
            const gazekit::GazeSample& s = synth.recording.samples[i];
            file << gazekit::format_double(s.t) << ',' << gazekit::format_double(s.x)
                 << ',' << gazekit::format_double(s.y) << ',' << labels[i] << "\n";
        }
    }
    std::cout << "wrote " << synth.recording.size() << " samples (seed " << seed
              << ") to " << out_path << "\n";
    return 0;
}
