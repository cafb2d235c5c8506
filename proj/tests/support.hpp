#pragma once

// Shared generators and helpers for the unit and acceptance suites.

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "gazekit/errors.hpp"
#include "gazekit/ingest.hpp"
#include "gazekit/preprocess.hpp"
#include "gazekit/types.hpp"

namespace testsupport {

inline std::string env_or(const char* name, const std::string& fallback) {
    const char* value = std::getenv(name);
    return value && *value ? value : fallback;
}

inline std::filesystem::path data_dir() {
    return env_or("GAZEKIT_DATA", "tests/data");
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary);
    file << text;
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("gazekit-" + tag + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct CmdResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs a shell command capturing stdout/stderr. Used for CLI-level tests;
/// the binary path comes from the GAZE_CLI / GAZE_SYNTH environment variables
/// that ctest sets.
inline CmdResult run_cmd(const std::string& command) {
    const auto dir = fresh_temp_dir("cmd");
    const auto out_path = dir / "out";
    const auto err_path = dir / "err";
    const std::string full =
        command + " >" + out_path.string() + " 2>" + err_path.string();
    const int status = std::system(full.c_str());
    CmdResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    std::filesystem::remove_all(dir);
    return result;
}

/// Random gaze recording: alternating compact clusters and large jumps so
/// both detectors produce mixed labels. Timestamps are expressed in `unit`;
/// with allow_nonmonotonic, ~5% duplicates and ~3% backward stamps appear.
inline gazekit::GazeRecording random_recording(std::mt19937_64& rng, std::size_t n,
                                               gazekit::TimeUnits unit,
                                               bool allow_nonmonotonic) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 0.05);
    const double rate = 50.0 + u01(rng) * 450.0;
    const double dt = 1.0 / rate;
    const double scale = gazekit::time_unit_divisor(unit);

    gazekit::GazeRecording rec;
    rec.coord_units = gazekit::CoordUnits::degree;
    rec.time_units_detected = unit;
    rec.source_id = "random";

    double t = u01(rng) * 10.0;
    double x = (u01(rng) - 0.5) * 20.0;
    double y = (u01(rng) - 0.5) * 20.0;
    bool fixating = true;
    int phase_left = 1 + static_cast<int>(u01(rng) * 50.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (--phase_left <= 0) {
            fixating = !fixating;
            phase_left = 1 + static_cast<int>(u01(rng) * (fixating ? 60.0 : 10.0));
        }
        if (fixating) {
            x += jitter(rng);
            y += jitter(rng);
        } else {
            x += (u01(rng) - 0.5) * 3.0;
            y += (u01(rng) - 0.5) * 3.0;
        }
        rec.samples.push_back(gazekit::GazeSample{t * scale, x, y});
        double step = dt * (0.9 + 0.2 * u01(rng));
        if (allow_nonmonotonic) {
            const double r = u01(rng);
            if (r < 0.05) step = 0.0;
            else if (r < 0.08) step = -0.5 * dt;
        }
        t += step;
    }
    return rec;
}

/// Time normalization as the cleaning stage performs it: detected unit, then
/// divide to seconds (identity fallback when no positive delta exists).
inline gazekit::GazeRecording normalize_time(gazekit::GazeRecording rec) {
    std::vector<double> t;
    t.reserve(rec.size());
    for (const auto& s : rec.samples) t.push_back(s.t);
    double divisor = 1.0;
    try {
        const auto guess = gazekit::detect_time_units(t);
        divisor = gazekit::time_unit_divisor(guess.unit);
        rec.time_units_detected = guess.unit;
    } catch (const gazekit::NoPositiveDeltas&) {
        rec.time_units_detected = gazekit::TimeUnits::s;
    }
    for (auto& s : rec.samples) s.t /= divisor;
    return rec;
}

inline gazekit::IvtParams random_ivt_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    gazekit::IvtParams p;
    p.velocity_threshold_dps = 5.0 + u01(rng) * 95.0;
    p.min_fixation_s = u01(rng) * 0.15;
    p.enforce_min_fix = u01(rng) < 0.7;
    p.smooth_window = std::array<int, 3>{1, 3, 5}[static_cast<int>(u01(rng) * 3.0)];
    return p;
}

inline gazekit::IdtParams random_idt_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    gazekit::IdtParams p;
    p.dispersion_threshold_deg = 0.2 + u01(rng) * 2.8;
    p.min_fixation_s = 0.02 + u01(rng) * 0.25;
    p.smooth_window = std::array<int, 3>{1, 3, 5}[static_cast<int>(u01(rng) * 3.0)];
    return p;
}

/// Independent dispersion recomputation for invariant checks.
inline double dispersion_of(const gazekit::DegreeSeries& ds, std::size_t i, std::size_t j) {
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

}  // namespace testsupport
