#pragma once

#include <cstdint>

#include "gazekit/types.hpp"

namespace gazekit {

/// Scanpath generator settings: alternating jittered fixations and linear
/// constant-speed saccades on an exact sampling grid.
struct SyntheticConfig {
    double sample_rate_hz = 250.0;
    double duration_s = 20.0;
    double fixation_min_s = 0.150;
    double fixation_max_s = 0.400;
    double saccade_min_s = 0.020;
    double saccade_max_s = 0.060;
    double saccade_speed_dps = 300.0;
    double jitter_sigma_deg = 0.02;
    double field_halfwidth_deg = 15.0;
};

struct SyntheticRecording {
    GazeRecording recording;  // degrees, seconds
    LabeledSeries truth;      // exact per-sample labels
};

/// Deterministic for a given (config, seed) pair; the emitted truth labels
/// are the oracle for recoverability tests.
SyntheticRecording generate_scanpath(const SyntheticConfig& cfg, std::uint64_t seed);

}  // namespace gazekit
