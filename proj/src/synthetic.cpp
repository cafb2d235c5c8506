#include "gazekit/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace gazekit {

namespace {

struct Phase {
    bool fixation = true;
    double t0 = 0.0;
    double t1 = 0.0;
    double x0 = 0.0;  // fixation center, or saccade start
    double y0 = 0.0;
    double vx = 0.0;  // saccade velocity components, deg/s
    double vy = 0.0;
};

}  // namespace

SyntheticRecording generate_scanpath(const SyntheticConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, cfg.jitter_sigma_deg);

    std::vector<Phase> phases;
    double t = 0.0;
    double px = 0.0, py = 0.0;
    bool fixation = true;
    while (t < cfg.duration_s) {
        Phase phase;
        phase.fixation = fixation;
        phase.t0 = t;
        phase.x0 = px;
        phase.y0 = py;
        if (fixation) {
            const double dur =
                cfg.fixation_min_s + u01(rng) * (cfg.fixation_max_s - cfg.fixation_min_s);
            phase.t1 = t + dur;
        } else {
            const double dur =
                cfg.saccade_min_s + u01(rng) * (cfg.saccade_max_s - cfg.saccade_min_s);
            const double amplitude = cfg.saccade_speed_dps * dur;
            double angle = 0.0;
            double nx = px, ny = py;
            bool placed = false;
            for (int attempt = 0; attempt < 32; ++attempt) {
                angle = u01(rng) * 2.0 * std::numbers::pi;
                nx = px + amplitude * std::cos(angle);
                ny = py + amplitude * std::sin(angle);
                if (std::abs(nx) <= cfg.field_halfwidth_deg &&
                    std::abs(ny) <= cfg.field_halfwidth_deg) {
                    placed = true;
                    break;
                }
            }
            if (!placed) {  // near a corner: head back toward the center
                angle = std::atan2(-py, -px);
                nx = px + amplitude * std::cos(angle);
                ny = py + amplitude * std::sin(angle);
            }
            phase.t1 = t + dur;
            phase.vx = cfg.saccade_speed_dps * std::cos(angle);
            phase.vy = cfg.saccade_speed_dps * std::sin(angle);
            px = nx;
            py = ny;
        }
        phases.push_back(phase);
        t = phase.t1;
        fixation = !fixation;
    }

    SyntheticRecording out;
    out.recording.coord_units = CoordUnits::degree;
    out.recording.time_units_detected = TimeUnits::s;
    out.recording.source_id = "synthetic";

    const std::size_t n =
        static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate_hz));
    out.recording.samples.reserve(n);
    out.truth.t.reserve(n);
    out.truth.label.reserve(n);

    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ti = static_cast<double>(i) / cfg.sample_rate_hz;
        while (k + 1 < phases.size() && ti >= phases[k].t1) ++k;
        const Phase& phase = phases[k];
        double x, y;
        if (phase.fixation) {
            x = phase.x0 + jitter(rng);
            y = phase.y0 + jitter(rng);
        } else {
            const double dt = ti - phase.t0;
            x = phase.x0 + phase.vx * dt;
            y = phase.y0 + phase.vy * dt;
        }
        out.recording.samples.push_back(GazeSample{ti, x, y});
        out.truth.t.push_back(ti);
        out.truth.label.push_back(phase.fixation ? EventLabel::fixation
                                                 : EventLabel::saccade);
    }
    return out;
}

}  // namespace gazekit
