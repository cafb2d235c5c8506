#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gazekit/types.hpp"

namespace gazekit {

/// Conditioned coordinate stream shared by both detectors: time in seconds,
/// coordinates in degrees, a median-smoothed copy, and epsilon-robustified
/// inter-sample deltas. dt[0] is defined as epsilon but never consumed by the
/// velocity rule (v[0] = 0 by definition).
struct DegreeSeries {
    std::vector<double> t;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> x_smooth;
    std::vector<double> y_smooth;
    std::vector<double> dt;
    double epsilon = 0.0;

    std::size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }
};

struct RobustDeltas {
    std::vector<double> dt;
    double epsilon = 0.0;
};

/// dt[i] = max(t[i] - t[i-1], eps), eps = median of the strictly positive raw
/// deltas, falling back to 1e-3 s when no positive delta exists. Guarantees
/// dt[i] > 0 everywhere, which makes the velocity well-defined even on
/// duplicate or backwards timestamps.
RobustDeltas robust_deltas(std::span<const double> t);

/// Degrees of visual angle per pixel under the small-angle approximation:
/// k = (180/pi) * pitch / distance.
double visual_angle_scale(const GeometryConfig& geo);

/// Median of the values (even count: mean of the two central order
/// statistics). Used for epsilon, the smoother, and diagnosis statistics.
double median(std::vector<double> values);

/// Linear-interpolation percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

/// Centered median filter with an odd window. At the edges the window
/// shrinks symmetrically so it stays centered, so for window=3 the first and
/// last samples pass through unchanged. window=1 is the identity.
std::vector<double> median_smooth(std::span<const double> series, int window);

/// Pointwise angular speed in deg/s computed on the smoothed coordinates:
/// v[0] = 0, v[i] = sqrt(dx^2 + dy^2) / dt[i].
std::vector<double> angular_velocity(const DegreeSeries& ds);

/// Converts a recording to a conditioned DegreeSeries: pixel->degree when the
/// recording declares pixel units (requires geometry), identity pass-through
/// for degree units, then median smoothing and robust deltas.
/// Throws EmptyInput on an empty recording and MissingGeometry when pixel
/// units arrive without a valid GeometryConfig.
DegreeSeries prepare_degree_series(const GazeRecording& rec,
                                   const std::optional<GeometryConfig>& geo,
                                   int smooth_window);

}  // namespace gazekit
