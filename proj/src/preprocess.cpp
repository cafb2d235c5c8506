#include "gazekit/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gazekit/errors.hpp"

namespace gazekit {

namespace {
constexpr double kEpsilonFallbackS = 1e-3;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    q = std::clamp(q, 0.0, 1.0);
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

RobustDeltas robust_deltas(std::span<const double> t) {
    RobustDeltas out;
    std::vector<double> positive;
    positive.reserve(t.size());
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double d = t[i] - t[i - 1];
        if (d > 0.0) positive.push_back(d);
    }
    out.epsilon = positive.empty() ? kEpsilonFallbackS : median(std::move(positive));

    out.dt.resize(t.size(), out.epsilon);
    for (std::size_t i = 1; i < t.size(); ++i)
        out.dt[i] = std::max(t[i] - t[i - 1], out.epsilon);
    return out;
}

double visual_angle_scale(const GeometryConfig& geo) {
    return (180.0 / std::numbers::pi) * geo.pixel_pitch_mm / geo.viewing_distance_mm;
}

std::vector<double> median_smooth(std::span<const double> series, int window) {
    const std::size_t n = series.size();
    std::vector<double> out(series.begin(), series.end());
    if (window <= 1 || n == 0) return out;

    const std::size_t half = static_cast<std::size_t>(window) / 2;
    std::vector<double> buf;
    buf.reserve(static_cast<std::size_t>(window));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t h = std::min({half, i, n - 1 - i});
        if (h == 0) continue;
        buf.assign(series.begin() + static_cast<std::ptrdiff_t>(i - h),
                   series.begin() + static_cast<std::ptrdiff_t>(i + h + 1));
        std::sort(buf.begin(), buf.end());
        out[i] = buf[h];  // window size 2h+1 is odd
    }
    return out;
}

std::vector<double> angular_velocity(const DegreeSeries& ds) {
    std::vector<double> v(ds.size(), 0.0);
    for (std::size_t i = 1; i < ds.size(); ++i) {
        const double dx = ds.x_smooth[i] - ds.x_smooth[i - 1];
        const double dy = ds.y_smooth[i] - ds.y_smooth[i - 1];
        v[i] = std::sqrt(dx * dx + dy * dy) / ds.dt[i];
    }
    return v;
}

DegreeSeries prepare_degree_series(const GazeRecording& rec,
                                   const std::optional<GeometryConfig>& geo,
                                   int smooth_window) {
    if (rec.empty()) throw EmptyInput("recording has no samples");

    DegreeSeries ds;
    const std::size_t n = rec.size();
    ds.t.reserve(n);
    ds.x.reserve(n);
    ds.y.reserve(n);

    double k = 1.0;
    if (rec.coord_units == CoordUnits::pixel) {
        if (!geo || !geo->valid())
            throw MissingGeometry("pixel coordinates require a valid GeometryConfig");
        k = visual_angle_scale(*geo);
    }
    for (const GazeSample& s : rec.samples) {
        ds.t.push_back(s.t);
        ds.x.push_back(k * s.x);
        ds.y.push_back(k * s.y);
    }

    ds.x_smooth = median_smooth(ds.x, smooth_window);
    ds.y_smooth = median_smooth(ds.y, smooth_window);

    RobustDeltas rd = robust_deltas(ds.t);
    ds.dt = std::move(rd.dt);
    ds.epsilon = rd.epsilon;
    return ds;
}

}  // namespace gazekit
