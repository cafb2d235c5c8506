#include "gazekit/types.hpp"

#include <algorithm>
#include <cctype>

namespace gazekit {

namespace {

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

const char* to_string(EventLabel label) {
    return label == EventLabel::fixation ? "fixation" : "saccade";
}

std::optional<EventLabel> parse_event_label(std::string_view text) {
    const std::string t = lower(text);
    if (t == "fixation") return EventLabel::fixation;
    if (t == "saccade") return EventLabel::saccade;
    return std::nullopt;
}

const char* to_string(CoordUnits units) {
    return units == CoordUnits::pixel ? "pixel" : "degree";
}

const char* to_string(TimeUnits units) {
    switch (units) {
        case TimeUnits::s: return "s";
        case TimeUnits::ms: return "ms";
        case TimeUnits::us: return "us";
        case TimeUnits::ns: return "ns";
    }
    return "s";
}

std::optional<CoordUnits> parse_coord_units(std::string_view text) {
    const std::string t = lower(text);
    if (t == "pixel" || t == "px" || t == "pixels") return CoordUnits::pixel;
    if (t == "degree" || t == "deg" || t == "degrees") return CoordUnits::degree;
    return std::nullopt;
}

std::vector<std::string> validate_params(const IvtParams& p) {
    std::vector<std::string> errors;
    if (!(p.velocity_threshold_dps > 0.0))
        errors.push_back("velocity_threshold_dps must be > 0");
    if (p.min_fixation_s < 0.0)
        errors.push_back("min_fixation_s must be >= 0");
    if (p.smooth_window < 1)
        errors.push_back("smooth_window must be >= 1");
    else if (p.smooth_window % 2 == 0)
        errors.push_back("smooth_window must be odd");
    return errors;
}

std::vector<std::string> validate_params(const IdtParams& p) {
    std::vector<std::string> errors;
    if (!(p.dispersion_threshold_deg > 0.0))
        errors.push_back("dispersion_threshold_deg must be > 0");
    if (!(p.min_fixation_s > 0.0))
        errors.push_back("min_fixation_s must be > 0");
    if (p.smooth_window < 1)
        errors.push_back("smooth_window must be >= 1");
    else if (p.smooth_window % 2 == 0)
        errors.push_back("smooth_window must be odd");
    return errors;
}

}  // namespace gazekit
