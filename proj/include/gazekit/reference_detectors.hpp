#pragma once

#include "gazekit/detectors.hpp"

namespace gazekit {

/// Naive re-implementations of both detectors, written the slowest obvious
/// way (the dispersion variant rescans every candidate window from scratch).
/// They exist as independent oracles for the optimized detectors and must
/// never share code with them.
DetectionResult detect_ivt_reference(const DegreeSeries& ds, const IvtParams& p);
DetectionResult detect_idt_reference(const DegreeSeries& ds, const IdtParams& p);

}  // namespace gazekit
