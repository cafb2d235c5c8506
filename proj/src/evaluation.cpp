#include "gazekit/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "gazekit/errors.hpp"

namespace gazekit {

AlignmentResult align_asof(const LabeledSeries& pred, const LabeledSeries& truth,
                           const AlignmentConfig& cfg) {
    if (pred.empty() || truth.empty())
        throw NoMatches("align_asof: empty series");

    AlignmentResult out;
    out.pairs.reserve(truth.size());
    std::vector<char> pred_used(pred.size(), 0);

    std::size_t j = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const double tk = truth.t[k];
        while (j + 1 < pred.size() &&
               std::abs(pred.t[j + 1] - tk) < std::abs(pred.t[j] - tk))
            ++j;
        if (std::abs(pred.t[j] - tk) <= cfg.asof_tolerance_s) {
            out.pairs.push_back(MatchedPair{truth.label[k], pred.label[j]});
            pred_used[j] = 1;
        } else {
            ++out.unmatched_gt;
        }
    }
    for (char used : pred_used)
        if (!used) ++out.unmatched_pred;

    if (out.pairs.empty())
        throw NoMatches("align_asof: no pair within tolerance");
    return out;
}

namespace {

ClassMetrics derive_class(std::size_t tp, std::size_t fp, std::size_t fn) {
    ClassMetrics m;
    m.support = tp + fn;
    if (tp + fp > 0)
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0)
        m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

MetricsReport derive_report(const std::array<std::array<std::size_t, 2>, 2>& confusion) {
    MetricsReport r;
    r.confusion = confusion;
    const std::size_t ff = confusion[0][0], fs = confusion[0][1];
    const std::size_t sf = confusion[1][0], ss = confusion[1][1];
    r.fixation = derive_class(ff, sf, fs);
    r.saccade = derive_class(ss, fs, sf);
    r.matched_samples = ff + fs + sf + ss;
    return r;
}

std::size_t label_index(EventLabel label) {
    return label == EventLabel::fixation ? 0 : 1;
}

}  // namespace

MetricsReport compute_metrics(const AlignmentResult& alignment) {
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    for (const MatchedPair& p : alignment.pairs)
        ++confusion[label_index(p.truth)][label_index(p.pred)];
    MetricsReport r = derive_report(confusion);
    r.unmatched_gt = alignment.unmatched_gt;
    r.unmatched_pred = alignment.unmatched_pred;
    return r;
}

MetricsReport merge_reports(std::span<const MetricsReport> reports) {
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    std::size_t unmatched_gt = 0;
    std::size_t unmatched_pred = 0;
    for (const MetricsReport& r : reports) {
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                confusion[a][b] += r.confusion[a][b];
        unmatched_gt += r.unmatched_gt;
        unmatched_pred += r.unmatched_pred;
    }
    MetricsReport merged = derive_report(confusion);
    merged.unmatched_gt = unmatched_gt;
    merged.unmatched_pred = unmatched_pred;
    merged.aggregation = "micro";
    return merged;
}

LabeledSeries to_two_class_series(std::span<const double> t,
                                  std::span<const std::string> raw_labels) {
    LabeledSeries out;
    const std::size_t n = std::min(t.size(), raw_labels.size());
    out.t.reserve(n);
    out.label.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (auto label = parse_event_label(raw_labels[i])) {
            out.t.push_back(t[i]);
            out.label.push_back(*label);
        }
    }
    return out;
}

namespace {

nlohmann::ordered_json metric_or_null(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

nlohmann::ordered_json class_to_json(const ClassMetrics& m) {
    nlohmann::ordered_json j;
    j["precision"] = metric_or_null(m.precision);
    j["recall"] = metric_or_null(m.recall);
    j["f1"] = metric_or_null(m.f1);
    j["support"] = m.support;
    return j;
}

ClassMetrics class_from_json(const nlohmann::json& j) {
    ClassMetrics m;
    auto read = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    m.precision = read("precision");
    m.recall = read("recall");
    m.f1 = read("f1");
    m.support = j.value("support", std::size_t{0});
    return m;
}

}  // namespace

nlohmann::ordered_json metrics_to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["per_class"]["fixation"] = class_to_json(report.fixation);
    j["per_class"]["saccade"] = class_to_json(report.saccade);
    j["confusion"]["fixation"]["fixation"] = report.confusion[0][0];
    j["confusion"]["fixation"]["saccade"] = report.confusion[0][1];
    j["confusion"]["saccade"]["fixation"] = report.confusion[1][0];
    j["confusion"]["saccade"]["saccade"] = report.confusion[1][1];
    j["matched_samples"] = report.matched_samples;
    j["unmatched_gt"] = report.unmatched_gt;
    j["unmatched_pred"] = report.unmatched_pred;
    j["aggregation"] = report.aggregation;
    return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
    MetricsReport r;
    const auto& per_class = j.at("per_class");
    r.fixation = class_from_json(per_class.at("fixation"));
    r.saccade = class_from_json(per_class.at("saccade"));
    if (j.contains("confusion")) {
        const auto& c = j.at("confusion");
        r.confusion[0][0] = c.at("fixation").value("fixation", std::size_t{0});
        r.confusion[0][1] = c.at("fixation").value("saccade", std::size_t{0});
        r.confusion[1][0] = c.at("saccade").value("fixation", std::size_t{0});
        r.confusion[1][1] = c.at("saccade").value("saccade", std::size_t{0});
    }
    r.matched_samples = j.value("matched_samples", std::size_t{0});
    r.unmatched_gt = j.value("unmatched_gt", std::size_t{0});
    r.unmatched_pred = j.value("unmatched_pred", std::size_t{0});
    r.aggregation = j.value("aggregation", std::string("single"));
    return r;
}

namespace {

std::string cell(const std::optional<double>& v) {
    if (!v) return "--";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

}  // namespace

std::string render_metrics_table(
    std::span<const std::pair<std::string, MetricsReport>> rows) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %-9s %10s %10s %10s %10s\n", "detector",
                  "class", "precision", "recall", "f1", "support");
    os << line;
    os << std::string(64, '-') << '\n';
    for (const auto& [name, report] : rows) {
        for (EventLabel label : {EventLabel::fixation, EventLabel::saccade}) {
            const ClassMetrics& m = report.for_label(label);
            std::snprintf(line, sizeof line, "%-10s %-9s %10s %10s %10s %10zu\n",
                          name.c_str(), to_string(label), cell(m.precision).c_str(),
                          cell(m.recall).c_str(), cell(m.f1).c_str(), m.support);
            os << line;
        }
    }
    return os.str();
}

}  // namespace gazekit
