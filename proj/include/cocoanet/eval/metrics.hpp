#pragma once

#include <cfenv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "../core/error.hpp"
#include "../core/jsonutil.hpp"
#include "../core/warnings.hpp"

namespace cocoanet {

// Rows are the true class, columns the prediction.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes) : k_(classes), cells_(classes * classes, 0) {
        if (classes == 0) throw std::invalid_argument("confusion matrix needs >= 1 class");
    }

    void add(std::size_t truth, std::size_t predicted, std::size_t count = 1) {
        if (truth >= k_ || predicted >= k_)
            throw std::invalid_argument("confusion matrix: class index out of range");
        cells_[truth * k_ + predicted] += count;
    }

    std::size_t at(std::size_t truth, std::size_t predicted) const {
        return cells_[truth * k_ + predicted];
    }
    std::size_t classes() const { return k_; }

    std::size_t total() const {
        std::size_t n = 0;
        for (auto c : cells_) n += c;
        return n;
    }

    std::size_t row_sum(std::size_t t) const {
        std::size_t n = 0;
        for (std::size_t p = 0; p < k_; ++p) n += at(t, p);
        return n;
    }

    std::size_t col_sum(std::size_t p) const {
        std::size_t n = 0;
        for (std::size_t t = 0; t < k_; ++t) n += at(t, p);
        return n;
    }

private:
    std::size_t k_;
    std::vector<std::size_t> cells_;
};

// Percentages at full double precision; rounding happens only when a report
// is rendered, so identities like F1 = 2PR/(P+R) survive numeric checks.
struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    std::string model_id;
    long epoch = -1;
    std::string split;
    std::vector<std::string> class_names;
    std::vector<ClassMetrics> per_class;
    ClassMetrics macro;
    double accuracy = 0.0; // percent
    std::vector<std::vector<std::size_t>> confusion;
    double mean_loss = std::numeric_limits<double>::quiet_NaN(); // optional
};

// Precision TP/(TP+FP), recall TP/(TP+FN), F1 their harmonic mean; an
// undefined ratio (0/0) is reported as 0 and flagged once per process.
inline MetricsReport compute_metrics(const ConfusionMatrix& cm,
                                     const std::vector<std::string>& class_names,
                                     const std::string& model_id = "", long epoch = -1,
                                     const std::string& split = "") {
    if (class_names.size() != cm.classes())
        throw std::invalid_argument("compute_metrics: class name count does not match matrix");
    if (cm.total() == 0) throw std::invalid_argument("compute_metrics: empty confusion matrix");

    MetricsReport r;
    r.model_id = model_id;
    r.epoch = epoch;
    r.split = split;
    r.class_names = class_names;

    const std::size_t k = cm.classes();
    double macro_p = 0, macro_r = 0, macro_f = 0;
    std::size_t correct = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double tp = static_cast<double>(cm.at(c, c));
        const double col = static_cast<double>(cm.col_sum(c));
        const double row = static_cast<double>(cm.row_sum(c));
        ClassMetrics m;
        if (col == 0.0) {
            warnings::raise("metric_zero_denominator",
                            "precision/recall undefined for a class with no samples; reported 0");
        } else {
            m.precision = 100.0 * tp / col;
        }
        if (row == 0.0) {
            warnings::raise("metric_zero_denominator",
                            "precision/recall undefined for a class with no samples; reported 0");
        } else {
            m.recall = 100.0 * tp / row;
        }
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        macro_p += m.precision;
        macro_r += m.recall;
        macro_f += m.f1;
        correct += cm.at(c, c);
        r.per_class.push_back(m);
    }
    r.macro.precision = macro_p / static_cast<double>(k);
    r.macro.recall = macro_r / static_cast<double>(k);
    r.macro.f1 = macro_f / static_cast<double>(k);
    r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(cm.total());
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t t = 0; t < k; ++t)
        for (std::size_t p = 0; p < k; ++p) r.confusion[t][p] = cm.at(t, p);
    return r;
}

// Banker's rounding to 2 decimals; FE_TONEAREST is the C++ default mode.
inline double round2(double v) { return std::nearbyint(v * 100.0) / 100.0; }

namespace detail {

// "95.09" stays, "100.00" -> "100", "91.70" -> "91.7".
inline std::string metric_text(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", round2(v));
    std::string s = buf;
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    return s;
}

inline std::string metric_fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", round2(v));
    return buf;
}

} // namespace detail

inline std::string render_text(const MetricsReport& r) {
    std::string out;
    if (!r.model_id.empty()) {
        out += r.model_id;
        if (!r.split.empty()) out += " on " + r.split;
        if (r.epoch >= 0) out += " (epoch " + std::to_string(r.epoch) + ")";
        out += "\n";
    }
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s\n", "Class", "Precision", "Recall",
                  "F1");
    out += line;
    for (std::size_t c = 0; c < r.class_names.size(); ++c) {
        const auto& m = r.per_class[c];
        std::snprintf(line, sizeof line, "%-16s %10s %10s %10s\n", r.class_names[c].c_str(),
                      detail::metric_text(m.precision).c_str(),
                      detail::metric_text(m.recall).c_str(), detail::metric_text(m.f1).c_str());
        out += line;
    }
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s\n", "Overall",
                  detail::metric_text(r.macro.precision).c_str(),
                  detail::metric_text(r.macro.recall).c_str(),
                  detail::metric_text(r.macro.f1).c_str());
    out += line;
    out += "Accuracy: " + detail::metric_text(r.accuracy) + "%\n";
    if (!r.confusion.empty()) {
        out += "Confusion (rows = truth):\n";
        for (std::size_t t = 0; t < r.confusion.size(); ++t) {
            std::string row = "  " + r.class_names[t] + ":";
            for (std::size_t p = 0; p < r.confusion[t].size(); ++p)
                row += " " + std::to_string(r.confusion[t][p]);
            out += row + "\n";
        }
    }
    return out;
}

inline jsonutil::json render_json(const MetricsReport& r) {
    jsonutil::json j;
    j["model"] = r.model_id;
    j["epoch"] = r.epoch;
    j["split"] = r.split;
    j["classes"] = jsonutil::json::array();
    for (std::size_t c = 0; c < r.class_names.size(); ++c) {
        j["classes"].push_back({{"name", r.class_names[c]},
                                {"precision", round2(r.per_class[c].precision)},
                                {"recall", round2(r.per_class[c].recall)},
                                {"f1", round2(r.per_class[c].f1)}});
    }
    j["macro"] = {{"precision", round2(r.macro.precision)},
                  {"recall", round2(r.macro.recall)},
                  {"f1", round2(r.macro.f1)}};
    j["accuracy"] = round2(r.accuracy);
    if (std::isfinite(r.mean_loss)) j["mean_loss"] = r.mean_loss;
    j["confusion"] = r.confusion;
    return j;
}

inline std::string render_csv(const MetricsReport& r) {
    std::string out = "class,precision,recall,f1,accuracy\n";
    for (std::size_t c = 0; c < r.class_names.size(); ++c) {
        const auto& m = r.per_class[c];
        out += r.class_names[c] + "," + detail::metric_fixed(m.precision) + "," +
               detail::metric_fixed(m.recall) + "," + detail::metric_fixed(m.f1) + ",\n";
    }
    out += "Overall," + detail::metric_fixed(r.macro.precision) + "," +
           detail::metric_fixed(r.macro.recall) + "," + detail::metric_fixed(r.macro.f1) + "," +
           detail::metric_fixed(r.accuracy) + "\n";
    return out;
}

// report.json / report.csv / report.txt under `dir`.
inline void write_reports(const MetricsReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto put = [&](const char* name, const std::string& body) {
        std::ofstream os(dir / name);
        if (!os) throw RuntimeFailure((dir / name).string() + ": cannot open for writing");
        os << body;
        if (!os) throw RuntimeFailure((dir / name).string() + ": write failed");
    };
    put("report.json", render_json(r).dump(2) + "\n");
    put("report.csv", render_csv(r));
    put("report.txt", render_text(r));
}

} // namespace cocoanet
