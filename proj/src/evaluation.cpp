#include "tomo/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tomo {

Method parse_method(const std::string& s) {
    if (s == "fista") return Method::fista;
    if (s == "ista") return Method::ista;
    if (s == "proposed") return Method::proposed;
    throw std::invalid_argument("unknown method '" + s + "' (fista, ista, proposed)");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::fista: return "fista";
        case Method::ista: return "ista";
        case Method::proposed: return "proposed";
    }
    return "fista";
}

ReflectivityVolume reconstruct(Method method, const DatasetRecord& record, const SolverConfig& solver, TomoModel* model) {
    if (method == Method::proposed) {
        if (!model) throw std::invalid_argument("reconstruct: the proposed method needs a trained model");
        return model->full_forward(record.echoes);
    }
    SolverConfig cfg = solver;
    cfg.variant = method == Method::ista ? SolverVariant::ista : SolverVariant::fista;
    return solve_volume(record.echoes, build_steering_matrix(record.geometry), cfg).magnitude;
}

MetricReport evaluate_volume(const ReflectivityVolume& volume, const DatasetRecord& record, const EvaluationConfig& cfg) {
    const PointCloud recon = extract_point_cloud(volume, record.geometry, cfg.tau_rel);
    MetricReport r = completeness_accuracy(recon, record.cloud.visible_only(), cfg.statistic);
    r.threshold = cfg.tau_rel;
    return r;
}

double ComparisonTable::mean_completeness(std::size_t m) const {
    double s = 0.0;
    for (const MetricReport& r : reports.at(m)) s += r.completeness;
    return reports.at(m).empty() ? 0.0 : s / static_cast<double>(reports.at(m).size());
}

double ComparisonTable::mean_accuracy(std::size_t m) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const MetricReport& r : reports.at(m)) {
        if (r.accuracy) {
            s += *r.accuracy;
            ++n;
        }
    }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::size_t ComparisonTable::method_index(const std::string& name) const {
    for (std::size_t i = 0; i < methods.size(); ++i) {
        if (methods[i] == name) return i;
    }
    throw std::invalid_argument("comparison has no method '" + name + "'");
}

ComparisonTable compare_methods(const std::vector<DatasetRecord>& records, const std::vector<std::size_t>& scenes,
                                const std::vector<NamedMethod>& methods, const EvaluationConfig& cfg) {
    if (scenes.empty()) throw std::invalid_argument("compare_methods: no scenes selected");
    ComparisonTable t;
    for (std::size_t i : scenes) t.scenes.push_back(records.at(i).name);
    for (const NamedMethod& m : methods) {
        t.methods.push_back(m.name);
        std::vector<MetricReport> row;
        for (std::size_t i : scenes) row.push_back(evaluate_volume(m.run(records[i]), records[i], cfg));
        t.reports.push_back(std::move(row));
    }
    return t;
}

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return "inf";
    if (std::isnan(v)) return "nan";
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
}

std::string fmt_csv(double v) {
    if (std::isinf(v)) return "inf";
    if (std::isnan(v)) return "";
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

double accuracy_or_nan(const MetricReport& r) { return r.accuracy ? *r.accuracy : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::string format_table(const ComparisonTable& t) {
    std::size_t name_w = 5;
    for (const auto& s : t.scenes) name_w = std::max(name_w, s.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_w)) << "scene";
    for (const auto& m : t.methods) {
        out << "  " << std::right << std::setw(14) << (m + " compl") << "  " << std::setw(14) << (m + " acc");
    }
    out << '\n';
    for (std::size_t s = 0; s < t.scenes.size(); ++s) {
        out << std::left << std::setw(static_cast<int>(name_w)) << t.scenes[s];
        for (std::size_t m = 0; m < t.methods.size(); ++m) {
            const MetricReport& r = t.reports[m][s];
            out << "  " << std::right << std::setw(14) << fmt(r.completeness) << "  " << std::setw(14)
                << fmt(accuracy_or_nan(r));
        }
        out << '\n';
    }
    out << std::left << std::setw(static_cast<int>(name_w)) << "mean";
    for (std::size_t m = 0; m < t.methods.size(); ++m) {
        out << "  " << std::right << std::setw(14) << fmt(t.mean_completeness(m)) << "  " << std::setw(14)
            << fmt(t.mean_accuracy(m));
    }
    out << '\n';
    return out.str();
}

void write_comparison_csv(const std::filesystem::path& path, const ComparisonTable& t) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "scene";
    for (const auto& m : t.methods) out << ',' << m << "_completeness," << m << "_accuracy";
    out << '\n';
    for (std::size_t s = 0; s < t.scenes.size(); ++s) {
        out << t.scenes[s];
        for (std::size_t m = 0; m < t.methods.size(); ++m) {
            out << ',' << fmt_csv(t.reports[m][s].completeness) << ',' << fmt_csv(accuracy_or_nan(t.reports[m][s]));
        }
        out << '\n';
    }
    out << "mean";
    for (std::size_t m = 0; m < t.methods.size(); ++m) {
        out << ',' << fmt_csv(t.mean_completeness(m)) << ',' << fmt_csv(t.mean_accuracy(m));
    }
    out << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

bool ordering_holds(const ComparisonTable& t, const std::string& candidate, const std::string& reference,
                    double accuracy_slack) {
    const std::size_t c = t.method_index(candidate), r = t.method_index(reference);
    const double cc = t.mean_completeness(c), rc = t.mean_completeness(r);
    const double ca = t.mean_accuracy(c), ra = t.mean_accuracy(r);
    return cc < rc && ca <= accuracy_slack * ra;
}

}  // namespace tomo
