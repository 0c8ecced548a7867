#pragma once

#include "tomo/dataset.hpp"
#include "tomo/metrics.hpp"
#include "tomo/refine.hpp"
#include "tomo/solvers.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace tomo {

enum class Method { fista, ista, proposed };

Method parse_method(const std::string& s);
std::string to_string(Method m);

struct EvaluationConfig {
    double tau_rel = 0.1;
    MetricStatistic statistic = MetricStatistic::mean;
};

/// Reconstruction by a classical solver, or by `model` for Method::proposed
/// (which must then be non-null).
ReflectivityVolume reconstruct(Method method, const DatasetRecord& record, const SolverConfig& solver,
                               TomoModel* model);

/// Extraction plus metrics of one reconstructed volume against the record's
/// visible scatterers.
MetricReport evaluate_volume(const ReflectivityVolume& volume, const DatasetRecord& record, const EvaluationConfig& cfg);

struct ComparisonTable {
    std::vector<std::string> methods;
    std::vector<std::string> scenes;
    std::vector<std::vector<MetricReport>> reports;  ///< [method][scene]

    /// Statistic over scenes of the per-scene values; accuracy over the scenes
    /// where it is defined.
    double mean_completeness(std::size_t method) const;
    double mean_accuracy(std::size_t method) const;
    std::size_t method_index(const std::string& name) const;
};

using Reconstructor = std::function<ReflectivityVolume(const DatasetRecord&)>;

struct NamedMethod {
    std::string name;
    Reconstructor run;
};

ComparisonTable compare_methods(const std::vector<DatasetRecord>& records, const std::vector<std::size_t>& scenes,
                                const std::vector<NamedMethod>& methods, const EvaluationConfig& cfg);

/// Aligned text table, one row per scene plus the mean row.
std::string format_table(const ComparisonTable& table);
/// Header `scene,<m>_completeness,<m>_accuracy,...`; the final row is `mean`.
void write_comparison_csv(const std::filesystem::path& path, const ComparisonTable& table);

/// Mean completeness of `candidate` strictly below `reference`, and mean
/// accuracy at most `accuracy_slack` times the reference's.
bool ordering_holds(const ComparisonTable& table, const std::string& candidate, const std::string& reference,
                    double accuracy_slack = 1.25);

}  // namespace tomo
