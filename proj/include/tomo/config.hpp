#pragma once

#include "tomo/evaluation.hpp"
#include "tomo/geometry.hpp"
#include "tomo/refine.hpp"
#include "tomo/solvers.hpp"
#include "tomo/training.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace tomo {

/// Malformed, unknown or out-of-range configuration entries.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimulationConfig {
    std::size_t scenes = 54;
    Eigen::Index ranges = 152;
    Eigen::Index azimuths = 200;
    double snr_db = 20.0;        ///< "inf" for noiseless
    double density = 4.0;        ///< samples per m^2
    std::uint64_t seed = 1;
};

/// Every run setting. Sections [geometry], [simulation], [solver], [network],
/// [training] and [evaluation] hold `key = value` lines; any key may be
/// omitted. Lists are comma separated.
struct RunConfig {
    GeometryParams geometry;
    SimulationConfig simulation;
    SolverConfig solver;
    ModelConfig network;
    TrainConfig training;
    EvaluationConfig evaluation;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    TomoGeometry make_geometry() const;
};

RunConfig parse_config(const std::string& text, const std::string& source = "<string>");
RunConfig load_config(const std::filesystem::path& path);

/// Effective configuration with every field spelled out; parses back to an
/// equal configuration.
std::string to_ini(const RunConfig& cfg);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace tomo
