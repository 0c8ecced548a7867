#include "tomo/config.hpp"

#include "tomo/dataset.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

namespace tomo {

namespace pt = boost::property_tree;
using Eigen::Index;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

double to_double(const std::string& v) {
    const std::string t = trim(v);
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    const double d = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing characters");
    return d;
}

template <typename Int>
Int to_int(const std::string& v) {
    const std::string t = trim(v);
    Int out{};
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw std::invalid_argument("not an integer");
    return out;
}

bool to_bool(const std::string& v) {
    const std::string t = trim(v);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw std::invalid_argument("not a boolean");
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& v, F convert) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(convert(item));
    return out;
}

std::string num(double v) {
    if (v == std::numeric_limits<double>::infinity()) return "inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        if constexpr (std::is_floating_point_v<T>) {
            out += num(v[i]);
        } else {
            out += std::to_string(v[i]);
        }
    }
    return out;
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define TOMO_DOUBLE(sec, key, expr) \
    Field{sec, key, [](RunConfig& c, const std::string& v) { c.expr = to_double(v); }, \
          [](const RunConfig& c) { return num(c.expr); }}
#define TOMO_INT(sec, key, type, expr) \
    Field{sec, key, [](RunConfig& c, const std::string& v) { c.expr = to_int<type>(v); }, \
          [](const RunConfig& c) { return std::to_string(c.expr); }}

std::string optional_step(const std::optional<double>& s) { return s ? num(*s) : "auto"; }
std::optional<double> parse_step(const std::string& v) {
    if (trim(v) == "auto") return std::nullopt;
    return to_double(v);
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        TOMO_DOUBLE("geometry", "wavelength", geometry.wavelength),
        TOMO_DOUBLE("geometry", "reference_range", geometry.reference_range),
        TOMO_DOUBLE("geometry", "incidence_deg", geometry.incidence_deg),
        Field{"geometry", "baselines",
              [](RunConfig& c, const std::string& v) { c.geometry.baselines = to_list<double>(v, to_double); },
              [](const RunConfig& c) { return join(c.geometry.baselines); }},
        TOMO_INT("geometry", "elevation_bins", int, geometry.elevation_bins),
        TOMO_DOUBLE("geometry", "elevation_spacing", geometry.elevation_spacing),
        TOMO_DOUBLE("geometry", "elevation_origin", geometry.elevation_origin),
        TOMO_DOUBLE("geometry", "range_spacing", geometry.range_spacing),
        TOMO_DOUBLE("geometry", "azimuth_spacing", geometry.azimuth_spacing),

        TOMO_INT("simulation", "scenes", std::size_t, simulation.scenes),
        TOMO_INT("simulation", "ranges", Index, simulation.ranges),
        TOMO_INT("simulation", "azimuths", Index, simulation.azimuths),
        TOMO_DOUBLE("simulation", "snr_db", simulation.snr_db),
        TOMO_DOUBLE("simulation", "density", simulation.density),
        TOMO_INT("simulation", "seed", std::uint64_t, simulation.seed),

        Field{"solver", "variant",
              [](RunConfig& c, const std::string& v) {
                  const std::string t = trim(v);
                  if (t == "ista") c.solver.variant = SolverVariant::ista;
                  else if (t == "fista") c.solver.variant = SolverVariant::fista;
                  else throw std::invalid_argument("expected ista or fista");
              },
              [](const RunConfig& c) { return std::string(c.solver.variant == SolverVariant::ista ? "ista" : "fista"); }},
        Field{"solver", "step", [](RunConfig& c, const std::string& v) { c.solver.step = parse_step(v); },
              [](const RunConfig& c) { return optional_step(c.solver.step); }},
        TOMO_DOUBLE("solver", "threshold", solver.threshold),
        Field{"solver", "relative_threshold",
              [](RunConfig& c, const std::string& v) { c.solver.relative_threshold = to_bool(v); },
              [](const RunConfig& c) { return std::string(c.solver.relative_threshold ? "true" : "false"); }},
        TOMO_INT("solver", "max_iters", int, solver.max_iters),
        TOMO_DOUBLE("solver", "stop_tol", solver.stop_tol),

        TOMO_INT("network", "blocks", int, network.blocks),
        Field{"network", "channels",
              [](RunConfig& c, const std::string& v) { c.network.encdec.channels = to_list<Index>(v, to_int<Index>); },
              [](const RunConfig& c) { return join(c.network.encdec.channels); }},
        TOMO_DOUBLE("network", "smoothing", network.smoothing),
        Field{"network", "step", [](RunConfig& c, const std::string& v) { c.network.step = parse_step(v); },
              [](const RunConfig& c) { return optional_step(c.network.step); }},
        TOMO_DOUBLE("network", "theta0_per_baseline", network.theta0_per_baseline),
        Field{"network", "merge",
              [](RunConfig& c, const std::string& v) {
                  const std::string t = trim(v);
                  if (t == "max") c.network.merge = MergeStrategy::max;
                  else if (t == "sum") c.network.merge = MergeStrategy::sum;
                  else throw std::invalid_argument("expected max or sum");
              },
              [](const RunConfig& c) { return std::string(c.network.merge == MergeStrategy::max ? "max" : "sum"); }},
        TOMO_DOUBLE("network", "bn_momentum", network.encdec.bn_momentum),
        TOMO_DOUBLE("network", "bn_eps", network.encdec.bn_eps),
        Field{"network", "residual",
              [](RunConfig& c, const std::string& v) { c.network.encdec.residual = to_bool(v); },
              [](const RunConfig& c) { return std::string(c.network.encdec.residual ? "true" : "false"); }},
        TOMO_INT("network", "eval_chunk", Index, network.eval_chunk),

        TOMO_INT("training", "stage1_epochs", int, training.stage1.epochs),
        TOMO_INT("training", "stage1_batch", Index, training.stage1.batch),
        TOMO_DOUBLE("training", "stage1_lr", training.stage1.lr),
        TOMO_INT("training", "stage2_epochs", int, training.stage2.epochs),
        TOMO_INT("training", "stage2_batch", Index, training.stage2.batch),
        TOMO_DOUBLE("training", "stage2_lr", training.stage2.lr),
        TOMO_INT("training", "stage2_crop", Index, training.stage2_crop),
        TOMO_INT("training", "stage2_crops_per_scene", int, training.stage2_crops_per_scene),
        TOMO_DOUBLE("training", "lambda", training.lambda),
        TOMO_INT("training", "seed", std::uint64_t, training.seed),
        TOMO_DOUBLE("training", "adam_beta1", training.adam.beta1),
        TOMO_DOUBLE("training", "adam_beta2", training.adam.beta2),
        TOMO_DOUBLE("training", "adam_eps", training.adam.eps),

        TOMO_DOUBLE("evaluation", "tau_rel", evaluation.tau_rel),
        Field{"evaluation", "statistic",
              [](RunConfig& c, const std::string& v) { c.evaluation.statistic = parse_statistic(trim(v)); },
              [](const RunConfig& c) { return to_string(c.evaluation.statistic); }},
    };
    return table;
}

#undef TOMO_DOUBLE
#undef TOMO_INT

const Field* find_field(const std::string& section, const std::string& key) {
    for (const Field& f : fields()) {
        if (section == f.section && key == f.key) return &f;
    }
    return nullptr;
}

}  // namespace

void RunConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
    try {
        make_geometry();
    } catch (const std::invalid_argument& e) {
        fail(std::string("[geometry] ") + e.what());
    }
    if (simulation.scenes < 1) fail("[simulation] scenes must be >= 1");
    if (simulation.ranges < 1 || simulation.azimuths < 1) fail("[simulation] ranges and azimuths must be >= 1");
    if (!(simulation.density > 0.0)) fail("[simulation] density must be > 0");
    if (std::isnan(simulation.snr_db)) fail("[simulation] snr_db is not a number");
    try {
        solver.validate();
    } catch (const std::invalid_argument& e) {
        fail(std::string("[solver] ") + e.what());
    }
    if (network.blocks < 1) fail("[network] blocks must be >= 1");
    if (network.encdec.channels.empty()) fail("[network] channels must list at least one stage");
    for (Index c : network.encdec.channels) {
        if (c < 1) fail("[network] channels must be positive");
    }
    if (!(network.smoothing >= 0.0)) fail("[network] smoothing must be >= 0");
    if (network.step && !(*network.step > 0.0)) fail("[network] step must be > 0");
    if (!(network.theta0_per_baseline >= 0.0)) fail("[network] theta0_per_baseline must be >= 0");
    if (!(network.encdec.bn_momentum > 0.0 && network.encdec.bn_momentum <= 1.0)) fail("[network] bn_momentum must lie in (0, 1]");
    if (!(network.encdec.bn_eps > 0.0)) fail("[network] bn_eps must be > 0");
    if (network.eval_chunk < 1) fail("[network] eval_chunk must be >= 1");
    try {
        training.validate();
    } catch (const std::invalid_argument& e) {
        fail(std::string("[training] ") + e.what());
    }
    if (!(evaluation.tau_rel > 0.0 && evaluation.tau_rel < 1.0)) fail("[evaluation] tau_rel must lie in (0, 1)");
}

TomoGeometry RunConfig::make_geometry() const { return TomoGeometry(geometry); }

RunConfig parse_config(const std::string& text, const std::string& source) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            throw ConfigError(source + ": key '" + section + "' outside of a section");
        }
        for (const auto& [key, value] : body) {
            const Field* f = find_field(section, key);
            if (!f) throw ConfigError(source + ": unknown key '" + key + "' in [" + section + "]");
            try {
                f->set(cfg, value.data());
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                throw ConfigError(source + ": bad value '" + value.data() + "' for " + section + "." + key + " (" +
                                  e.what() + ")");
            }
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

std::string to_ini(const RunConfig& cfg) {
    std::string out;
    std::string section;
    for (const Field& f : fields()) {
        if (section != f.section) {
            if (!section.empty()) out += '\n';
            section = f.section;
            out += "[" + section + "]\n";
        }
        out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return to_ini(a) == to_ini(b); }

}  // namespace tomo
