#include "tomo/cli.hpp"

#include "tomo/autodiff/checkpoint.hpp"
#include "tomo/config.hpp"
#include "tomo/dataset.hpp"
#include "tomo/evaluation.hpp"
#include "tomo/metrics.hpp"
#include "tomo/parallel.hpp"
#include "tomo/refine.hpp"
#include "tomo/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#ifndef TOMOKIT_VERSION
#define TOMOKIT_VERSION "unknown"
#endif

namespace tomo {

namespace fs = std::filesystem;

namespace {

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

fs::path output_dir(const fs::path& out) {
    const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
    fs::create_directories(dir);
    return dir;
}

/// Writes `<dir>/effective.cfg` and `<dir>/manifest-<command>.json`.
void write_run_record(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                      const RunConfig& cfg, const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
    fs::create_directories(dir);
    const std::string ini = to_ini(cfg);
    {
        std::ofstream c(dir / "effective.cfg");
        if (!c) throw IoError("cannot write " + (dir / "effective.cfg").string());
        c << ini;
    }
    nlohmann::ordered_json m;
    m["tool"] = "tomokit";
    m["version"] = TOMOKIT_VERSION;
    m["command"] = command;
    m["arguments"] = args;
    m["config"] = ini;
    m["inputs"] = nlohmann::json::array();
    for (const auto& p : inputs) m["inputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    m["outputs"] = nlohmann::json::array();
    for (const auto& p : outputs) m["outputs"].push_back(p.string());
    const fs::path path = dir / ("manifest-" + command + ".json");
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << m.dump(2) << '\n';
}

RunConfig config_from(const std::string& path) {
    if (path.empty()) {
        RunConfig c;
        c.validate();
        return c;
    }
    return load_config(path);
}

void require_file(const fs::path& p) {
    if (!fs::exists(p)) throw IoError("no such file: " + p.string());
}

ad::Checkpoint load_checkpoint(const fs::path& p) {
    if (!fs::exists(p)) throw MissingCheckpointError("missing checkpoint: " + p.string());
    return ad::read_checkpoint(p);
}

const TomoGeometry& common_geometry(const std::vector<DatasetRecord>& records) {
    if (records.empty()) throw IoError("dataset holds no records");
    for (const auto& r : records) {
        if (!(r.geometry == records.front().geometry)) throw std::runtime_error("records use different geometries");
    }
    return records.front().geometry;
}

std::unique_ptr<TomoModel> build_model(const RunConfig& cfg, const TomoGeometry& geom) {
    return std::make_unique<TomoModel>(build_steering_matrix(geom), cfg.network, cfg.training.seed);
}

std::vector<std::size_t> select_split(const std::string& which, std::size_t n) {
    const DatasetSplit s = split_indices(n);
    if (which == "train") return s.train;
    if (which == "val") return s.val;
    if (which == "test") return s.test;
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
    fs::path q = p;
    q.replace_extension();
    return fs::path(q.string() + suffix);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"tomokit: multi-baseline SAR tomography toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: TOMOKIT_THREADS or all cores)")->check(CLI::NonNegativeNumber);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration (INI); built-in defaults when omitted");
        sub->add_option("--seed", seed, "Overrides the configured seed");
    };

    std::string out_path, data_path, init_path, curve_path, method = "fista", checkpoint_path, volumes_path;
    std::string split_name = "all", methods_list = "fista,proposed", what = "cloud", scene_name;
    double tau = -1.0;
    bool freeze = false, assert_ordering = false;

    auto* simulate = app.add_subcommand("simulate", "Generate a dataset container");
    add_common(simulate);
    simulate->add_option("--out", out_path, "Output .tsrd path")->required();

    auto* pretrain = app.add_subcommand("pretrain", "Stage 1: train the pre-imaging network");
    add_common(pretrain);
    pretrain->add_option("--data", data_path, "Dataset .tsrd")->required();
    pretrain->add_option("--out", out_path, "Best checkpoint .tswt (the final one goes to <out>.final.tswt)")->required();
    pretrain->add_option("--curve", curve_path, "Loss curve CSV (default <out>_loss.csv)");

    auto* train = app.add_subcommand("train", "Stage 2: end-to-end training");
    add_common(train);
    train->add_option("--data", data_path, "Dataset .tsrd")->required();
    train->add_option("--init", init_path, "Stage-1 checkpoint")->required();
    train->add_option("--out", out_path, "Best checkpoint .tswt (the final one goes to <out>.final.tswt)")->required();
    train->add_option("--curve", curve_path, "Loss curve CSV (default <out>_loss.csv)");
    train->add_flag("--freeze-prenet", freeze, "Keep the pre-imaging parameters fixed");

    auto* recon = app.add_subcommand("reconstruct", "Reconstruct reflectivity volumes");
    add_common(recon);
    recon->add_option("--method", method, "fista | ista | proposed")->check(CLI::IsMember({"fista", "ista", "proposed"}));
    recon->add_option("--in", data_path, "Dataset .tsrd")->required();
    recon->add_option("--out", out_path, "Output volume file (.tsrv)")->required();
    recon->add_option("--checkpoint", checkpoint_path, "Trained model (proposed only)");
    recon->add_option("--split", split_name, "all | train | val | test")->check(CLI::IsMember({"all", "train", "val", "test"}));

    auto* evaluate = app.add_subcommand("evaluate", "Metrics of a volume file against the dataset");
    add_common(evaluate);
    evaluate->add_option("--data", data_path, "Dataset .tsrd")->required();
    evaluate->add_option("--volumes", volumes_path, "Volume file (.tsrv)")->required();
    evaluate->add_option("--out", out_path, "Metrics CSV")->required();

    auto* compare = app.add_subcommand("compare", "Compare methods on held-out scenes");
    add_common(compare);
    compare->add_option("--data", data_path, "Dataset .tsrd")->required();
    compare->add_option("--checkpoint", checkpoint_path, "Trained model for 'proposed'");
    compare->add_option("--methods", methods_list, "Comma-separated methods");
    compare->add_option("--split", split_name, "all | train | val | test")->check(CLI::IsMember({"all", "train", "val", "test"}));
    compare->add_option("--out", out_path, "Output CSV (a .txt table is written alongside)")->required();
    compare->add_flag("--assert-ordering", assert_ordering,
                      "Exit 1 unless proposed completeness < fista and accuracy <= 1.25 x fista");

    auto* exporter = app.add_subcommand("export", "Write a cloud or volume as 'x y z amplitude' text");
    add_common(exporter);
    exporter->add_option("--in", data_path, "Dataset .tsrd or volume .tsrv")->required();
    exporter->add_option("--scene", scene_name, "Record or volume name (default: first)");
    exporter->add_option("--what", what, "cloud | truth | volume")->check(CLI::IsMember({"cloud", "truth", "volume"}));
    exporter->add_option("--tau", tau, "Relative extraction threshold (default from config)");
    exporter->add_option("--out", out_path, "Output .xyz")->required();

    std::vector<const char*> argv{"tomokit"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_bad_flags;
    }

    try {
        if (threads > 0) set_worker_count(threads);
        RunConfig cfg = config_from(config_path);
        auto log = [&out](const LossRecord& r) {
            out << "epoch " << r.epoch << ' ' << r.split << " loss " << std::setprecision(6) << r.loss << std::endl;
        };
        std::vector<fs::path> inputs;
        if (!config_path.empty()) inputs.emplace_back(config_path);

        if (simulate->parsed()) {
            if (seed) cfg.simulation.seed = *seed;
            const TomoGeometry geom = cfg.make_geometry();
            const auto catalog = random_catalog(cfg.simulation.scenes, cfg.simulation.ranges, cfg.simulation.azimuths,
                                                geom, derive_seed(cfg.simulation.seed, 0xCA7A106));
            const SimulationOptions opts{cfg.simulation.density, cfg.simulation.snr_db, cfg.simulation.seed};
            const auto records = generate_dataset(catalog, geom, opts, out_path);
            out << "wrote " << records.size() << " records to " << out_path << '\n';
            write_run_record(output_dir(out_path), "simulate", args, cfg, inputs,
                             {out_path, out_path + ".split.json"});
            return exit_ok;
        }

        if (pretrain->parsed() || train->parsed()) {
            if (seed) cfg.training.seed = *seed;
            require_file(data_path);
            inputs.emplace_back(data_path);
            const auto records = read_dataset(data_path);
            auto model = build_model(cfg, common_geometry(records));
            const DatasetSplit split = split_indices(records.size());
            TrainResult result;
            if (pretrain->parsed()) {
                result = train_stage1(records, split, *model, cfg.training, {log});
            } else {
                load_checkpoint(init_path).apply(model->parameters());
                inputs.emplace_back(init_path);
                set_prenet_frozen(*model, freeze);
                result = train_stage2(records, split, *model, cfg.training, {log});
            }
            const fs::path best = out_path;
            const fs::path last = sibling(out_path, ".final.tswt");
            const fs::path curve = curve_path.empty() ? sibling(out_path, "_loss.csv") : fs::path(curve_path);
            output_dir(best);
            ad::write_checkpoint(best, result.best);
            ad::write_checkpoint(last, result.last);
            write_loss_csv(curve, result.curve);
            out << "best epoch " << result.best_epoch << " loss " << std::setprecision(6) << result.best_loss << '\n';
            write_run_record(output_dir(out_path), pretrain->parsed() ? "pretrain" : "train", args, cfg, inputs,
                             {best, last, curve});
            return exit_ok;
        }

        if (recon->parsed()) {
            require_file(data_path);
            inputs.emplace_back(data_path);
            const auto records = read_dataset(data_path);
            const Method m = parse_method(method);
            std::unique_ptr<TomoModel> model;
            if (m == Method::proposed) {
                if (checkpoint_path.empty()) throw MissingCheckpointError("reconstruct --method proposed needs --checkpoint");
                model = build_model(cfg, common_geometry(records));
                load_checkpoint(checkpoint_path).apply(model->parameters());
                inputs.emplace_back(checkpoint_path);
            }
            std::vector<NamedVolume> vols;
            for (std::size_t i : select_split(split_name, records.size())) {
                vols.push_back({records[i].name, reconstruct(m, records[i], cfg.solver, model.get())});
            }
            write_volumes(out_path, vols);
            out << "wrote " << vols.size() << " volumes to " << out_path << '\n';
            write_run_record(output_dir(out_path), "reconstruct", args, cfg, inputs, {out_path});
            return exit_ok;
        }

        if (evaluate->parsed()) {
            require_file(data_path);
            require_file(volumes_path);
            inputs.emplace_back(data_path);
            inputs.emplace_back(volumes_path);
            const auto records = read_dataset(data_path);
            const auto vols = read_volumes(volumes_path);
            std::ofstream csv(out_path);
            if (!csv) throw IoError("cannot write " + out_path);
            csv << "scene,completeness,accuracy,reconstructed_points,truth_points,tau_rel\n" << std::setprecision(17);
            for (const NamedVolume& v : vols) {
                const auto it = std::find_if(records.begin(), records.end(), [&](const DatasetRecord& r) { return r.name == v.name; });
                if (it == records.end()) throw std::runtime_error("volume '" + v.name + "' has no matching record");
                const MetricReport r = evaluate_volume(v.volume, *it, cfg.evaluation);
                csv << v.name << ',' << r.completeness << ',';
                if (r.accuracy) csv << *r.accuracy;
                csv << ',' << r.reconstructed_points << ',' << r.truth_points << ',' << r.threshold << '\n';
                out << v.name << " completeness " << r.completeness << " accuracy "
                    << (r.accuracy ? std::to_string(*r.accuracy) : std::string("undefined")) << '\n';
            }
            write_run_record(output_dir(out_path), "evaluate", args, cfg, inputs, {out_path});
            return exit_ok;
        }

        if (compare->parsed()) {
            require_file(data_path);
            inputs.emplace_back(data_path);
            const auto records = read_dataset(data_path);
            std::vector<NamedMethod> methods;
            std::unique_ptr<TomoModel> model;
            std::stringstream ss(methods_list);
            std::string name;
            while (std::getline(ss, name, ',')) {
                const Method m = parse_method(name);
                if (m == Method::proposed && !model) {
                    if (checkpoint_path.empty()) throw MissingCheckpointError("compare: 'proposed' needs --checkpoint");
                    model = build_model(cfg, common_geometry(records));
                    load_checkpoint(checkpoint_path).apply(model->parameters());
                    inputs.emplace_back(checkpoint_path);
                }
                TomoModel* mp = model.get();
                const SolverConfig solver = cfg.solver;
                methods.push_back({name, [m, mp, solver](const DatasetRecord& r) { return reconstruct(m, r, solver, mp); }});
            }
            const ComparisonTable table =
                compare_methods(records, select_split(split_name, records.size()), methods, cfg.evaluation);
            const std::string text = format_table(table);
            const fs::path txt = sibling(out_path, ".txt");
            output_dir(out_path);
            write_comparison_csv(out_path, table);
            {
                std::ofstream t(txt);
                if (!t) throw IoError("cannot write " + txt.string());
                t << text;
            }
            out << text;
            write_run_record(output_dir(out_path), "compare", args, cfg, inputs, {out_path, txt});
            if (assert_ordering) {
                const bool ok = ordering_holds(table, "proposed", "fista", 1.25);
                out << "ordering check: " << (ok ? "holds" : "does not hold") << '\n';
                if (!ok) return exit_check_failed;
            }
            return exit_ok;
        }

        if (exporter->parsed()) {
            require_file(data_path);
            inputs.emplace_back(data_path);
            const double tau_rel = tau > 0.0 ? tau : cfg.evaluation.tau_rel;
            PointCloud cloud;
            std::string magic(4, '\0');
            {
                std::ifstream probe(data_path, std::ios::binary);
                probe.read(magic.data(), 4);
            }
            if (magic == "TSRV") {
                if (what != "volume") throw std::invalid_argument("export: a volume file only supports --what volume");
                const auto vols = read_volumes(data_path);
                if (vols.empty()) throw IoError("volume file is empty: " + data_path);
                auto it = scene_name.empty() ? vols.begin()
                                             : std::find_if(vols.begin(), vols.end(), [&](const NamedVolume& v) { return v.name == scene_name; });
                if (it == vols.end()) throw std::invalid_argument("export: no volume named '" + scene_name + "'");
                cloud = extract_point_cloud(it->volume, cfg.make_geometry(), tau_rel);
            } else {
                const auto records = read_dataset(data_path);
                auto it = scene_name.empty() ? records.begin()
                                             : std::find_if(records.begin(), records.end(), [&](const DatasetRecord& r) { return r.name == scene_name; });
                if (it == records.end()) throw std::invalid_argument("export: no record named '" + scene_name + "'");
                if (what == "cloud") cloud = it->cloud.visible_only();
                else if (what == "truth") cloud = extract_point_cloud(it->truth, it->geometry, tau_rel);
                else throw std::invalid_argument("export: --what volume needs a .tsrv input");
            }
            std::ofstream xyz(out_path);
            if (!xyz) throw IoError("cannot write " + out_path);
            xyz << std::setprecision(17);
            for (Eigen::Index i = 0; i < cloud.size(); ++i) {
                xyz << cloud.points(0, i) << ' ' << cloud.points(1, i) << ' ' << cloud.points(2, i) << ' '
                    << cloud.amplitudes[i] << '\n';
            }
            out << "wrote " << cloud.size() << " points to " << out_path << '\n';
            write_run_record(output_dir(out_path), "export", args, cfg, inputs, {out_path});
            return exit_ok;
        }
    } catch (const MissingCheckpointError& e) {
        err << "tomokit: " << e.what() << '\n';
        return exit_missing_checkpoint;
    } catch (const ConfigError& e) {
        err << "tomokit: " << e.what() << '\n';
        return exit_config;
    } catch (const IoError& e) {
        err << "tomokit: " << e.what() << '\n';
        return exit_io;
    } catch (const fs::filesystem_error& e) {
        err << "tomokit: " << e.what() << '\n';
        return exit_io;
    } catch (const std::exception& e) {
        err << "tomokit: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_bad_flags;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace tomo
