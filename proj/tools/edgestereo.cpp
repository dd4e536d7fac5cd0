// edgestereo command-line front end: sgm | gen | train | infer | eval | gradcheck.

#include "edgestereo/dataio.hpp"
#include "edgestereo/error.hpp"
#include "edgestereo/eval.hpp"
#include "edgestereo/gradcheck.hpp"
#include "edgestereo/model.hpp"
#include "edgestereo/run_config.hpp"
#include "edgestereo/sample_io.hpp"
#include "edgestereo/sgm.hpp"
#include "edgestereo/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace edgestereo;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kIo = 3, kConfig = 4, kNumerical = 5 };

struct Command {
    CLI::App* app = nullptr;
    std::string config_file;
    std::map<std::string, std::string> flags;
};

void require_file(const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("missing --") + what);
    if (!fs::is_regular_file(p)) throw IoError(std::string(what) + " file not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("missing --") + what);
    if (!fs::is_directory(p)) throw IoError(std::string(what) + " directory not found: " + p.string());
}

void require_output(const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("missing --") + what);
    const fs::path parent = p.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) throw IoError("output directory does not exist: " + parent.string());
}

RunConfig resolve(const std::string& name, const Command& cmd) {
    RunConfig cfg;
    cfg.command = name;
    if (!cmd.config_file.empty()) {
        require_file(cmd.config_file, "config");
        const auto bytes = io::read_file(cmd.config_file);
        apply_settings(cfg, parse_config_text(std::string(bytes.begin(), bytes.end())));
    }
    for (const auto& key : config_keys()) {
        if (const auto it = cmd.flags.find(key); it != cmd.flags.end() && cmd.app->count(flag_for_key(key)) > 0) {
            apply_setting(cfg, key, it->second);
        }
    }
    validate(cfg);
    return cfg;
}

void save_edges(const fs::path& path, const EdgeMap& e) {
    const std::string ext = path.extension().string();
    if (ext == ".png") {
        io::write_file(path, io::write_png_image(e.probabilities));
    } else {
        io::write_file(path, io::write_pnm(e.probabilities, 255));
    }
}

// Predictions may fall below the smallest KITTI-encodable value; PFM keeps them exactly.
void save_prediction(const fs::path& path, DisparityMap d) {
    if (path.extension() == ".png") {
        for (double& v : d.values.data()) v = std::clamp(v, 1.0 / 256.0, 65535.0 / 256.0);
    }
    io::save_disparity(path, d);
}

void print_report(const eval::Report& report, const fs::path& kv_path) {
    eval::write_text_report(std::cout, report);
    if (!kv_path.empty()) {
        std::ofstream out(kv_path);
        if (!out) throw IoError("cannot write " + kv_path.string());
        eval::write_kv_report(out, report);
    }
}

int cmd_sgm(const RunConfig& cfg) {
    require_file(cfg.left, "left");
    require_file(cfg.right, "right");
    require_output(cfg.output, "output");
    if (!cfg.gt.empty()) require_file(cfg.gt, "gt");
    const Grid left = io::load_image(cfg.left);
    const Grid right = io::load_image(cfg.right);
    const DisparityMap d = sgm::run_sgm(left, right, cfg.sgm);
    io::save_disparity(cfg.output, d);
    if (!cfg.preview.empty()) {
        io::write_file(cfg.preview, io::write_png_image(io::colorize_disparity(d, cfg.sgm.max_disp)));
    }
    eval::Report report{{"valid_fraction", static_cast<double>(d.valid.count()) / d.values.plane_size()}};
    if (!cfg.gt.empty()) {
        const DisparityMap gt = io::load_disparity(cfg.gt);
        report["epe"] = eval::epe(d, gt);
        report["1px"] = eval::t_px_error(d, gt, 1.0);
        report["3px"] = eval::t_px_error(d, gt, 3.0);
    }
    print_report(report, {});
    return kOk;
}

int cmd_gen(const RunConfig& cfg) {
    if (cfg.output.empty()) throw ConfigError("missing --output");
    TextureConfig tex;
    tex.channels = cfg.channels;
    const auto samples = make_dataset(cfg.count, cfg.height, cfg.width, cfg.seed, tex);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "sample_%04zu", i);
        io::write_sample_dir(cfg.output / name, samples[i]);
    }
    std::cout << "wrote " << samples.size() << " samples to " << cfg.output.string() << '\n';
    return kOk;
}

int cmd_train(RunConfig cfg) {
    require_dir(cfg.data_dir, "data-dir");
    require_output(cfg.checkpoint_out, "checkpoint-out");
    if (!cfg.checkpoint.empty()) require_file(cfg.checkpoint, "checkpoint");
    if (!cfg.log.empty()) require_output(cfg.log, "log");
    const auto data = io::read_dataset(cfg.data_dir);
    model::ModelParams params;
    if (cfg.checkpoint.empty()) {
        cfg.pyramid.image_channels = data.front().left.channels();
        params = model::init_params(cfg.pyramid, cfg.seed);
    } else {
        auto [p, pyramid] = model::load_checkpoint(io::read_file(cfg.checkpoint));
        params = std::move(p);
        cfg.pyramid = pyramid;
    }
    const int every = std::max(1, cfg.schedule.iterations / 20);
    const model::LossLog log = model::train_stage(
        cfg.stage, data, params, cfg.pyramid, cfg.weights, cfg.schedule, [&](int it, const std::vector<double>& row) {
            if (it % every == 0) std::cerr << "iter " << it << " total " << row.back() << '\n';
        });
    io::write_file(cfg.checkpoint_out, model::save_checkpoint(params, cfg.pyramid));
    if (cfg.log.empty()) {
        log.write_csv(std::cout);
    } else {
        std::ofstream out(cfg.log);
        if (!out) throw IoError("cannot write " + cfg.log.string());
        log.write_csv(out);
    }
    return kOk;
}

int cmd_infer(const RunConfig& cfg) {
    require_file(cfg.checkpoint, "checkpoint");
    require_file(cfg.left, "left");
    require_file(cfg.right, "right");
    require_output(cfg.output, "output");
    if (!cfg.edges.empty()) require_output(cfg.edges, "edges");
    const auto [params, pyramid] = model::load_checkpoint(io::read_file(cfg.checkpoint));
    const auto [d, e] = model::infer(params, io::load_image(cfg.left), io::load_image(cfg.right), pyramid);
    save_prediction(cfg.output, d);
    if (!cfg.edges.empty()) save_edges(cfg.edges, e);
    if (!cfg.preview.empty()) {
        io::write_file(cfg.preview, io::write_png_image(io::colorize_disparity(d, 2.0 * pyramid.matching_max_disp)));
    }
    return kOk;
}

fs::path find_disparity(const fs::path& dir) {
    for (const char* name : {"disparity.png", "disparity.pfm"}) {
        if (fs::exists(dir / name)) return dir / name;
    }
    throw IoError("no disparity.png or disparity.pfm in " + dir.string());
}

int cmd_eval(const RunConfig& cfg) {
    require_dir(cfg.pred_dir, "pred-dir");
    require_dir(cfg.gt_dir, "gt-dir");
    std::vector<fs::path> names;
    for (const auto& entry : fs::directory_iterator(cfg.gt_dir)) {
        if (entry.is_directory()) names.push_back(entry.path().filename());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw IoError("no sample directories under " + cfg.gt_dir.string());

    std::map<std::string, double> sums;
    std::vector<EdgeMap> pred_edges;
    std::vector<EdgeMap> gt_edges;
    const bool want_edges = std::any_of(cfg.metrics.begin(), cfg.metrics.end(),
                                        [](const std::string& m) { return m == "ods" || m == "ois"; });
    for (const auto& name : names) {
        const DisparityMap gt = io::load_disparity(find_disparity(cfg.gt_dir / name));
        const DisparityMap pred = io::load_disparity(find_disparity(cfg.pred_dir / name));
        std::optional<EdgeMap> gte;
        if (fs::exists(cfg.gt_dir / name / "edges.pgm")) {
            Grid g = io::to_gray(io::load_image(cfg.gt_dir / name / "edges.pgm"));
            for (double& v : g.data()) v = v >= 0.5 ? 1.0 : 0.0;
            gte = EdgeMap(std::move(g));
        }
        for (const auto& m : cfg.metrics) {
            if (m == "epe") {
                sums[m] += eval::epe(pred, gt);
            } else if (m == "d1") {
                sums[m] += eval::t_px_error(pred, gt, 3.0, nullptr, {true});
            } else if (m == "boundary_epe") {
                if (!gte) throw IoError("boundary_epe needs edges.pgm in " + (cfg.gt_dir / name).string());
                const auto region = eval::near_boundary_mask(*gte, 0.5, cfg.boundary_radius);
                sums[m] += eval::epe(pred, gt, &region);
            } else if (m == "ods" || m == "ois") {
                continue;
            } else if (m.size() > 2 && m.substr(m.size() - 2) == "px") {
                double t = 0.0;
                try {
                    t = std::stod(m.substr(0, m.size() - 2));
                } catch (const std::exception&) {
                    throw ConfigError("unknown metric '" + m + "'");
                }
                sums[m] += eval::t_px_error(pred, gt, t);
            } else {
                throw ConfigError("unknown metric '" + m + "'");
            }
        }
        if (want_edges) {
            const fs::path pe = cfg.pred_dir / name / "edges.pgm";
            if (!gte || !fs::exists(pe)) throw IoError("ods/ois need edges.pgm in both directories for " + name.string());
            pred_edges.emplace_back(io::to_gray(io::load_image(pe)));
            gt_edges.push_back(*gte);
        }
    }
    eval::Report report{{"images", static_cast<double>(names.size())}};
    for (const auto& [m, s] : sums) report[m] = s / static_cast<double>(names.size());
    if (want_edges) {
        const auto r = eval::ods_ois(pred_edges, gt_edges, cfg.edge_tolerance);
        report["ods"] = r.ods;
        report["ods_threshold"] = r.ods_threshold;
        report["ois"] = r.ois;
    }
    print_report(report, cfg.output);
    return kOk;
}

int cmd_gradcheck(const RunConfig& cfg) {
    std::vector<std::string> ops;
    if (cfg.op == "all") {
        ops = ad::differentiable_ops();
    } else {
        ops.push_back(cfg.op);
    }
    bool ok = true;
    std::printf("%-26s %-10s %7s %14s  %s\n", "op", "wrt", "points", "max_rel_err", "result");
    for (const auto& op : ops) {
        std::vector<ad::OpCheckResult> results;
        try {
            results = ad::check_op(op, cfg.seed, cfg.points);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        for (const auto& r : results) {
            std::printf("%-26s %-10s %7d %14.3e  %s\n", r.op.c_str(), r.wrt.c_str(), r.points, r.max_rel_error,
                        r.passed ? "PASS" : "FAIL");
            ok = ok && r.passed;
        }
    }
    return ok ? kOk : kNumerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stereo toolkit: SGM baseline, synthetic data, training, inference, evaluation"};
    app.require_subcommand(1);
    const std::vector<std::pair<std::string, std::string>> subcommands{
        {"sgm", "semi-global matching on a stereo pair"},
        {"gen", "generate random-dot stereogram samples"},
        {"train", "run one training stage"},
        {"infer", "predict disparity and edges with a checkpoint"},
        {"eval", "evaluate predicted against ground-truth sample directories"},
        {"gradcheck", "finite-difference check of the differentiable operations"},
    };
    std::map<std::string, Command> commands;
    for (const auto& [name, desc] : subcommands) {
        Command& cmd = commands[name];
        cmd.app = app.add_subcommand(name, desc);
        cmd.app->add_option("--config", cmd.config_file, "key = value config file (flags override it)");
        for (const auto& key : config_keys()) {
            cmd.app->add_option(flag_for_key(key), cmd.flags[key], "config key " + key);
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    try {
        for (auto& [name, cmd] : commands) {
            if (!cmd.app->parsed()) continue;
            RunConfig cfg = resolve(name, cmd);
            if (name == "sgm") return cmd_sgm(cfg);
            if (name == "gen") return cmd_gen(cfg);
            if (name == "train") return cmd_train(cfg);
            if (name == "infer") return cmd_infer(cfg);
            if (name == "eval") return cmd_eval(cfg);
            if (name == "gradcheck") return cmd_gradcheck(cfg);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kIo;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::domain_error& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << '\n';
        return kConfig;
    }
    return kUsage;
}
