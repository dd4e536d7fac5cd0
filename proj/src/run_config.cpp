#include "edgestereo/run_config.hpp"

#include "edgestereo/error.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

namespace edgestereo {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const std::string v = trim(value);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError("invalid value '" + value + "' for " + key);
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean '" + value + "' for " + key);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
    std::vector<T> out;
    for (const auto& item : split_list(value)) out.push_back(parse_number<T>(key, item));
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = [] {
        std::vector<std::pair<std::string, Setter>> t;
        const auto path = [&t](const std::string& key, std::filesystem::path RunConfig::*m) {
            t.emplace_back(key, [m](RunConfig& c, const std::string&, const std::string& v) { c.*m = trim(v); });
        };
        const auto integer = [&t](const std::string& key, auto getter) {
            t.emplace_back(key, [getter](RunConfig& c, const std::string& k, const std::string& v) {
                getter(c) = parse_number<int>(k, v);
            });
        };
        const auto real = [&t](const std::string& key, auto getter) {
            t.emplace_back(key, [getter](RunConfig& c, const std::string& k, const std::string& v) {
                getter(c) = parse_number<double>(k, v);
            });
        };
        t.emplace_back("seed", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.seed = parse_number<std::uint64_t>(k, v);
        });
        path("left", &RunConfig::left);
        path("right", &RunConfig::right);
        path("output", &RunConfig::output);
        path("preview", &RunConfig::preview);
        path("edges", &RunConfig::edges);
        path("gt", &RunConfig::gt);
        path("data_dir", &RunConfig::data_dir);
        path("pred_dir", &RunConfig::pred_dir);
        path("gt_dir", &RunConfig::gt_dir);
        path("checkpoint", &RunConfig::checkpoint);
        path("checkpoint_out", &RunConfig::checkpoint_out);
        path("log", &RunConfig::log);
        integer("count", [](RunConfig& c) -> int& { return c.count; });
        integer("height", [](RunConfig& c) -> int& { return c.height; });
        integer("width", [](RunConfig& c) -> int& { return c.width; });
        integer("channels", [](RunConfig& c) -> int& { return c.channels; });
        integer("stage", [](RunConfig& c) -> int& { return c.stage; });
        integer("sgm.max_disp", [](RunConfig& c) -> int& { return c.sgm.max_disp; });
        integer("sgm.census_window", [](RunConfig& c) -> int& { return c.sgm.census_window; });
        real("sgm.p1", [](RunConfig& c) -> double& { return c.sgm.p1; });
        real("sgm.p2", [](RunConfig& c) -> double& { return c.sgm.p2; });
        integer("sgm.num_paths", [](RunConfig& c) -> int& { return c.sgm.num_paths; });
        real("sgm.lr_threshold", [](RunConfig& c) -> double& { return c.sgm.lr_check_threshold; });
        t.emplace_back("sgm.subpixel", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.sgm.subpixel = parse_bool(k, v);
        });
        t.emplace_back("pyramid.initial_scale", [](RunConfig& c, const std::string& k, const std::string& v) {
            const int scale = parse_number<int>(k, v);
            const int residual = c.pyramid.per_scale_max_disp.empty() ? 3 : c.pyramid.per_scale_max_disp.front();
            const model::PyramidConfig base = c.pyramid;
            try {
                c.pyramid = model::PyramidConfig::for_variant(scale, residual);
            } catch (const ConfigError&) {
                throw ConfigError("pyramid.initial_scale must be 2, 4 or 8, got " + trim(v));
            }
            c.pyramid.matching_max_disp = base.matching_max_disp;
            c.pyramid.edge_embedding = base.edge_embedding;
            c.pyramid.image_channels = base.image_channels;
            c.pyramid.widths = base.widths;
        });
        t.emplace_back("pyramid.per_scale_max_disp", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.pyramid.per_scale_max_disp = parse_list<int>(k, v);
        });
        integer("pyramid.matching_max_disp", [](RunConfig& c) -> int& { return c.pyramid.matching_max_disp; });
        t.emplace_back("pyramid.edge_embedding", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.pyramid.edge_embedding = parse_bool(k, v);
        });
        real("loss.beta", [](RunConfig& c) -> double& { return c.weights.beta; });
        t.emplace_back("loss.lambda_r", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.weights.lambda_r = parse_list<double>(k, v);
        });
        t.emplace_back("loss.lambda_sm", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.weights.lambda_sm = parse_list<double>(k, v);
        });
        integer("train.iterations", [](RunConfig& c) -> int& { return c.schedule.iterations; });
        integer("train.batch_size", [](RunConfig& c) -> int& { return c.schedule.batch_size; });
        real("train.base_lr", [](RunConfig& c) -> double& { return c.schedule.base_lr; });
        real("train.power", [](RunConfig& c) -> double& { return c.schedule.power; });
        real("train.momentum", [](RunConfig& c) -> double& { return c.schedule.momentum; });
        real("train.weight_decay", [](RunConfig& c) -> double& { return c.schedule.weight_decay; });
        t.emplace_back("eval.metrics", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.metrics = split_list(v);
            if (c.metrics.empty()) throw ConfigError("empty list for " + k);
        });
        real("eval.edge_threshold", [](RunConfig& c) -> double& { return c.edge_threshold; });
        real("eval.edge_tolerance", [](RunConfig& c) -> double& { return c.edge_tolerance; });
        integer("eval.boundary_radius", [](RunConfig& c) -> int& { return c.boundary_radius; });
        t.emplace_back("gradcheck.op", [](RunConfig& c, const std::string&, const std::string& v) { c.op = trim(v); });
        integer("gradcheck.points", [](RunConfig& c) -> int& { return c.points; });
        return t;
    }();
    return table;
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [key, _] : setters()) k.push_back(key);
        return k;
    }();
    return keys;
}

std::string flag_for_key(const std::string& key) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '.', '-');
    std::replace(flag.begin(), flag.end(), '_', '-');
    return flag;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::stringstream ss(text);
    std::string line;
    int number = 0;
    while (std::getline(ss, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
        if (!out.emplace(key, value).second) {
            throw ConfigError("config line " + std::to_string(number) + ": duplicate key " + key);
        }
    }
    return out;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [k, setter] : setters()) {
        if (k == key) {
            setter(cfg, key, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

void apply_settings(RunConfig& cfg, const std::map<std::string, std::string>& settings) {
    // Apply in table order so that dependent keys (initial scale before per-scale lists) are
    // independent of file order.
    for (const auto& [key, setter] : setters()) {
        if (const auto it = settings.find(key); it != settings.end()) setter(cfg, key, it->second);
    }
    for (const auto& [key, _] : settings) {
        const auto& keys = config_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError("unknown config key '" + key + "'");
    }
}

void validate(const RunConfig& cfg) {
    cfg.sgm.validate();
    cfg.pyramid.validate();
    if (cfg.height <= 0 || cfg.width <= 0 || cfg.count <= 0) throw ConfigError("count, height and width must be positive");
    if (cfg.channels != 1 && cfg.channels != 3) throw ConfigError("channels must be 1 or 3");
    if (cfg.stage < 1 || cfg.stage > 3) throw ConfigError("stage must be 1, 2 or 3");
    cfg.weights.validate(cfg.pyramid.num_scales);
    if (cfg.weights.beta < 0.0) throw ConfigError("loss.beta must be >= 0");
    if (cfg.schedule.iterations <= 0 || cfg.schedule.batch_size <= 0) {
        throw ConfigError("train.iterations and train.batch_size must be positive");
    }
    if (cfg.boundary_radius < 0) throw ConfigError("eval.boundary_radius must be >= 0");
    if (cfg.points <= 0) throw ConfigError("gradcheck.points must be positive");
}

} // namespace edgestereo
