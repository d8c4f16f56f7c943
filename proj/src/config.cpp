#include "subadj/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace subadj {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError(key + ": expected a boolean, got \"" + value + "\"");
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got \"" + value + "\"");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got \"" + value + "\"");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got \"" + value + "\"");
    }
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") {
        cfg.seed = parse_u64(key, value);
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "model.d_model") {
        cfg.model.d_model = parse_int(key, value);
    } else if (key == "model.n_layers") {
        cfg.model.n_layers = parse_int(key, value);
    } else if (key == "model.n_heads") {
        cfg.model.n_heads = parse_int(key, value);
    } else if (key == "model.d_ff") {
        cfg.model.d_ff = parse_int(key, value);
    } else if (key == "model.win_size") {
        cfg.model.win_size = parse_int(key, value);
    } else if (key == "model.dropout") {
        cfg.model.dropout = parse_double(key, value);
    } else if (key == "span.k1") {
        cfg.model.span.k1 = parse_int(key, value);
    } else if (key == "span.k2") {
        cfg.model.span.k2 = parse_int(key, value);
    } else if (key == "mapping.kind") {
        cfg.model.mapping.kind = mapping_kind_from_string(value);
    } else if (key == "mapping.clamp_value") {
        cfg.model.mapping.clamp_value = parse_double(key, value);
    } else if (key == "mapping.tau_init") {
        cfg.model.mapping.tau_init = parse_double(key, value);
    } else if (key == "mapping.power_exponent") {
        cfg.model.mapping.power_exponent = parse_double(key, value);
    } else if (key == "mapping.renormalize") {
        cfg.model.mapping.renormalize = parse_bool(key, value);
    } else if (key == "train.lambda") {
        cfg.train.lambda = parse_double(key, value);
    } else if (key == "train.lr") {
        cfg.train.lr = parse_double(key, value);
    } else if (key == "train.batch_size") {
        cfg.train.batch_size = parse_int(key, value);
    } else if (key == "train.max_epochs") {
        cfg.train.max_epochs = parse_int(key, value);
    } else if (key == "train.patience") {
        cfg.train.patience = parse_int(key, value);
    } else if (key == "train.val_fraction") {
        cfg.train.val_fraction = parse_double(key, value);
    } else if (key == "train.subsample_ratio") {
        cfg.train.subsample_ratio = parse_double(key, value);
    } else if (key == "score.mode") {
        cfg.score.mode = score_mode_from_string(value);
    } else if (key == "score.gauss_window") {
        cfg.score.gauss_window = parse_int(key, value);
    } else if (key == "score.sigma_floor") {
        cfg.score.sigma_floor = parse_double(key, value);
    } else if (key == "score.use_sigma_squared") {
        cfg.score.use_sigma_squared = parse_bool(key, value);
    } else if (key == "eval.point_adjust") {
        cfg.eval_point_adjust = parse_bool(key, value);
    } else if (key == "eval.entity_average") {
        cfg.eval_entity_average = parse_bool(key, value);
    } else if (key == "data.train") {
        cfg.data_train = value;
    } else if (key == "data.test") {
        cfg.data_test = value;
    } else if (key == "data.label_column") {
        cfg.label_column = value;
    } else if (key == "checkpoint") {
        cfg.checkpoint = value;
    } else if (key == "gen.train_length") {
        cfg.gen.train_length = parse_int(key, value);
    } else if (key == "gen.test_length") {
        cfg.gen.test_length = parse_int(key, value);
    } else if (key == "gen.amplitude") {
        cfg.gen.amplitude = parse_double(key, value);
    } else if (key == "gen.period") {
        cfg.gen.period = parse_double(key, value);
    } else if (key == "gen.noise_std") {
        cfg.gen.noise_std = parse_double(key, value);
    } else if (key == "gen.n_global") {
        cfg.mix.n_global = parse_int(key, value);
    } else if (key == "gen.n_contextual") {
        cfg.mix.n_contextual = parse_int(key, value);
    } else if (key == "gen.n_shapelet") {
        cfg.mix.n_shapelet = parse_int(key, value);
    } else if (key == "gen.span_shapelet") {
        cfg.mix.span_shapelet = parse_int(key, value);
    } else if (key == "gen.n_seasonal") {
        cfg.mix.n_seasonal = parse_int(key, value);
    } else if (key == "gen.span_seasonal") {
        cfg.mix.span_seasonal = parse_int(key, value);
    } else if (key == "gen.n_trend") {
        cfg.mix.n_trend = parse_int(key, value);
    } else if (key == "gen.span_trend") {
        cfg.mix.span_trend = parse_int(key, value);
    } else {
        throw ConfigError("unknown configuration key \"" + key + "\"");
    }
}

}  // namespace

KeyValues parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    KeyValues out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected \"key = value\", got \"" + line + "\"");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        }
        out[key] = value;
    }
    return out;
}

KeyValues parse_flags(const std::vector<std::string>& args, std::vector<std::string>& rest) {
    KeyValues out;
    rest.clear();
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0) {
            rest.push_back(arg);
            continue;
        }
        std::string key = arg.substr(2);
        std::string value;
        const std::size_t eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else if (key == "no-point-adjust") {
            out["eval.point_adjust"] = "false";
            continue;
        } else if (key == "entity-average") {
            out["eval.entity_average"] = "true";
            continue;
        } else {
            if (i + 1 >= args.size()) {
                throw ConfigError("flag --" + key + " is missing a value");
            }
            value = args[++i];
        }
        if (key == "mode") key = "score.mode";
        out[key] = value;
    }
    return out;
}

std::vector<std::string> RunConfig::test_paths() const {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(data_test);
    while (std::getline(ss, field, ',')) {
        if (!field.empty()) out.push_back(field);
    }
    return out;
}

RunConfig build_run_config(const KeyValues& file_values, const KeyValues& flag_values) {
    RunConfig cfg;
    for (const auto& [key, value] : file_values) {
        if (key == "config") continue;
        apply_key(cfg, key, value);
    }
    if (const char* env = std::getenv("SUBADJ_OUT_DIR"); env && *env) {
        cfg.out_dir = env;
    }
    for (const auto& [key, value] : flag_values) {
        if (key == "config") continue;
        apply_key(cfg, key, value);
    }
    cfg.train.seed = cfg.seed;
    cfg.gen.seed = cfg.seed;
    cfg.model.finalize();
    cfg.train.validate();
    cfg.score.validate();
    return cfg;
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out.emplace_back("seed", std::to_string(cfg.seed));
    out.emplace_back("out_dir", cfg.out_dir);
    out.emplace_back("model.d_model", std::to_string(cfg.model.d_model));
    out.emplace_back("model.n_layers", std::to_string(cfg.model.n_layers));
    out.emplace_back("model.n_heads", std::to_string(cfg.model.n_heads));
    out.emplace_back("model.d_ff", std::to_string(cfg.model.d_ff));
    out.emplace_back("model.win_size", std::to_string(cfg.model.win_size));
    out.emplace_back("model.dropout", num(cfg.model.dropout));
    out.emplace_back("span.k1", std::to_string(cfg.model.span.k1));
    out.emplace_back("span.k2", std::to_string(cfg.model.span.k2));
    out.emplace_back("mapping.kind", to_string(cfg.model.mapping.kind));
    out.emplace_back("mapping.clamp_value", num(cfg.model.mapping.clamp_value));
    out.emplace_back("mapping.tau_init", num(cfg.model.mapping.tau_init));
    out.emplace_back("mapping.power_exponent", num(cfg.model.mapping.power_exponent));
    out.emplace_back("mapping.renormalize", cfg.model.mapping.renormalize ? "true" : "false");
    out.emplace_back("train.lambda", num(cfg.train.lambda));
    out.emplace_back("train.lr", num(cfg.train.lr));
    out.emplace_back("train.batch_size", std::to_string(cfg.train.batch_size));
    out.emplace_back("train.max_epochs", std::to_string(cfg.train.max_epochs));
    out.emplace_back("train.patience", std::to_string(cfg.train.patience));
    out.emplace_back("train.val_fraction", num(cfg.train.val_fraction));
    out.emplace_back("train.subsample_ratio", num(cfg.train.subsample_ratio));
    out.emplace_back("score.mode", to_string(cfg.score.mode));
    out.emplace_back("score.gauss_window", std::to_string(cfg.score.gauss_window));
    out.emplace_back("score.sigma_floor", num(cfg.score.sigma_floor));
    out.emplace_back("score.use_sigma_squared", cfg.score.use_sigma_squared ? "true" : "false");
    out.emplace_back("eval.point_adjust", cfg.eval_point_adjust ? "true" : "false");
    out.emplace_back("eval.entity_average", cfg.eval_entity_average ? "true" : "false");
    out.emplace_back("data.train", cfg.data_train);
    out.emplace_back("data.test", cfg.data_test);
    out.emplace_back("data.label_column", cfg.label_column);
    return out;
}

}  // namespace subadj
