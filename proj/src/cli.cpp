#include "subadj/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "subadj/score.hpp"
#include "subadj/train.hpp"

namespace subadj {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void usage(std::ostream& os) {
    os << "usage: subadj <generate|train|eval|sweep> [--config FILE] [--key value ...]\n"
          "  generate  write synthetic train.csv/test.csv plus provenance into out_dir\n"
          "  train     fit a model on data.train and write checkpoint + training log\n"
          "  eval      score data.test with --checkpoint and write report + score CSV\n"
          "            flags: --mode full|raw  --no-point-adjust  --entity-average\n"
          "  sweep     train/eval over a grid: --axis k1k2|lambda|window|mapping --values a,b,...\n"
          "Flags mirror config keys (e.g. --model.d_model 64); precedence is\n"
          "flag > SUBADJ_OUT_DIR (out_dir only) > config file > default.\n";
}

TimeSeriesDataset load_and_normalize(const RunConfig& cfg, const std::string& test_path,
                                     bool need_labels) {
    if (cfg.data_train.empty()) throw ConfigError("data.train is required");
    if (test_path.empty()) throw ConfigError("data.test is required");
    TimeSeriesDataset ds = load_csv(cfg.data_train, test_path, cfg.label_column);
    if (need_labels && ds.test_labels.empty()) {
        throw InputError(test_path + ": evaluation needs the label column \"" + cfg.label_column +
                         "\"");
    }
    return normalize(std::move(ds));
}

struct TrainArtifacts {
    ModelParams params;
    ModelConfig model_cfg;
    TrainingLog log;
};

TrainArtifacts run_training(const RunConfig& cfg) {
    if (cfg.data_train.empty()) throw ConfigError("data.train is required");
    // Training does not need labels; without a test path the train file
    // stands in so normalization statistics still come from it alone.
    TimeSeriesDataset ds =
        cfg.test_paths().empty()
            ? normalize(load_csv(cfg.data_train, cfg.data_train, ""))
            : load_and_normalize(cfg, cfg.test_paths().front(), false);
    ModelConfig model_cfg = cfg.model;
    model_cfg.n_channels = ds.train.cols;
    model_cfg.finalize();
    FitResult fitres = fit(ds, model_cfg, cfg.train);
    return {std::move(fitres.params), model_cfg, std::move(fitres.log)};
}

EvalReport evaluate_with(const RunConfig& cfg, const ModelParams& params,
                         const ModelConfig& model_cfg, const std::string& out_dir) {
    const auto paths = cfg.test_paths();
    if (paths.empty()) throw ConfigError("data.test is required for evaluation");
    std::vector<Entity> entities;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        TimeSeriesDataset ds = load_and_normalize(cfg, paths[i], true);
        ScoreSeries series = score_series(ds, params, model_cfg, cfg.score);
        const std::string score_name = paths.size() == 1
                                           ? "scores.csv"
                                           : "scores_" + std::to_string(i) + ".csv";
        write_score_csv(join(out_dir, score_name), series);
        entities.push_back({series.eval_scores(), series.labels});
    }
    EvalReport report = cfg.eval_entity_average
                            ? evaluate_entity_average(entities, cfg.eval_point_adjust)
                            : evaluate_concat(entities, cfg.eval_point_adjust);
    std::ofstream rpt(join(out_dir, "report.txt"));
    if (!rpt) throw IoError("cannot write report.txt in " + out_dir);
    rpt << report_text(report);
    std::ofstream row(join(out_dir, "report_row.csv"));
    row << report_csv_header() << "\n" << report_csv_row(report) << "\n";
    return report;
}

}  // namespace

int cmd_generate(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir);
    SyntheticSpec spec = make_default_spec(cfg.seed, cfg.gen.train_length, cfg.gen.test_length, cfg.mix);
    spec.amplitude = cfg.gen.amplitude;
    spec.period = cfg.gen.period;
    spec.noise_std = cfg.gen.noise_std;
    spec.validate();
    TimeSeriesDataset ds = generate_synthetic(spec);

    write_series_csv(join(cfg.out_dir, "train.csv"), ds.train, ds.channels, nullptr);
    write_series_csv(join(cfg.out_dir, "test.csv"), ds.test, ds.channels, &ds.test_labels);

    long label_count = 0;
    for (int v : ds.test_labels) label_count += v;

    std::ofstream prov(join(cfg.out_dir, "provenance.txt"));
    if (!prov) throw IoError("cannot write provenance.txt in " + cfg.out_dir);
    char buf[96];
    prov << "generator = subadj synthetic v1\n";
    prov << "seed = " << spec.seed << "\n";
    prov << "train_length = " << spec.train_length << "\n";
    prov << "test_length = " << spec.test_length << "\n";
    std::snprintf(buf, sizeof(buf), "amplitude = %.17g\n", spec.amplitude);
    prov << buf;
    std::snprintf(buf, sizeof(buf), "period = %.17g\n", spec.period);
    prov << buf;
    std::snprintf(buf, sizeof(buf), "noise_std = %.17g\n", spec.noise_std);
    prov << buf;
    for (std::size_t i = 0; i < spec.anomalies.size(); ++i) {
        const auto& a = spec.anomalies[i];
        std::snprintf(buf, sizeof(buf), "anomaly.%zu = %s,%d,%d,%.17g\n", i,
                      to_string(a.kind).c_str(), a.position, a.span, a.magnitude);
        prov << buf;
    }
    prov << "labels.count = " << label_count << "\n";
    std::snprintf(buf, sizeof(buf), "labels.rate = %.17g\n",
                  static_cast<double>(label_count) / spec.test_length);
    prov << buf;
    if (!prov) throw IoError("failed writing provenance.txt");

    std::cout << "generated " << spec.train_length << " train and " << spec.test_length
              << " test points (" << label_count << " anomalous) in " << cfg.out_dir << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir);
    TrainArtifacts art = run_training(cfg);
    save_checkpoint(join(cfg.out_dir, "checkpoint.txt"), art.params, art.model_cfg);
    write_training_log_csv(join(cfg.out_dir, "training_log.csv"), art.log);
    std::cout << "trained " << art.log.epochs.size() << " epochs; best epoch "
              << art.log.best_epoch << " with validation loss " << art.log.best_val_loss << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("--checkpoint is required for eval");
    ensure_dir(cfg.out_dir);
    auto [params, model_cfg] = load_checkpoint(cfg.checkpoint);
    EvalReport report = evaluate_with(cfg, params, model_cfg, cfg.out_dir);
    std::cout << report_text(report);
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& axis, const std::string& values) {
    if (axis != "k1k2" && axis != "lambda" && axis != "window" && axis != "mapping") {
        throw ConfigError("sweep: unknown axis \"" + axis +
                          "\" (expected k1k2, lambda, window, or mapping)");
    }
    if (values.empty()) throw ConfigError("sweep: --values is required");
    ensure_dir(cfg.out_dir);

    std::vector<std::string> points;
    {
        std::istringstream ss(values);
        std::string field;
        while (std::getline(ss, field, ',')) {
            if (!field.empty()) points.push_back(field);
        }
    }
    if (points.empty()) throw ConfigError("sweep: no grid points in \"" + values + "\"");

    std::ofstream out(join(cfg.out_dir, "sweep.csv"));
    if (!out) throw IoError("cannot write sweep.csv in " + cfg.out_dir);
    out << "axis,value,status," << report_csv_header() << "\n";

    for (const auto& point : points) {
        RunConfig run = cfg;
        try {
            if (axis == "lambda") {
                run.train.lambda = std::stod(point);
            } else if (axis == "window") {
                run.model.win_size = std::stoi(point);
                run.model.finalize();
            } else if (axis == "mapping") {
                run.model.mapping.kind = mapping_kind_from_string(point);
            } else {  // k1k2 as "K1:K2"
                const std::size_t colon = point.find(':');
                if (colon == std::string::npos) {
                    throw ConfigError("sweep: k1k2 values look like 20:30, got \"" + point + "\"");
                }
                run.model.span.k1 = std::stoi(point.substr(0, colon));
                run.model.span.k2 = std::stoi(point.substr(colon + 1));
                run.model.finalize();
            }
            std::string label = axis + "_" + point;
            for (auto& c : label) {
                if (c == ':' || c == '.') c = '-';
            }
            run.out_dir = join(cfg.out_dir, label);
            ensure_dir(run.out_dir);

            TrainArtifacts art = run_training(run);
            save_checkpoint(join(run.out_dir, "checkpoint.txt"), art.params, art.model_cfg);
            write_training_log_csv(join(run.out_dir, "training_log.csv"), art.log);
            EvalReport report = evaluate_with(run, art.params, art.model_cfg, run.out_dir);
            out << axis << "," << point << ",ok," << report_csv_row(report) << "\n";
            std::cout << "sweep point " << axis << "=" << point << ": f1_adjusted=" << report.f1
                      << "\n";
        } catch (const std::exception& e) {
            out << axis << "," << point << ",failed," << report_csv_header() << "\n";
            std::cerr << "sweep point " << axis << "=" << point << " failed: " << e.what() << "\n";
        }
    }
    return 0;
}

int cli_run(const std::vector<std::string>& args) {
    if (args.empty()) {
        usage(std::cerr);
        return 1;
    }
    const std::string verb = args.front();
    if (verb == "help" || verb == "--help" || verb == "-h") {
        usage(std::cout);
        return 0;
    }
    std::vector<std::string> tail(args.begin() + 1, args.end());
    std::vector<std::string> positional;
    KeyValues flags = parse_flags(tail, positional);

    std::string axis, values;
    if (verb == "sweep") {
        if (auto it = flags.find("axis"); it != flags.end()) {
            axis = it->second;
            flags.erase(it);
        }
        if (auto it = flags.find("values"); it != flags.end()) {
            values = it->second;
            flags.erase(it);
        }
    }
    if (!positional.empty()) {
        throw ConfigError("unexpected argument \"" + positional.front() + "\"");
    }

    KeyValues file_values;
    if (auto it = flags.find("config"); it != flags.end()) {
        file_values = parse_config_file(it->second);
        flags.erase(it);
    }
    RunConfig cfg = build_run_config(file_values, flags);

    AllocStats::reset();
    const auto t0 = std::chrono::steady_clock::now();
    int rc = 0;
    if (verb == "generate") {
        rc = cmd_generate(cfg);
    } else if (verb == "train") {
        rc = cmd_train(cfg);
    } else if (verb == "eval") {
        rc = cmd_eval(cfg);
    } else if (verb == "sweep") {
        rc = cmd_sweep(cfg, axis, values);
    } else {
        usage(std::cerr);
        throw ConfigError("unknown command \"" + verb + "\"");
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(t1 - t0).count();
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "wall_clock_seconds=%.3f peak_tensor_bytes=%zu tensor_allocations=%zu\n", seconds,
                  AllocStats::peak_bytes.load(), AllocStats::total_allocations.load());
    std::cout << buf;
    return rc;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        return cli_run(args);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace subadj
