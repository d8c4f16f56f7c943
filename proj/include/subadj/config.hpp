#pragma once

#include <map>
#include <string>
#include <vector>

#include "subadj/data.hpp"
#include "subadj/model.hpp"
#include "subadj/score.hpp"
#include "subadj/train.hpp"

namespace subadj {

using KeyValues = std::map<std::string, std::string>;

// "key = value" lines, '#' comments. Keys are flat dotted names.
KeyValues parse_config_file(const std::string& path);

// --key value / --key=value pairs. Aliases: --mode MODE for score.mode,
// --no-point-adjust for eval.point_adjust=false, --entity-average for
// eval.entity_average=true. Consumed pairs are removed; anything left in
// `rest` is positional.
KeyValues parse_flags(const std::vector<std::string>& args, std::vector<std::string>& rest);

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    ScoreConfig score;
    SyntheticSpec gen;
    SyntheticMix mix;
    std::string data_train;
    std::string data_test;  // comma-separated list allowed for multi-entity eval
    std::string label_column = "label";
    std::string checkpoint;
    std::string out_dir = ".";
    bool eval_point_adjust = true;
    bool eval_entity_average = false;
    std::uint64_t seed = 7;

    std::vector<std::string> test_paths() const;
};

// Precedence: CLI flag > SUBADJ_OUT_DIR (out_dir only) > config file >
// default. Unknown keys are configuration errors.
RunConfig build_run_config(const KeyValues& file_values, const KeyValues& flag_values);

// Resolved key/value view of a config, used by provenance files.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

}  // namespace subadj
