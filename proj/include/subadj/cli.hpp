#pragma once

#include <string>
#include <vector>

#include "subadj/config.hpp"
#include "subadj/eval.hpp"

namespace subadj {

// Verbs: generate | train | eval | sweep. Exit codes: 0 success,
// 1 input/config error, 2 numerical failure.
int cli_main(int argc, char** argv);

// Testable entry point: args exclude the program name.
int cli_run(const std::vector<std::string>& args);

int cmd_generate(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_sweep(const RunConfig& cfg, const std::string& axis, const std::string& values);

}  // namespace subadj
