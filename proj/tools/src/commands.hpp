#pragma once

#include <iosfwd>

#include "src/run_config.hpp"

namespace splitpit::cli {

// Each command prints its effective configuration first and returns the
// process exit code. Errors propagate as exceptions.

int cmd_gen_data(const RunConfig& config, std::ostream& out);
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out);
int cmd_split(const RunConfig& config, std::ostream& out);
int cmd_gradcheck(const RunConfig& config, std::ostream& out);
int cmd_ablate(const RunConfig& config, std::ostream& out);

}  // namespace splitpit::cli
