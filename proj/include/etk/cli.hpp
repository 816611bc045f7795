#pragma once

#include <ostream>

#include "etk/config.hpp"

namespace etk::cli {

// Front end: parses argv, loads the config, applies flag overrides, and
// dispatches. Exit codes: 0 success, 2 input/config error, 3 numeric
// failure.
int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);

void cmd_invert(const RunConfig& cfg, std::ostream& out);
void cmd_edit(const RunConfig& cfg, std::ostream& out);
void cmd_pcs(const RunConfig& cfg, std::ostream& out);
void cmd_lambda_avg(const RunConfig& cfg, std::ostream& out);
bool cmd_verify(const RunConfig& cfg, std::ostream& out);  // false on failure
void cmd_curve(const RunConfig& cfg, std::ostream& out);
void cmd_nfe(const RunConfig& cfg, std::ostream& out);

}  // namespace etk::cli
