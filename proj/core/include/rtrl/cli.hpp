#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rtrl {

/// Regimes accepted by `train --regime`.
const std::vector<std::string>& train_regimes();

/// Entry point behind the `rtrl` executable. args[0] is the program name.
/// Returns 0 on success; failures print one "error: ..." line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rtrl
