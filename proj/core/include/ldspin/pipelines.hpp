#pragma once

#include <string>

#include "ldspin/config.hpp"

namespace ldspin {

// Exit-code contract shared with the CLI:
//   0 success, 1 config parse error, 2 resource cap / infeasible,
//   3 invariant violation.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitCap = 2;
inline constexpr int kExitInvariant = 3;

// Writes certificate.json into out_dir; exit 0 iff a feasible (a, beta0)
// exists on the configured grid.
int cmd_certify(const RunConfig& config, const std::string& out_dir);

// Dispatches one named pipeline (exact | expand | rate | level2 | gtgap |
// psinorm | clt), writing deterministic CSV/JSON outputs into out_dir.
// `uncertified` permits beta above the certified beta0.
int cmd_run(const RunConfig& config, const std::string& pipeline,
            const std::string& out_dir, bool uncertified = false);

}  // namespace ldspin
