// Copyright 2026 The spadrecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPADRECON_TOOLS_COMMANDS_HPP
#define SPADRECON_TOOLS_COMMANDS_HPP

#include "spadrecon/config.hpp"

namespace spadrecon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitFit = 3;

/// Each command writes its files under cfg.out (a directory).
void cmd_characterize(const RunConfig &cfg);
void cmd_build_matrix(const RunConfig &cfg);
void cmd_reconstruct(const RunConfig &cfg);
void cmd_simulate(const RunConfig &cfg);
void cmd_hist(const RunConfig &cfg);
void cmd_uncertainty(const RunConfig &cfg);

/// Maps an error code to the process exit status.
int exit_code_for(ErrorCode code);

int run(int argc, char **argv);

}  // namespace spadrecon::cli

#endif  // SPADRECON_TOOLS_COMMANDS_HPP
