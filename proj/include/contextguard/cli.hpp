/*
 * Copyright 2026 The ContextGuard Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line entry point:
//   contextguard <gen|train|eval|robustness|ablate|paradigms|serve>
//       [--config PATH] [--seed N] [--out DIR] [--paradigm P] [--workers N]
//       [--oracle] [--epochs N] [--set KEY=VALUE]...
// Exit codes: 0 ok, 1 usage or unknown command, 2 config error, 3 data
// error, 4 training divergence.

#ifndef CONTEXTGUARD_CLI_HPP_
#define CONTEXTGUARD_CLI_HPP_

#include <ostream>

namespace contextguard {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace contextguard

#endif  // CONTEXTGUARD_CLI_HPP_
