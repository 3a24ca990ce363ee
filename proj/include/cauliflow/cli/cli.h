// Copyright (c) 2026 The Cauliflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAULIFLOW_CLI_CLI_H_
#define CAULIFLOW_CLI_CLI_H_

#include <string>
#include <vector>

namespace cauliflow::cli {

enum ExitCode : int {
  kOk = 0,
  kSelfTestFailed = 1,
  kUsage = 2,
  kMissingInput = 3,
  kConfigInvalid = 4,
  kDataInvalid = 5,
  kDiverged = 6,
};

// Runs one subcommand. `args` excludes the program name.
int Run(const std::vector<std::string>& args);

}  // namespace cauliflow::cli

#endif  // CAULIFLOW_CLI_CLI_H_
