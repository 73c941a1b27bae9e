// Copyright 2026 The ARFNet Authors. All Rights Reserved.
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

#pragma once

#include <string>
#include <vector>

namespace arfnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // contract violations and runtime failures
inline constexpr int kExitConfig = 2;   // config, usage and input errors

/// Runs one subcommand; `args` excludes the program name. Errors are
/// reported on stderr and mapped to an exit code, never thrown.
int run(const std::vector<std::string>& args);

int run(int argc, const char* const* argv);

}  // namespace arfnet::cli
