/*
 * Copyright 2026 The routebargain Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * \file cli.hpp
 *
 * \brief The routebargain command-line driver, callable in-process.
 */

#ifndef ROUTEBARGAIN_TOOLS_CLI_HPP
#define ROUTEBARGAIN_TOOLS_CLI_HPP

#include "record.hpp"
#include "scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace routebargain::cli {

enum ExitCode : int
{
    exit_ok = 0,
    exit_no_convergence = 1,
    exit_invalid = 2,
    exit_check_failed = 3,
};

struct GoldenCheck
{
    std::string name;
    bool passed = false;
    double value = 0.0;
    std::string expected;
};

/// The fixed checks run by `paper-examples`.
std::vector<GoldenCheck> run_paper_checks(std::uint64_t seed = 0);

struct ParamGrid
{
    std::string name;
    std::vector<double> values;
};

/// "name=a..b[:step]" or "name=v".
ParamGrid parse_param_grid(const std::string& text);

/// Runs one command line; output goes to `out` unless --out is given.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace routebargain::cli

#endif // ROUTEBARGAIN_TOOLS_CLI_HPP
