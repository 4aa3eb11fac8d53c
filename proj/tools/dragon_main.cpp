// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return dragon::run_cli(argc, argv, std::cout, std::cerr); }
