// SPDX-License-Identifier: Apache-2.0
#include "unitlens/cli/commands.hpp"

int main(int argc, char** argv) { return unitlens::cli::run_cli(argc, argv); }
