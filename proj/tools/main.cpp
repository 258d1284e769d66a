// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/cli.hpp"

int main(int argc, char** argv) { return cap2sum::run_cli(argc, argv); }
