// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#include "prunekit/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return prunekit::run_cli(argc, argv, std::cout, std::cerr); }
