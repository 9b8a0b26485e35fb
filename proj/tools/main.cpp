// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli_app.hpp"

int main(int argc, char** argv) {
  return krnet::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
