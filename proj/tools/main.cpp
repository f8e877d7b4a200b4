// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) {
  return evsel::app::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
