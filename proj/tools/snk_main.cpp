// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/cli.h"

#include <iostream>

int
main(int argc, char **argv) {
    return snk::dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
