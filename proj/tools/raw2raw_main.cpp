// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <iostream>

#include "raw2raw/toolsrv/cli.hpp"

int main(int argc, char **argv)
{
    return raw2raw::tools::run_cli(argc, argv, std::cout, std::cerr);
}
