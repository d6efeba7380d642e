// SPDX-License-Identifier: Apache-2.0
#include "ogs/cli.hpp"

int main(int argc, char** argv) { return ogs::cli::dispatch(argc, argv); }
