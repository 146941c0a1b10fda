// mftl command-line entry point.
// SPDX-License-Identifier: MIT
#include "mftl/harness.hpp"

int main(int argc, char** argv) { return mftl::cli(argc, argv); }
