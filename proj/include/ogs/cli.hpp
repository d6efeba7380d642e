// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace ogs::cli {

// Exit codes: 0 success, 1 usage error, 2 runtime error.
int dispatch(int argc, const char* const* argv);

} // namespace ogs::cli
