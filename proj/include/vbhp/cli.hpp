#pragma once

namespace vbhp {

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run_cli(int argc, char** argv);

}  // namespace vbhp
