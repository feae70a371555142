#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ktm::cli {

/// Exit codes: 0 success, 1 operational error (message on `err`), 2 usage.
int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

}  // namespace ktm::cli
