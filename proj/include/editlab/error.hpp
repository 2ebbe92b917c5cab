#pragma once

#include <stdexcept>
#include <string>

namespace editlab {

// Exit-code taxonomy used by the CLI: validation errors exit 1, runtime or
// numerical failures exit 2, self-test failures exit 3.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace editlab
