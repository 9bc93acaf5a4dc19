#pragma once

#include <stdexcept>
#include <string>

namespace driftlens {

// Raised for malformed inputs: bad files, violated preconditions, unsatisfiable
// requests. The CLI maps this to exit code 1; anything else escaping to main
// is an internal error and maps to exit code 2.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace driftlens
