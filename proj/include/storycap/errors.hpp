#pragma once

#include <stdexcept>
#include <string>

namespace storycap {

// Raised for malformed or inconsistent user input: bad files, bad config,
// violated preconditions on data read from disk. The CLI maps this to
// exit code 2; everything else is an internal error (exit code 1).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace storycap
