#pragma once

#include <stdexcept>
#include <string>

namespace qbound {

// Bad user input: malformed constants, wrong shapes, non-Hermitian matrices.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// A mathematical precondition failed: singular state, non-commuting tail pair, ...
class PreconditionError : public std::domain_error {
public:
    explicit PreconditionError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace qbound
