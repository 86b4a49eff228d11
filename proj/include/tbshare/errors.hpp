#ifndef TBSHARE_ERRORS_HPP
#define TBSHARE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tbshare {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data violates the schema or a panel invariant.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// A model could not be estimated (rank deficiency, too few observations,
// no admissible threshold candidates, ...).
class EstimationError : public Error {
public:
    explicit EstimationError(const std::string& msg) : Error(msg) {}
};

// File or stream failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace tbshare

#endif
