#pragma once

#include <stdexcept>
#include <string>

namespace quadsim {

// Malformed files, bad parameters, scenario validation failures.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A sample fell where no membership function is positive.
class CoverageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Iterative routine failed to converge / produced unusable numbers.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Planner cannot satisfy signal-window / headway constraints.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace quadsim
