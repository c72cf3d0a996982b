#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hbound {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Invalid arguments or malformed input. Maps to CLI exit code 2.
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Problem without usable content (e.g. every hypothesis outside the view). Exit code 3.
class DegenerateError : public std::runtime_error {
public:
    explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& what)
{
    if (!ok) throw ParameterError(what);
}

// Relative comparison used by tests and audits.
inline bool near_rel(double a, double b, double rel, double abs_tol = 0.0)
{
    return std::abs(a - b) <= abs_tol + rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace hbound
