#ifndef INSURTREND_COMMON_HPP
#define INSURTREND_COMMON_HPP

#include <cstdio>
#include <stdexcept>
#include <string>

namespace insurtrend {

inline constexpr const char* kToolVersion = "0.3.1";

/// Raised for malformed inputs, contract violations and failed stages.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Numeric training failure (non-finite loss or activation).
class TrainingError : public Error {
  public:
    using Error::Error;
};

/// Round-trip rendering: every exported double uses 17 significant digits.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace insurtrend

#endif
