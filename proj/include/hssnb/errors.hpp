#ifndef HSSNB_ERRORS_HPP
#define HSSNB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hssnb {

// Dimension or layout disagreement between tensors/layers.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument value (bad counts, fractions out of range, ...).
struct ParamError : std::invalid_argument {
    explicit ParamError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Dataset/file content problems: missing files, malformed headers, size mismatches.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: training divergence, gradient-check failure.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hssnb

#endif  // HSSNB_ERRORS_HPP
