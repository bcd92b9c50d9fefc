#ifndef TWINDECOMP_ERRORS_HPP
#define TWINDECOMP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace twindecomp {

// Bad configuration: invalid window kind, probabilities out of range,
// malformed config JSON, bad flag combinations resolved before any data
// is touched.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Bad data: malformed rows, duplicate ids, inconsistent ages, empty
// required estimation cells.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Input file header does not match the canonical schema.
class SchemaError : public DataError {
 public:
  explicit SchemaError(const std::string& what) : DataError(what) {}
};

// Estimation failure: rank deficiency, too few clusters, empty samples.
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace twindecomp

#endif  // TWINDECOMP_ERRORS_HPP
