#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace agmax {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Shape disagreement between the operands of a graph op.
class ShapeError : public Error {
public:
  ShapeError(const std::string& op, const std::vector<std::size_t>& lhs,
             const std::vector<std::size_t>& rhs)
      : Error(format(op, lhs, rhs)) {}

  static std::string format(const std::string& op,
                            const std::vector<std::size_t>& lhs,
                            const std::vector<std::size_t>& rhs) {
    std::ostringstream os;
    os << op << ": shape mismatch " << to_string(lhs) << " vs " << to_string(rhs);
    return os.str();
  }

  static std::string to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i > 0) os << ",";
      os << shape[i];
    }
    os << ")";
    return os.str();
  }
};

/// Invalid configuration or usage. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Malformed input file. Carries the byte offset of the defect.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

/// Non-finite value where a finite one is required. The CLI maps this to exit code 3.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

}  // namespace agmax
