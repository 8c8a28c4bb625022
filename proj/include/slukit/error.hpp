#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slukit {

// Root of every error the library throws. `kind()` is a stable machine tag
// used by the CLI when it prints one-line diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Tensor extents do not line up.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& m) : Error("contract", m) {}
};

// Empty batch, fully masked row, no non-ignored targets, ...
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& m) : Error("degenerate", m) {}
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& m, std::size_t line)
      : Error("parse", line ? "line " + std::to_string(line) + ": " + m : m),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Dataset content violates the corpus schema, or data is missing.
class DataError : public Error {
 public:
  explicit DataError(const std::string& m, std::size_t line = 0)
      : Error("data", line ? "line " + std::to_string(line) + ": " + m : m),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Configuration schema or type problem. `path()` is the dotted key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& m)
      : Error("config", path.empty() ? m : path + ": " + m), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Components that parse individually but do not fit together.
class AssemblyError : public Error {
 public:
  explicit AssemblyError(const std::string& m) : Error("assembly", m) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string& m) : Error("lookup", m) {}
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& m) : Error("divergence", m) {}
};

}  // namespace slukit
