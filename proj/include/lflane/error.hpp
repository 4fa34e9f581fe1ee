#pragma once

#include <stdexcept>
#include <string>

namespace lflane {

// Exit codes shared by every CLI subcommand.
enum class exit_code : int { ok = 0, usage = 1, data = 2, numerical = 3 };

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual exit_code code() const noexcept { return exit_code::data; }
};

// Bad user input: flags, parameters out of range.
class usage_error : public error {
 public:
  using error::error;
  exit_code code() const noexcept override { return exit_code::usage; }
};

// Missing files, malformed containers, violated data invariants.
class data_error : public error {
 public:
  using error::error;
};

// NaN/Inf during training or evaluation.
class numerical_error : public error {
 public:
  using error::error;
  exit_code code() const noexcept override { return exit_code::numerical; }
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw data_error(what);
}

}  // namespace lflane
