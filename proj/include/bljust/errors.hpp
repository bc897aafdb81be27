#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>

namespace bljust {

struct RunTrace;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A loss, gradient or parameter became NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NumericError raised inside a training run, with the position where it
// happened and whatever trace had been recorded up to that point.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::string phase, int epoch,
                  long step, std::shared_ptr<const RunTrace> partial)
      : NumericError(what),
        phase_(std::move(phase)),
        epoch_(epoch),
        step_(step),
        partial_(std::move(partial)) {}

  const std::string& phase() const { return phase_; }
  int epoch() const { return epoch_; }
  long step() const { return step_; }
  const std::shared_ptr<const RunTrace>& partial_trace() const {
    return partial_;
  }

 private:
  std::string phase_;
  int epoch_;
  long step_;
  std::shared_ptr<const RunTrace> partial_;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " +
                                          what
                                    : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bljust
