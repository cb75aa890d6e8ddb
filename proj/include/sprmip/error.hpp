#pragma once

#include <stdexcept>
#include <string>

namespace sprmip {

// Input violates a documented shape or range precondition.
class MalformedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Hyper-parameters or solver settings outside their valid domain.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Byte-level problem with a file being read (IDX, model JSON, LP text).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A hidden layer would lose every neuron at the requested threshold.
class OverPrunedLayer : public std::runtime_error {
 public:
  OverPrunedLayer(int layer, const std::string& what)
      : std::runtime_error(what), layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

// Clean input is not classified correctly by the network under test.
class InvalidInstance : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Enumeration oracle asked to visit more activation patterns than allowed.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Something that must hold by construction did not (e.g. infeasible OBBT
// relaxation for a valid box, simplex iteration cap).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sprmip
