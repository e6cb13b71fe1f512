#ifndef ERGODEC_ERROR_HPP
#define ERGODEC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ergodec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exhaustive enumeration requested beyond the supported group order.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A permutation moves indices outside the configuration window.
class DegreeOverflowError : public Error {
 public:
  using Error::Error;
};

// Radon-Nikodym ratio requested at a point of zero mass.
class ZeroMassError : public Error {
 public:
  using Error::Error;
};

// nu(f) is infinite (or zero) so the normalization is undefined.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ergodec

#endif  // ERGODEC_ERROR_HPP
