#ifndef HEIS_ERRORS_HPP
#define HEIS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace heis {

// Operation requires a frame (or an inverse) that does not exist at the origin.
struct DegeneratePoint : std::domain_error {
  explicit DegeneratePoint(const std::string& what) : std::domain_error(what) {}
};

// Kernel evaluated at its pole y == z.
struct PoleHit : std::domain_error {
  explicit PoleHit(const std::string& what) : std::domain_error(what) {}
};

// Integrator spent its full budget without reaching the requested tolerance.
struct BudgetExhausted : std::runtime_error {
  BudgetExhausted(const std::string& what, double value, double error)
      : std::runtime_error(what), value(value), error(error) {}
  double value;
  double error;
};

}  // namespace heis

#endif
