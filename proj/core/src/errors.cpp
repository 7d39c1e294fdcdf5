#include "urkf/errors.hpp"

namespace urkf {

void rethrow_at_step(const NumericalError& e, std::size_t step) {
  // An inner recursion may already have tagged the error; keep its index.
  if (e.step()) step = *e.step();
  const std::string& msg = e.message();
  if (dynamic_cast<const DomainError*>(&e)) throw DomainError(msg, step);
  if (dynamic_cast<const FactorizationError*>(&e)) throw FactorizationError(msg, step);
  if (dynamic_cast<const InfeasibleError*>(&e)) throw InfeasibleError(msg, step);
  if (dynamic_cast<const ConvergenceError*>(&e)) throw ConvergenceError(msg, step);
  throw NumericalError(msg, step);
}

}  // namespace urkf
