#include "pafnucy/rng.hpp"

#include <cmath>
#include <numbers>

namespace pafnucy {

double RngStream::normal() {
  // Box-Muller. u must stay away from 0 for the log.
  double u;
  do {
    u = uniform();
  } while (u <= 0.0);
  const double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) *
         std::cos(2.0 * std::numbers::pi * v);
}

}  // namespace pafnucy
