#pragma once

#include <cstdint>
#include <string>

#include "apmatch/rng.hpp"

namespace apm {

enum class Method { exact, monte_carlo };

inline const char* to_string(Method m) { return m == Method::exact ? "exact" : "monte-carlo"; }

/// Point value with standard error and the provenance of the randomness behind it.
/// Exact results carry std_error == 0.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t replicas = 0;
  Method method = Method::exact;
  SeedSpec seed{};

  static Estimate exact(double value) { return Estimate{value, 0.0, 0, Method::exact, {}}; }
  static Estimate monte_carlo(double value, double se, std::int64_t replicas, const SeedSpec& seed) {
    return Estimate{value, se, replicas, Method::monte_carlo, seed};
  }
};

}  // namespace apm
