#pragma once

// Reproducible samplers for Bernoulli product fields and nearest-neighbour
// Ising fields, plus the pair-correlation mixing diagnostic.

#include <cstdint>
#include <string>
#include <vector>

#include "apmatch/estimate.hpp"
#include "apmatch/lattice.hpp"
#include "apmatch/rng.hpp"

namespace apm {

enum class ModelKind { bernoulli, ising };

/// Sampling law. Ising fields use spins s = 2σ − 1, periodic boundary and
/// P(s_x = +1 | rest) = 1 / (1 + exp(−2(β Σ_{y~x} s_y + h))).
struct FieldModel {
  ModelKind kind = ModelKind::bernoulli;
  double p = 0.5;
  double beta = 0.0;
  double h = 0.0;
  /// Heat-bath sweeps for Ising draws (ignored for Bernoulli).
  std::int64_t sweeps = 200;

  static FieldModel bernoulli(double p);
  static FieldModel ising(double beta, double h, std::int64_t sweeps = 200);

  [[nodiscard]] bool is_product() const noexcept { return kind == ModelKind::bernoulli; }
  /// Canonical text form, e.g. "bernoulli(p=0.5)" or "ising(beta=0.3,h=0,sweeps=200)".
  [[nodiscard]] std::string describe() const;
  /// Parses the canonical form; also accepts "bernoulli:0.5" and "ising:0.3".
  static FieldModel parse(const std::string& text);
  void validate() const;

  friend bool operator==(const FieldModel&, const FieldModel&) = default;
};

/// Default inverse-temperature ceiling of the high-temperature allowlist (d = 2).
inline constexpr double kIsingAllowlistBeta = 0.35;

/// True when the model is on the built-in mixing allowlist.
bool in_mixing_allowlist(const FieldModel& model, int dim, double beta_ceiling = kIsingAllowlistBeta);

/// P(s_0 = +1 | neighbour spin sum), the heat-bath conditional.
double ising_conditional_up(double beta, double h, int neighbor_sum);

/// δ = 1 / (1 + exp(2β·2d + 2|h|)); every single-site conditional lies in [δ, 1−δ].
double finite_energy_delta(const FieldModel& model, int dim);

/// Heat-bath update of one spin given its neighbour sum and a uniform draw.
inline int heat_bath_spin(double beta, double h, int neighbor_sum, double uniform) {
  return uniform < ising_conditional_up(beta, h, neighbor_sum) ? 1 : -1;
}

/// Value of one Bernoulli(p) site from a counter-based hash of (stream, site).
/// Used for both eager and lazy sampling so they agree bit for bit.
void fill_bernoulli_rows(BitGrid& grid, double p, std::uint64_t key);

/// Key of the Bernoulli site stream of a replica.
std::uint64_t bernoulli_stream_key(const SeedSpec& seed);

FieldSample sample_bernoulli(double p, const Extents& window, const SeedSpec& seed);

/// Heat-bath Gibbs sampler: seeded uniform random start, `sweeps` full sweeps in
/// site order, periodic boundary on the window.
FieldSample sample_ising(double beta, double h, const Extents& window, std::int64_t sweeps,
                         const SeedSpec& seed);

FieldSample sample_field(const FieldModel& model, const Extents& window, const SeedSpec& seed);

/// Window used when an Ising pattern on C_n is drawn: side max(2(n+1), n+17),
/// periodic, pattern read at the origin.
Extents pattern_window(const Cube& cube);

/// One draw of ω_{C_n} from the model.
Pattern sample_pattern(const FieldModel& model, const Cube& cube, const SeedSpec& seed);

/// Covariance of site values at lattice distance m along the coordinate axes,
/// averaged over axes and sites per replica (periodic pairs for Ising,
/// in-window pairs for Bernoulli); the estimate is the replica mean with its SE.
Estimate pair_correlation(const FieldModel& model, std::int64_t distance, const Extents& window,
                          std::int64_t replicas, const SeedSpec& seed);

}  // namespace apm
