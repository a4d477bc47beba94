#pragma once

// (ε,α)-good patterns.
//
// A pattern A is good when [A]^ε ∩ θ_x[A]^ε is empty for every shift with
// 0 < |x|_∞ <= floor(αn). On the overlap C ∩ (C+x) a configuration ω must
// disagree with one of the two copies wherever A(y) != A(y−x), so the two
// mismatch budgets d_1, d_2 <= E have to absorb D(x) forced mismatches in
// total; sites off the overlap can always be set to match their copy. The
// intersection is therefore nonempty iff D(x) <= 2E, and A is good iff
// D(x) > 2E at every tested shift.

#include <cstdint>
#include <vector>

#include "apmatch/estimate.hpp"
#include "apmatch/fields.hpp"
#include "apmatch/lattice.hpp"

namespace apm {

struct GoodnessParams {
  double epsilon;
  double alpha;
  Cube cube;

  GoodnessParams(double epsilon, double alpha, const Cube& cube);

  /// floor(αn): largest sup-norm shift tested.
  [[nodiscard]] std::int64_t max_shift() const;
  /// E = floor(ε |C_n|).
  [[nodiscard]] std::int64_t threshold() const;
  [[nodiscard]] bool vacuous() const { return max_shift() < 1; }
};

struct ShiftDisagreement {
  Point shift{0, 0, 0};
  std::int64_t disagreement = 0;  // D(x)
  std::int64_t overlap = 0;       // |C ∩ (C+x)|
};

struct DisagreementProfile {
  int dim = 1;
  std::int64_t max_shift = 0;
  /// Every shift 0 < |x|_∞ <= max_shift, in lexicographic order.
  std::vector<ShiftDisagreement> entries;

  [[nodiscard]] const ShiftDisagreement& at(const Point& shift) const;
};

/// D(x) = Σ_{y ∈ C ∩ (C+x)} |A(y) − A(y−x)| for every 0 < |x|_∞ <= max_shift.
DisagreementProfile disagreement_profile(const Pattern& pattern, std::int64_t max_shift);

/// D(x) for a single shift.
ShiftDisagreement shift_disagreement(const BitGrid& values, const Point& shift);

bool is_good(const Pattern& pattern, const GoodnessParams& params);

/// Goodness on a rectangular box V (values anchored at the origin) with
/// threshold floor(ε|V|) and shifts up to floor(α·ℓ), ℓ the largest side index of V.
bool is_good_box(const BitGrid& values, double epsilon, double alpha);

enum class FractionMode { automatic, exact, monte_carlo };

/// Largest |C_n| accepted by exact enumeration.
inline constexpr std::int64_t kExactEnumerationCap = 24;

/// Q(G_n(ε,α)). Exact mode enumerates all 2^{|C_n|} patterns weighted by the
/// product law Q; Monte Carlo mode draws `replicas` patterns from Q. Automatic
/// picks exact for product Q with |C_n| <= 16.
Estimate goodness_fraction(const FieldModel& q_model, const GoodnessParams& params,
                           std::int64_t replicas, const SeedSpec& seed,
                           FractionMode mode = FractionMode::automatic);

/// Draws patterns from Q (replicas of `seed`) until one is good; throws after max_tries.
Pattern draw_good_pattern(const FieldModel& q_model, const GoodnessParams& params,
                          const SeedSpec& seed, std::int64_t max_tries = 100000);

/// Pattern whose site-order values are the low |C_n| bits of `index`.
Pattern pattern_from_index(const Cube& cube, std::uint64_t index);

}  // namespace apm
