#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>

#include "negobelief/error.hpp"

namespace negobelief {

// Three issues always give 3! hypotheses.
inline constexpr std::size_t kOrderingCount = 6;
inline constexpr double kNormTolerance = 1e-9;

// Categorical distribution over the six canonical orderings.
class Posterior {
 public:
  using Array = std::array<double, kOrderingCount>;

  Posterior() : probs_(uniform_array()) {}

  // Validates: every entry finite and >= 0, sum within kNormTolerance of 1.
  static Posterior from_probs(const Array& probs) {
    check_finite_nonnegative(probs);
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(total - 1.0) > kNormTolerance) {
      std::ostringstream os;
      os << "posterior is not normalized (sum = " << total << ")";
      throw ValidationError(os.str());
    }
    return Posterior(probs);
  }

  // Rescales a nonnegative vector with positive finite mass to sum 1.
  static Posterior normalize(const Array& mass) {
    check_finite_nonnegative(mass);
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw DegenerateUpdateError("cannot normalize a vector with zero or non-finite mass");
    }
    Array out{};
    for (std::size_t i = 0; i < kOrderingCount; ++i) out[i] = mass[i] / total;
    return Posterior(out);
  }

  static Posterior uniform() { return Posterior(uniform_array()); }

  static Posterior one_hot(std::size_t index) {
    if (index >= kOrderingCount) throw ValidationError("one-hot index out of range");
    Array out{};
    out[index] = 1.0;
    return Posterior(out);
  }

  double operator[](std::size_t i) const { return probs_[i]; }
  const Array& probs() const noexcept { return probs_; }
  std::span<const double, kOrderingCount> view() const noexcept { return probs_; }

  friend bool operator==(const Posterior&, const Posterior&) = default;

 private:
  explicit Posterior(const Array& probs) : probs_(probs) {}

  static Array uniform_array() {
    Array a;
    a.fill(1.0 / static_cast<double>(kOrderingCount));
    return a;
  }

  static void check_finite_nonnegative(const Array& probs) {
    for (double p : probs) {
      if (!std::isfinite(p) || p < 0.0) {
        throw ValidationError("posterior entries must be finite and nonnegative");
      }
    }
  }

  Array probs_;
};

}  // namespace negobelief
