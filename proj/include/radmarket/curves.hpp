#pragma once

#include <span>
#include <stdexcept>
#include <string>

namespace radmarket {

enum class Side { Supply, Demand };

const char* to_string(Side side);

enum class CurveErrc { InvalidCurve, QuantityOutOfRange, NoIntersection };

class CurveError : public std::runtime_error {
 public:
  CurveError(CurveErrc code, const std::string& message);
  CurveErrc code() const noexcept { return code_; }

 private:
  CurveErrc code_;
};

/// Affine bid or offer given by (p_max, p_min, q_max, q_min). Prices are in
/// cents/kWh and quantities in kW. Supply rises from p_min at q_min to p_max at
/// q_max; demand falls from p_max at q_min to p_min at q_max.
///
/// The admissible quantities are {0} together with [q_min, q_max]. Integrals
/// start at zero and value the stretch [0, q_min) at the q_min endpoint price.
class Curve {
 public:
  Curve(Side side, double p_max, double p_min, double q_max, double q_min);

  Side side() const { return side_; }
  double p_max() const { return p_max_; }
  double p_min() const { return p_min_; }
  double q_max() const { return q_max_; }
  double q_min() const { return q_min_; }

  bool is_flat() const { return p_max_ == p_min_; }
  bool admissible(double q) const;

  /// Throws CurveError(QuantityOutOfRange) outside [q_min, q_max].
  double price_at(double q) const;
  /// Same as price_at on [q_min, q_max]; constant endpoint price on [0, q_min).
  double extended_price(double q) const;
  /// Integral of extended_price over [0, q]; q in [0, q_max].
  double integral(double q) const;
  /// Demand: integral - p*q. Supply: p*q - integral. q must be admissible.
  double surplus(double q, double p) const;

  /// Largest quantity the curve offers (supply) or takes (demand) at a price.
  double response(double price) const;

  friend bool operator==(const Curve&, const Curve&) = default;

 private:
  void check_range(double q) const;

  Side side_;
  double p_max_, p_min_, q_max_, q_min_;
};

struct Intersection {
  double price = 0.0;
  double quantity = 0.0;
};

/// Price at which horizontally summed supply meets summed demand (bisection).
/// Throws CurveError(NoIntersection) when no positive quantity clears.
Intersection aggregate_intersection(std::span<const Curve> supplies, std::span<const Curve> demands);

}  // namespace radmarket
