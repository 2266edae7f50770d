#include "radmarket/curves.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace radmarket {

const char* to_string(Side side) { return side == Side::Supply ? "S" : "D"; }

namespace {

const char* errc_name(CurveErrc code) {
  switch (code) {
    case CurveErrc::InvalidCurve: return "InvalidCurve";
    case CurveErrc::QuantityOutOfRange: return "QuantityOutOfRange";
    case CurveErrc::NoIntersection: return "NoIntersection";
  }
  return "Unknown";
}

}  // namespace

CurveError::CurveError(CurveErrc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

Curve::Curve(Side side, double p_max, double p_min, double q_max, double q_min)
    : side_(side), p_max_(p_max), p_min_(p_min), q_max_(q_max), q_min_(q_min) {
  if (!std::isfinite(p_max) || !std::isfinite(p_min) || !std::isfinite(q_max) || !std::isfinite(q_min)) {
    throw CurveError(CurveErrc::InvalidCurve, "curve parameters must be finite");
  }
  if (p_max < p_min) throw CurveError(CurveErrc::InvalidCurve, "p_max must be >= p_min");
  if (!(q_max > q_min)) throw CurveError(CurveErrc::InvalidCurve, "q_max must be > q_min");
  if (q_min < 0.0) throw CurveError(CurveErrc::InvalidCurve, "q_min must be >= 0");
}

namespace {
double range_eps(double q_max) { return 1e-9 * std::max(1.0, q_max); }
}  // namespace

bool Curve::admissible(double q) const {
  const double eps = range_eps(q_max_);
  return std::abs(q) <= eps || (q >= q_min_ - eps && q <= q_max_ + eps);
}

void Curve::check_range(double q) const {
  const double eps = range_eps(q_max_);
  if (!(q >= q_min_ - eps && q <= q_max_ + eps)) {
    throw CurveError(CurveErrc::QuantityOutOfRange,
                     "quantity " + std::to_string(q) + " outside [" + std::to_string(q_min_) + ", " +
                         std::to_string(q_max_) + "]");
  }
}

double Curve::price_at(double q) const {
  check_range(q);
  q = std::clamp(q, q_min_, q_max_);
  const double t = (q - q_min_) / (q_max_ - q_min_);
  return side_ == Side::Supply ? (p_max_ - p_min_) * t + p_min_ : (p_min_ - p_max_) * t + p_max_;
}

double Curve::extended_price(double q) const {
  if (!(q >= -range_eps(q_max_) && q <= q_max_ + range_eps(q_max_))) check_range(q);
  return price_at(std::max(q, q_min_));
}

double Curve::integral(double q) const {
  if (!(q >= -range_eps(q_max_) && q <= q_max_ + range_eps(q_max_))) check_range(q);
  q = std::clamp(q, 0.0, q_max_);
  const double p0 = price_at(q_min_);
  if (q <= q_min_) return p0 * q;
  return p0 * q_min_ + 0.5 * (p0 + price_at(q)) * (q - q_min_);
}

double Curve::surplus(double q, double p) const {
  if (!admissible(q)) {
    throw CurveError(CurveErrc::QuantityOutOfRange, "quantity " + std::to_string(q) + " is not admissible");
  }
  if (std::abs(q) <= range_eps(q_max_)) return 0.0;
  return side_ == Side::Demand ? integral(q) - p * q : p * q - integral(q);
}

double Curve::response(double price) const {
  if (side_ == Side::Supply) {
    if (price < p_min_) return 0.0;
    if (is_flat() || price >= p_max_) return q_max_;
    return q_min_ + (price - p_min_) / (p_max_ - p_min_) * (q_max_ - q_min_);
  }
  if (price > p_max_) return 0.0;
  if (is_flat() || price <= p_min_) return q_max_;
  return q_min_ + (p_max_ - price) / (p_max_ - p_min_) * (q_max_ - q_min_);
}

Intersection aggregate_intersection(std::span<const Curve> supplies, std::span<const Curve> demands) {
  if (supplies.empty() || demands.empty()) {
    throw std::invalid_argument("aggregate_intersection needs at least one supply and one demand curve");
  }
  double lo = supplies.front().p_min();
  double hi = lo;
  std::vector<double> breakpoints;
  for (auto group : {supplies, demands}) {
    for (const auto& c : group) {
      lo = std::min(lo, c.p_min());
      hi = std::max(hi, c.p_max());
      breakpoints.push_back(c.p_min());
      breakpoints.push_back(c.p_max());
    }
  }
  lo -= 1.0;
  hi += 1.0;

  auto supply_at = [&](double p) {
    double s = 0.0;
    for (const auto& c : supplies) s += c.response(p);
    return s;
  };
  auto demand_at = [&](double p) {
    double d = 0.0;
    for (const auto& c : demands) d += c.response(p);
    return d;
  };

  // Excess demand is non-increasing in price: positive at lo, non-positive at hi.
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (demand_at(mid) - supply_at(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  const double q_lo = std::max(supply_at(lo), demand_at(hi));
  const double q_hi = std::min(supply_at(hi), demand_at(lo));
  Intersection out;
  out.quantity = 0.5 * (q_lo + q_hi);
  out.price = hi;
  for (double bp : breakpoints) {
    if (std::abs(bp - out.price) <= 1e-9 * std::max(1.0, std::abs(bp))) {
      out.price = bp;
      break;
    }
  }
  if (!(out.quantity > 1e-12)) {
    throw CurveError(CurveErrc::NoIntersection, "aggregate supply and demand do not cross at a positive quantity");
  }
  return out;
}

}  // namespace radmarket
