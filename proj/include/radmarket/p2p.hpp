#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace radmarket {

/// Prices in cents/kWh, quantities in kW.
struct P2pConfig {
  double c_service = 0.5;
  double c_lose = 1.0;
  double ub = 12.0;
  int T = 50;
  double trade_quantity = 3.0;
  double retail_price = 12.0;

  /// Throws std::invalid_argument unless ub > c_service >= 0, c_lose >= 0, T >= 1.
  void validate() const;
};

struct MatchRound {
  /// (producer, consumer)
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> unmatched;
  int T = 1;
};

/// Uniform random pairing of min(|P|, |C|) pairs; leftovers (producers first,
/// then consumers, in input order) are unmatched.
MatchRound match(const std::vector<std::string>& producers, const std::vector<std::string>& consumers,
                 std::uint64_t seed, int T = 1);

struct NegotiationOutcome {
  bool success = false;
  std::optional<double> trade_price;
  double b_p = 0.0;
  double b_c = 0.0;
  double r_p = 0.0;
  double r_c = 0.0;
};

/// Trade clears at the producer's bid when b_p <= b_c.
NegotiationOutcome negotiate(double producer_bid, double consumer_bid, const P2pConfig& config);

/// Charge for energy the consumer has to draw from the substation.
double settle_deficiency(double delivered, double demanded, double retail_price);

/// Trailing mean over up to `window` samples ending at each index.
std::vector<double> moving_average(std::span<const double> values, std::size_t window);

}  // namespace radmarket
