#include "radmarket/p2p.hpp"

#include <stdexcept>

#include "radmarket/rng.hpp"

namespace radmarket {

void P2pConfig::validate() const {
  if (!(c_service >= 0.0)) throw std::invalid_argument("c_service must be >= 0");
  if (!(ub > c_service)) throw std::invalid_argument("ub must exceed c_service");
  if (!(c_lose >= 0.0)) throw std::invalid_argument("c_lose must be >= 0");
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  if (!(trade_quantity > 0.0)) throw std::invalid_argument("trade_quantity must be > 0");
  if (!(retail_price >= 0.0)) throw std::invalid_argument("retail_price must be >= 0");
}

MatchRound match(const std::vector<std::string>& producers, const std::vector<std::string>& consumers,
                 std::uint64_t seed, int T) {
  Rng rng(seed);
  std::vector<std::size_t> p(producers.size()), c(consumers.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = i;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = i;
  rng.shuffle(p);
  rng.shuffle(c);

  MatchRound round;
  round.T = T;
  const std::size_t n = std::min(p.size(), c.size());
  for (std::size_t k = 0; k < n; ++k) round.pairs.emplace_back(producers[p[k]], consumers[c[k]]);

  std::vector<bool> used_p(producers.size()), used_c(consumers.size());
  for (std::size_t k = 0; k < n; ++k) {
    used_p[p[k]] = true;
    used_c[c[k]] = true;
  }
  for (std::size_t i = 0; i < producers.size(); ++i)
    if (!used_p[i]) round.unmatched.push_back(producers[i]);
  for (std::size_t i = 0; i < consumers.size(); ++i)
    if (!used_c[i]) round.unmatched.push_back(consumers[i]);
  return round;
}

NegotiationOutcome negotiate(double producer_bid, double consumer_bid, const P2pConfig& config) {
  NegotiationOutcome out;
  out.b_p = producer_bid;
  out.b_c = consumer_bid;
  out.success = producer_bid <= consumer_bid;
  if (out.success) {
    out.trade_price = producer_bid;
    out.r_p = producer_bid - config.c_service;
    out.r_c = config.ub - producer_bid - config.c_service;
  } else {
    out.r_p = -config.c_lose;
    out.r_c = -config.c_lose;
  }
  return out;
}

double settle_deficiency(double delivered, double demanded, double retail_price) {
  if (delivered > demanded) throw std::invalid_argument("delivered exceeds demanded");
  return (demanded - delivered) * retail_price;
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace radmarket
