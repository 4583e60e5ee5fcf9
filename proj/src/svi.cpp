#include "prefgp/svi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prefgp {

double SviSchedule::rho(int iteration) const {
  if (fixed_rho > 0.0) return fixed_rho;
  return std::pow(iteration + delay, -forgetting_rate);
}

BatchSampler::BatchSampler(int population, int batch_size, uint64_t seed)
    : order_(population), batch_size_(std::min(batch_size, population)),
      rng_(seed) {
  if (population < 1) {
    throw InvalidInputError("BatchSampler: population must be >= 1");
  }
  std::iota(order_.begin(), order_.end(), 0);
  reshuffle();
}

void BatchSampler::reshuffle() {
  // Fisher-Yates with the raw engine, so shuffles are stable across
  // standard library implementations.
  for (size_t i = order_.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng_() % i);
    std::swap(order_[i - 1], order_[j]);
  }
  cursor_ = 0;
}

std::vector<int> BatchSampler::next() {
  if (cursor_ >= order_.size()) reshuffle();
  const size_t take =
      std::min(static_cast<size_t>(batch_size_), order_.size() - cursor_);
  std::vector<int> batch(order_.begin() + cursor_,
                         order_.begin() + cursor_ + take);
  cursor_ += take;
  return batch;
}

}  // namespace prefgp
