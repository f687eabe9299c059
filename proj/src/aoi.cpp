#include "starris/aoi.hpp"

#include <stdexcept>

namespace starris {

bool sample_arrival(double lambda, Rng& rng) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::domain_error("sample_arrival: lambda must lie in [0, 1]");
  std::bernoulli_distribution d(lambda);
  return d(rng);
}

StreamState initial_state(double lambda, Rng& rng) {
  StreamState s;
  s.lambda = lambda;
  s.has_packet = sample_arrival(lambda, rng);
  return s;
}

StreamState step(const StreamState& state, bool scheduled, bool delivered, bool arrival) {
  if (delivered && !(scheduled && state.has_packet))
    throw ContractError("aoi step: delivery requires a scheduled stream with a buffered packet");
  const bool e = scheduled && state.has_packet && delivered;
  StreamState next = state;
  next.age = (e ? state.system_time : state.age) + 1;
  next.system_time = arrival ? 0 : state.system_time + 1;
  next.has_packet = arrival || (state.has_packet && !(scheduled && delivered));
  return next;
}

bool delivery_predicate(double snr_value, bool scheduled, bool has_packet, double gamma_th) {
  if (!(gamma_th > 0.0)) throw ContractError("delivery_predicate: gamma_th must be positive");
  return scheduled && has_packet && snr_value >= gamma_th;
}

double reduction_weight(const StreamState& state) {
  return state.has_packet ? static_cast<double>(state.age - state.system_time) : 0.0;
}

double average_sum_aoi(const AoITrace& trace) {
  const std::size_t n = trace.streams[Side::kT].size();
  if (n == 0) throw std::invalid_argument("average_sum_aoi: empty trace");
  if (trace.streams[Side::kR].size() != n) throw std::invalid_argument("average_sum_aoi: streams differ in length");
  long total = 0;
  for (Side s : kSides)
    for (const AoIRecord& r : trace.streams[s]) total += r.age;
  return static_cast<double>(total) / (2.0 * static_cast<double>(n));
}

}  // namespace starris
