#pragma once

#include <vector>

#include "starris/types.hpp"

namespace starris {

struct StreamState {
  long age = 1;          // A
  long system_time = 0;  // z
  bool has_packet = false;  // b
  double lambda = 0.0;
};

// True with probability lambda; throws std::domain_error outside [0, 1].
bool sample_arrival(double lambda, Rng& rng);

// Age 1, empty system time, packet availability drawn from the arrival process.
StreamState initial_state(double lambda, Rng& rng);

// One slot of the age / system-time / buffer dynamics. `arrival` is the
// arrival observed at the start of the next slot. Throws ContractError when
// delivered is set without scheduled and a buffered packet.
StreamState step(const StreamState& state, bool scheduled, bool delivered, bool arrival);

bool delivery_predicate(double snr_value, bool scheduled, bool has_packet, double gamma_th);

// (A - z) b
double reduction_weight(const StreamState& state);

struct AoIRecord {
  long age = 1;
  long system_time = 0;
  bool has_packet = false;
  bool scheduled = false;
  bool delivered = false;
};

struct AoITrace {
  PerSide<std::vector<AoIRecord>> streams;

  std::size_t horizon() const { return streams[Side::kT].size(); }
};

// (1 / 2N) sum_n sum_k A_k(n). Throws std::invalid_argument for an empty
// trace or streams of unequal length.
double average_sum_aoi(const AoITrace& trace);

}  // namespace starris
