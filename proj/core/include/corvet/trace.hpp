#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "corvet/errors.hpp"

namespace corvet::engine {

enum class Signal {
  current_layer,
  layer_done,
  dnn_done,
  compute_init,
  index,
  compute_done,
  compute_done_array,
};

std::string to_string(Signal s);

// One recorded signal change. pe is -1 for network-level signals.
struct TraceEvent {
  uint64_t cycle = 0;
  Signal signal = Signal::current_layer;
  int pe = -1;
  int64_t value = 0;
};

class TraceSink {
 public:
  void record(uint64_t cycle, Signal s, int pe, int64_t value) {
    events_.push_back({cycle, s, pe, value});
  }
  const std::vector<TraceEvent>& events() const { return events_; }
  void to_csv(std::ostream& os) const;  // cycle,signal,value rows

 private:
  std::vector<TraceEvent> events_;
};

// Offline legality checker for recorded traces. Flags LayerDone before
// ComputeDoneArray, DNNDone before the final LayerDone, and Index values
// that decrease without an intervening ComputeInit or exceed their bound.
// Returns human-readable violations; empty means legal.
std::vector<std::string> check_trace(const std::vector<TraceEvent>& events,
                                     int num_layers,
                                     const std::vector<int>& inputs_per_layer);

}  // namespace corvet::engine
