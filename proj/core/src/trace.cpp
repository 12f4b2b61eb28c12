#include "corvet/trace.hpp"

#include <map>
#include <ostream>
#include <sstream>

namespace corvet::engine {

std::string to_string(Signal s) {
  switch (s) {
    case Signal::current_layer: return "CurrentLayer";
    case Signal::layer_done: return "LayerDone";
    case Signal::dnn_done: return "DNNDone";
    case Signal::compute_init: return "ComputeInit";
    case Signal::index: return "Index";
    case Signal::compute_done: return "ComputeDone";
    case Signal::compute_done_array: return "ComputeDoneArray";
  }
  return "?";
}

void TraceSink::to_csv(std::ostream& os) const {
  os << "cycle,signal,value\n";
  for (const auto& e : events_) {
    os << e.cycle << ',' << to_string(e.signal);
    if (e.pe >= 0) os << '[' << e.pe << ']';
    os << ',' << e.value << '\n';
  }
}

std::vector<std::string> check_trace(const std::vector<TraceEvent>& events,
                                     int num_layers,
                                     const std::vector<int>& inputs_per_layer) {
  std::vector<std::string> violations;
  auto flag = [&](uint64_t cycle, const std::string& what) {
    std::ostringstream os;
    os << "cycle " << cycle << ": " << what;
    violations.push_back(os.str());
  };

  int current_layer = 0;
  bool done_array = false;
  int last_layer_done = -1;
  bool dnn_done = false;
  std::map<int, int64_t> index;  // per PE

  for (const auto& e : events) {
    switch (e.signal) {
      case Signal::current_layer:
        current_layer = int(e.value);
        done_array = false;
        break;
      case Signal::compute_done_array:
        done_array = e.value != 0;
        break;
      case Signal::layer_done:
        if (e.value != 0 && !done_array)
          flag(e.cycle, "LayerDone before ComputeDoneArray");
        if (e.value != 0) last_layer_done = current_layer;
        break;
      case Signal::dnn_done:
        if (e.value != 0 && last_layer_done != num_layers - 1)
          flag(e.cycle, "DNNDone before final LayerDone");
        if (e.value != 0) dnn_done = true;
        break;
      case Signal::compute_init:
        if (e.value != 0) index[e.pe] = 0;  // re-assignment resets Index
        break;
      case Signal::index: {
        auto it = index.find(e.pe);
        int64_t prev = it == index.end() ? 0 : it->second;
        if (e.value < prev)
          flag(e.cycle, "Index decreased on PE " + std::to_string(e.pe) +
                            " without ComputeInit");
        if (current_layer < int(inputs_per_layer.size()) &&
            e.value > inputs_per_layer[current_layer])
          flag(e.cycle, "Index exceeds J(l) on PE " + std::to_string(e.pe));
        index[e.pe] = e.value;
        break;
      }
      case Signal::compute_done:
        break;
    }
  }
  if (!events.empty() && !dnn_done)
    violations.push_back("trace ends without DNNDone");
  return violations;
}

}  // namespace corvet::engine
