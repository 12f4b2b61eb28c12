#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "corvet/fxp.hpp"

namespace corvet::mem {

inline constexpr int kSegments = 64;

// Layer count plus per-layer neuron/input counts. For dense chains
// J(l+1) == N(l); conv layers lowered by the runner address their kernels
// with per-layer (N, J) pairs that do not chain.
struct Topology {
  int layers = 0;
  std::vector<int> neurons;  // N(l)
  std::vector<int> inputs;   // J(l)

  Topology() = default;
  Topology(std::vector<int> n, std::vector<int> j);

  // Enforces J(l+1) == N(l); throws ConfigError on a broken chain.
  void validate_dense_chain() const;

  int64_t total_params() const;
};

// Address field widths: payload = max over layers of
// ceil(log2 N) + ceil(log2 J); total = ceil(log2 L) + 1 + payload.
struct AddressSpec {
  int layer_bits = 0;
  int select_bits = 1;
  int payload_bits = 0;
  int total_bits = 0;
  std::vector<int> payload_bits_per_layer;  // R_addr(l)
  std::vector<int> total_bits_per_layer;    // Addr(l)
};

AddressSpec addr_width(const Topology& t);

// Decoded parameter address. Encoded form packs [layer | select | payload]
// with the layer id in the most significant bits; weight payloads put the
// neuron index above the input index so a neuron's weights are contiguous.
struct ParamAddress {
  int layer = 0;
  bool is_bias = false;
  int neuron = 0;
  int input = 0;  // unused (zero) when is_bias

  bool operator==(const ParamAddress&) const = default;
};

uint32_t encode(const ParamAddress& a, const AddressSpec& spec,
                const Topology& t);
// strict: bias addresses must carry zero input-field bits.
ParamAddress decode(uint32_t bits, const AddressSpec& spec, const Topology& t,
                    bool strict = true);

// The order the engine reads parameters at inference time: layers ascending,
// neurons ascending, bias first (accumulator init) then weights by input.
std::vector<ParamAddress> engine_read_order(const Topology& t);

// 64-bank parameter memory; neuron n lives in segment n mod 64.
class ParamMemory {
 public:
  void write(uint32_t addr, int neuron, int32_t raw);
  std::optional<int32_t> read(uint32_t addr, int neuron) const;
  int segment_of(uint32_t addr) const;  // segment the address was written to
  std::size_t count() const { return count_; }
  const std::unordered_map<uint32_t, int32_t>& segment(int s) const {
    return segments_[s];
  }

 private:
  std::array<std::unordered_map<uint32_t, int32_t>, kSegments> segments_;
  std::unordered_map<uint32_t, int> segment_index_;
  std::size_t count_ = 0;
};

// One beat of the synchronous load interface; cycles with valid deasserted
// write nothing.
struct LoadBeat {
  uint32_t addr = 0;
  int32_t raw = 0;
  bool valid = true;
};

// Loads a LIFO-ordered stream (reverse of engine_read_order) and verifies
// completeness against the topology; missing addresses are listed in the
// error. Returns the populated memory.
ParamMemory lifo_load(const std::vector<LoadBeat>& stream, const Topology& t,
                      const AddressSpec& spec);

// ---------------------------------------------------------------------------
// Parameter image file. Binary form is authoritative:
//   16-byte header { magic "CVTP", version u16, addr_bits u8, format u8,
//                    count u32, reserved u32 }
// followed by count little-endian (address u32, raw i32) pairs in LIFO write
// order. A JSON debug form mirrors the same fields.

struct ImageHeader {
  uint16_t version = 1;
  uint8_t addr_bits = 0;
  FxPFormat format;
  uint32_t count = 0;
};

struct ParamImage {
  ImageHeader header;
  std::vector<std::pair<uint32_t, int32_t>> entries;  // LIFO write order
};

void write_image(const std::string& path, const ParamImage& img);
ParamImage read_image(const std::string& path);
void write_image_json(const std::string& path, const ParamImage& img);
ParamImage read_image_json(const std::string& path);

// format <-> u8 code for the image header
uint8_t format_code(FxPFormat fmt);
FxPFormat format_from_code(uint8_t code);

}  // namespace corvet::mem
