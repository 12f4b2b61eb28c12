#include "corvet/memmap.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace corvet::mem {

Topology::Topology(std::vector<int> n, std::vector<int> j)
    : layers(int(n.size())), neurons(std::move(n)), inputs(std::move(j)) {
  if (layers < 1) throw ConfigError("Topology: needs at least one layer");
  if (inputs.size() != neurons.size())
    throw ConfigError("Topology: neuron/input lists differ in length");
  for (int l = 0; l < layers; ++l)
    if (neurons[l] < 1 || inputs[l] < 1)
      throw ConfigError("Topology: N(l) and J(l) must be >= 1 at layer " +
                        std::to_string(l));
}

void Topology::validate_dense_chain() const {
  for (int l = 0; l + 1 < layers; ++l)
    if (inputs[l + 1] != neurons[l])
      throw ConfigError("Topology: J(" + std::to_string(l + 1) +
                        ") != N(" + std::to_string(l) + "): " +
                        std::to_string(inputs[l + 1]) + " vs " +
                        std::to_string(neurons[l]));
}

int64_t Topology::total_params() const {
  int64_t total = 0;
  for (int l = 0; l < layers; ++l)
    total += int64_t(neurons[l]) * inputs[l] + neurons[l];
  return total;
}

AddressSpec addr_width(const Topology& t) {
  AddressSpec spec;
  spec.layer_bits = clog2(uint64_t(t.layers));
  for (int l = 0; l < t.layers; ++l) {
    int r = clog2(uint64_t(t.neurons[l])) + clog2(uint64_t(t.inputs[l]));
    spec.payload_bits_per_layer.push_back(r);
    spec.total_bits_per_layer.push_back(spec.layer_bits + 1 + r);
    spec.payload_bits = std::max(spec.payload_bits, r);
  }
  spec.total_bits = spec.layer_bits + 1 + spec.payload_bits;
  return spec;
}

namespace {

void check_fields(const ParamAddress& a, const Topology& t) {
  if (a.layer < 0 || a.layer >= t.layers)
    throw ContractViolation("address: layer " + std::to_string(a.layer) +
                            " out of range");
  if (a.neuron < 0 || a.neuron >= t.neurons[a.layer])
    throw ContractViolation("address: neuron " + std::to_string(a.neuron) +
                            " out of range for layer " +
                            std::to_string(a.layer));
  if (!a.is_bias && (a.input < 0 || a.input >= t.inputs[a.layer]))
    throw ContractViolation("address: input " + std::to_string(a.input) +
                            " out of range for layer " +
                            std::to_string(a.layer));
  if (a.is_bias && a.input != 0)
    throw ContractViolation("address: bias carries a nonzero input field");
}

}  // namespace

uint32_t encode(const ParamAddress& a, const AddressSpec& spec,
                const Topology& t) {
  check_fields(a, t);
  int input_bits = clog2(uint64_t(t.inputs[a.layer]));
  uint32_t payload = a.is_bias
                         ? uint32_t(a.neuron)
                         : (uint32_t(a.neuron) << input_bits) |
                               uint32_t(a.input);
  uint32_t select = a.is_bias ? 1u : 0u;
  return (uint32_t(a.layer) << (1 + spec.payload_bits)) |
         (select << spec.payload_bits) | payload;
}

ParamAddress decode(uint32_t bits, const AddressSpec& spec, const Topology& t,
                    bool strict) {
  uint32_t payload = bits & ((1u << spec.payload_bits) - 1u);
  uint32_t select = (bits >> spec.payload_bits) & 1u;
  uint32_t layer = bits >> (1 + spec.payload_bits);
  if (layer >= uint32_t(t.layers))
    throw ContractViolation("decode: layer field " + std::to_string(layer) +
                            " out of range");

  ParamAddress a;
  a.layer = int(layer);
  a.is_bias = select == 1u;
  int input_bits = clog2(uint64_t(t.inputs[a.layer]));
  if (a.is_bias) {
    uint32_t neuron = strict ? payload
                             : (payload & ((1u << clog2(uint64_t(
                                                t.neurons[a.layer]))) -
                                           1u));
    if (strict && payload >= uint32_t(t.neurons[a.layer]))
      throw ContractViolation("decode: bias neuron field out of range");
    a.neuron = int(neuron);
    a.input = 0;
  } else {
    a.neuron = int(payload >> input_bits);
    a.input = int(payload & ((1u << input_bits) - 1u));
  }
  if (a.neuron >= t.neurons[a.layer])
    throw ContractViolation("decode: neuron index out of range");
  if (!a.is_bias && a.input >= t.inputs[a.layer])
    throw ContractViolation("decode: input index out of range");
  return a;
}

std::vector<ParamAddress> engine_read_order(const Topology& t) {
  std::vector<ParamAddress> order;
  order.reserve(std::size_t(t.total_params()));
  for (int l = 0; l < t.layers; ++l) {
    for (int n = 0; n < t.neurons[l]; ++n) {
      order.push_back({l, true, n, 0});
      for (int j = 0; j < t.inputs[l]; ++j) order.push_back({l, false, n, j});
    }
  }
  return order;
}

void ParamMemory::write(uint32_t addr, int neuron, int32_t raw) {
  int seg = neuron % kSegments;
  auto& bank = segments_[seg];
  if (!bank.contains(addr)) ++count_;
  bank[addr] = raw;
  segment_index_[addr] = seg;
}

std::optional<int32_t> ParamMemory::read(uint32_t addr, int neuron) const {
  const auto& bank = segments_[neuron % kSegments];
  auto it = bank.find(addr);
  if (it == bank.end()) return std::nullopt;
  return it->second;
}

int ParamMemory::segment_of(uint32_t addr) const {
  auto it = segment_index_.find(addr);
  return it == segment_index_.end() ? -1 : it->second;
}

ParamMemory lifo_load(const std::vector<LoadBeat>& stream, const Topology& t,
                      const AddressSpec& spec) {
  ParamMemory mem;
  for (const auto& beat : stream) {
    if (!beat.valid) continue;  // load_param_weight deasserted
    ParamAddress a = decode(beat.addr, spec, t);
    mem.write(beat.addr, a.neuron, beat.raw);
  }
  // Completeness: every address the engine will read must be present.
  std::vector<uint32_t> missing;
  for (const auto& a : engine_read_order(t)) {
    uint32_t bits = encode(a, spec, t);
    if (!mem.read(bits, a.neuron)) missing.push_back(bits);
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "lifo_load: " << missing.size() << " parameter(s) missing:";
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i)
      os << " 0x" << std::hex << missing[i];
    if (missing.size() > 8) os << " ...";
    throw LoadError(os.str());
  }
  return mem;
}

uint8_t format_code(FxPFormat fmt) {
  uint8_t width_code = fmt.total_bits == 4 ? 0 : fmt.total_bits == 8 ? 1 : 2;
  return uint8_t((width_code << 4) | fmt.frac_bits);
}

FxPFormat format_from_code(uint8_t code) {
  int width = code >> 4 == 0 ? 4 : code >> 4 == 1 ? 8 : 16;
  if (code >> 4 > 2) throw LoadError("parameter image: bad format code");
  return FxPFormat(width, code & 0x0f);
}

namespace {

constexpr char kMagic[4] = {'C', 'V', 'T', 'P'};

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(char((uint64_t(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size())
    throw LoadError("parameter image: truncated file");
  uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= uint64_t(uint8_t(in[pos + i])) << (8 * i);
  pos += sizeof(T);
  return T(v);
}

}  // namespace

void write_image(const std::string& path, const ParamImage& img) {
  std::string out;
  out.append(kMagic, 4);
  put_le<uint16_t>(out, img.header.version);
  put_le<uint8_t>(out, img.header.addr_bits);
  put_le<uint8_t>(out, format_code(img.header.format));
  put_le<uint32_t>(out, uint32_t(img.entries.size()));
  put_le<uint32_t>(out, 0);  // reserved
  for (const auto& [addr, raw] : img.entries) {
    put_le<uint32_t>(out, addr);
    put_le<uint32_t>(out, uint32_t(raw));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError("cannot write parameter image: " + path);
  f.write(out.data(), std::streamsize(out.size()));
}

ParamImage read_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open parameter image: " + path);
  std::string in((std::istreambuf_iterator<char>(f)),
                 std::istreambuf_iterator<char>());
  if (in.size() < 16 || std::memcmp(in.data(), kMagic, 4) != 0)
    throw LoadError("parameter image: bad magic in " + path);
  std::size_t pos = 4;
  ParamImage img;
  img.header.version = get_le<uint16_t>(in, pos);
  img.header.addr_bits = get_le<uint8_t>(in, pos);
  img.header.format = format_from_code(get_le<uint8_t>(in, pos));
  img.header.count = get_le<uint32_t>(in, pos);
  get_le<uint32_t>(in, pos);  // reserved
  img.entries.reserve(img.header.count);
  for (uint32_t i = 0; i < img.header.count; ++i) {
    uint32_t addr = get_le<uint32_t>(in, pos);
    int32_t raw = int32_t(get_le<uint32_t>(in, pos));
    img.entries.emplace_back(addr, raw);
  }
  return img;
}

void write_image_json(const std::string& path, const ParamImage& img) {
  nlohmann::json j;
  j["magic"] = "CVTP";
  j["version"] = img.header.version;
  j["addr_bits"] = img.header.addr_bits;
  j["format"] = img.header.format.name();
  j["count"] = img.entries.size();
  auto& entries = j["entries"] = nlohmann::json::array();
  for (const auto& [addr, raw] : img.entries)
    entries.push_back({{"addr", addr}, {"raw", raw}});
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw LoadError("cannot write parameter image: " + path);
  f << j.dump(2) << '\n';
}

ParamImage read_image_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open parameter image: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("parameter image: bad JSON in " + path + ": " + e.what());
  }
  if (j.value("magic", "") != "CVTP")
    throw LoadError("parameter image: bad magic in " + path);
  ParamImage img;
  img.header.version = j.at("version").get<uint16_t>();
  img.header.addr_bits = j.at("addr_bits").get<uint8_t>();
  img.header.format = FxPFormat::parse(j.at("format").get<std::string>());
  for (const auto& e : j.at("entries"))
    img.entries.emplace_back(e.at("addr").get<uint32_t>(),
                             e.at("raw").get<int32_t>());
  img.header.count = uint32_t(img.entries.size());
  return img;
}

}  // namespace corvet::mem
