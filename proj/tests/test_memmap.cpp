#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "corvet/memmap.hpp"
#include "doctest.h"

using namespace corvet;
using namespace corvet::mem;

TEST_SUITE_BEGIN("memmap");

TEST_CASE("topology validation") {
  CHECK_THROWS_AS(Topology({}, {}), ConfigError);
  CHECK_THROWS_AS(Topology({4, 0}, {3, 4}), ConfigError);
  Topology broken({4, 2}, {3, 5});
  CHECK_THROWS_AS(broken.validate_dense_chain(), ConfigError);
  Topology good({4, 2}, {3, 4});
  CHECK_NOTHROW(good.validate_dense_chain());
  CHECK(good.total_params() == 4 * 3 + 4 + 2 * 4 + 2);
}

TEST_CASE("address widths: degenerate single neuron") {
  Topology t({1}, {1});
  auto spec = addr_width(t);
  CHECK(spec.payload_bits == 0);
  CHECK(spec.layer_bits == 0);
  CHECK(spec.total_bits == 1);
}

TEST_CASE("address widths: 196-64-32-32-10") {
  Topology t({64, 32, 32, 10}, {196, 64, 32, 32});
  t.validate_dense_chain();
  auto spec = addr_width(t);
  CHECK(spec.payload_bits_per_layer == std::vector<int>{6 + 8, 5 + 6, 5 + 5,
                                                        4 + 5});
  CHECK(spec.payload_bits == 14);
  CHECK(spec.layer_bits == 2);
  CHECK(spec.total_bits == 17);
  CHECK(spec.total_bits_per_layer == std::vector<int>{17, 14, 13, 12});
}

TEST_CASE("address widths: L=2 toy") {
  Topology t({4, 2}, {3, 4});
  auto spec = addr_width(t);
  CHECK(spec.payload_bits == 4);  // max(2+2, 1+2)
  CHECK(spec.total_bits == 6);
}

TEST_CASE("uniform width dominates per-layer widths on random topologies") {
  std::mt19937 rng(47);
  for (int trial = 0; trial < 1000; ++trial) {
    int L = 1 + int(rng() % 8);
    std::vector<int> n, j;
    for (int l = 0; l < L; ++l) {
      n.push_back(1 + int(rng() % 256));
      j.push_back(l == 0 ? 1 + int(rng() % 256) : n[l - 1]);
    }
    Topology t(n, j);
    auto spec = addr_width(t);
    for (int l = 0; l < L; ++l)
      CHECK(spec.total_bits >= spec.total_bits_per_layer[l]);
  }
}

TEST_CASE("encode bias with zero payload") {
  Topology t({4, 2}, {3, 4});
  auto spec = addr_width(t);
  uint32_t bits = encode({0, true, 0, 0}, spec, t);
  CHECK(bits == 1u << spec.payload_bits);  // select bit only
  auto back = decode(bits, spec, t);
  CHECK(back == ParamAddress{0, true, 0, 0});
}

TEST_CASE("encode/decode bijection over the toy topology") {
  Topology t({4, 2}, {3, 4});
  auto spec = addr_width(t);
  std::set<uint32_t> seen;
  int count = 0;
  for (int l = 0; l < t.layers; ++l) {
    for (int n = 0; n < t.neurons[l]; ++n) {
      ParamAddress bias{l, true, n, 0};
      uint32_t bits = encode(bias, spec, t);
      CHECK(seen.insert(bits).second);  // no aliasing
      CHECK(decode(bits, spec, t) == bias);
      ++count;
      for (int j = 0; j < t.inputs[l]; ++j) {
        ParamAddress w{l, false, n, j};
        uint32_t wbits = encode(w, spec, t);
        CHECK(seen.insert(wbits).second);
        CHECK(decode(wbits, spec, t) == w);
        ++count;
      }
    }
  }
  CHECK(count == t.total_params());
}

TEST_CASE("decode rejects out-of-range fields") {
  Topology t({4, 2}, {3, 4});
  auto spec = addr_width(t);
  // layer 1 weight payload with neuron field == N(1): 2 in a 2-bit-wide
  // payload slot above the 2 input bits
  uint32_t bad_neuron = (1u << (1 + spec.payload_bits)) | (2u << 2);
  CHECK_THROWS_AS(decode(bad_neuron, spec, t), ContractViolation);
  // bias with nonzero don't-care bits decodes only leniently
  uint32_t bias = encode({1, true, 1, 0}, spec, t);
  uint32_t dirty = bias | (1u << 1);
  CHECK_THROWS_AS(decode(dirty, spec, t, true), ContractViolation);
  auto lenient = decode(dirty, spec, t, false);
  CHECK(lenient.layer == 1);
  CHECK(lenient.is_bias);
  // encode guards
  CHECK_THROWS_AS(encode({0, false, 4, 0}, spec, t), ContractViolation);
  CHECK_THROWS_AS(encode({2, false, 0, 0}, spec, t), ContractViolation);
  CHECK_THROWS_AS(encode({0, true, 0, 1}, spec, t), ContractViolation);
}

TEST_CASE("randomized bijection on a large topology") {
  Topology t({64, 32, 32, 10}, {196, 64, 32, 32});
  auto spec = addr_width(t);
  std::mt19937 rng(53);
  for (int trial = 0; trial < 20000; ++trial) {
    int l = int(rng() % 4);
    bool bias = (rng() % 2) == 0;
    int n = int(rng() % uint32_t(t.neurons[l]));
    int j = bias ? 0 : int(rng() % uint32_t(t.inputs[l]));
    ParamAddress a{l, bias, n, j};
    CHECK(decode(encode(a, spec, t), spec, t) == a);
  }
}

namespace {

std::vector<LoadBeat> lifo_stream(const Topology& t, const AddressSpec& spec) {
  auto order = engine_read_order(t);
  std::vector<LoadBeat> stream;
  int32_t v = 0;
  for (const auto& a : order)
    stream.push_back({encode(a, spec, t), v++, true});
  std::reverse(stream.begin(), stream.end());
  return stream;
}

}  // namespace

TEST_CASE("lifo load then forward read restores logical order") {
  Topology t({4, 2}, {3, 4});
  auto spec = addr_width(t);
  auto stream = lifo_stream(t, spec);
  auto memory = lifo_load(stream, t, spec);
  CHECK(memory.count() == std::size_t(t.total_params()));
  auto order = engine_read_order(t);
  int32_t expect = 0;
  for (const auto& a : order) {
    auto v = memory.read(encode(a, spec, t), a.neuron);
    REQUIRE(v.has_value());
    CHECK(*v == expect++);
  }
}

TEST_CASE("invalid beats write nothing; missing params are named") {
  Topology t({2}, {2});
  auto spec = addr_width(t);
  auto stream = lifo_stream(t, spec);
  stream[1].valid = false;  // drop one beat
  try {
    lifo_load(stream, t, spec);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    std::string msg = e.what();
    CHECK(msg.find("missing") != std::string::npos);
    CHECK(msg.find("0x") != std::string::npos);
  }
}

TEST_CASE("segment residency: neuron n lives in segment n mod 64") {
  Topology t({128}, {4});
  auto spec = addr_width(t);
  auto memory = lifo_load(lifo_stream(t, spec), t, spec);
  for (int n = 0; n < 128; ++n) {
    for (int j = 0; j < 4; ++j) {
      uint32_t bits = encode({0, false, n, j}, spec, t);
      CHECK(memory.segment_of(bits) == n % 64);
      CHECK(memory.segment(n % 64).contains(bits));
    }
  }
}

TEST_CASE("parameter image binary round trip") {
  namespace fs = std::filesystem;
  Topology t({4, 2}, {3, 4});
  auto spec = addr_width(t);
  ParamImage img;
  img.header.addr_bits = uint8_t(spec.total_bits);
  img.header.format = FxPFormat(8, 6);
  std::mt19937 rng(59);
  for (const auto& beat : lifo_stream(t, spec))
    img.entries.emplace_back(beat.addr, int32_t(rng() % 255) - 127);
  img.header.count = uint32_t(img.entries.size());

  fs::path dir = fs::temp_directory_path() / "corvet_memmap_test";
  fs::create_directories(dir);
  std::string bin = (dir / "params.cvtp").string();
  std::string jsn = (dir / "params.json").string();
  write_image(bin, img);
  write_image_json(jsn, img);

  auto back = read_image(bin);
  CHECK(back.header.addr_bits == img.header.addr_bits);
  CHECK(back.header.format == img.header.format);
  CHECK(back.entries == img.entries);
  auto jback = read_image_json(jsn);
  CHECK(jback.entries == img.entries);

  // corrupted magic is rejected
  {
    std::ofstream f(bin, std::ios::binary | std::ios::in);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(read_image(bin), LoadError);
}

TEST_SUITE_END();
