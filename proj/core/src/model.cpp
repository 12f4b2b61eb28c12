#include "corvet/model.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace corvet::runner {

namespace fs = std::filesystem;
using nlohmann::json;

mem::Topology ModelSpec::address_topology() const {
  std::vector<int> n, j;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& d = layers[i];
    if (d.kind == engine::LayerKind::dense) {
      n.push_back(d.n_out);
      j.push_back(d.n_in);
    } else if (d.kind == engine::LayerKind::conv) {
      n.push_back(d.geometry->out_channels);
      j.push_back(d.n_in);
    }
  }
  if (n.empty()) throw ConfigError("model has no weight-bearing layers");
  return mem::Topology(std::move(n), std::move(j));
}

std::vector<int> ModelSpec::address_layer_index() const {
  std::vector<int> idx;
  int next = 0;
  for (const auto& d : layers) {
    bool has_params = d.kind == engine::LayerKind::dense ||
                      d.kind == engine::LayerKind::conv;
    idx.push_back(has_params ? next++ : -1);
  }
  return idx;
}

namespace {

template <typename T>
void put_le(std::ofstream& f, T v) {
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = char((uint64_t(v) >> (8 * i)) & 0xff);
  f.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::ifstream& f, const std::string& path) {
  char buf[sizeof(T)];
  if (!f.read(buf, sizeof(T)))
    throw LoadError("truncated binary file: " + path);
  uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= uint64_t(uint8_t(buf[i])) << (8 * i);
  return T(v);
}

double get_f64(std::ifstream& f, const std::string& path) {
  uint64_t bits = get_le<uint64_t>(f, path);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void put_f64(std::ofstream& f, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_le<uint64_t>(f, bits);
}

}  // namespace

void write_weights_blob(const std::string& path,
                        const std::vector<std::vector<double>>& tensors,
                        const std::vector<std::vector<uint32_t>>& shapes) {
  if (tensors.size() != shapes.size())
    throw ContractViolation("write_weights_blob: tensor/shape count mismatch");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError("cannot write weights blob: " + path);
  f.write("CVTW", 4);
  put_le<uint32_t>(f, uint32_t(tensors.size()));
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    put_le<uint32_t>(f, uint32_t(shapes[t].size()));
    uint64_t numel = 1;
    for (uint32_t d : shapes[t]) {
      put_le<uint32_t>(f, d);
      numel *= d;
    }
    if (numel != tensors[t].size())
      throw ContractViolation("write_weights_blob: shape/data mismatch");
    for (double v : tensors[t]) put_f64(f, v);
  }
}

std::vector<std::pair<std::vector<uint32_t>, std::vector<double>>>
read_weights_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open weights blob: " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "CVTW", 4) != 0)
    throw LoadError("weights blob: bad magic in " + path);
  uint32_t count = get_le<uint32_t>(f, path);
  std::vector<std::pair<std::vector<uint32_t>, std::vector<double>>> out;
  out.reserve(count);
  for (uint32_t t = 0; t < count; ++t) {
    uint32_t ndim = get_le<uint32_t>(f, path);
    if (ndim > 4) throw LoadError("weights blob: implausible rank in " + path);
    std::vector<uint32_t> shape;
    uint64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(get_le<uint32_t>(f, path));
      numel *= shape.back();
    }
    std::vector<double> data;
    data.reserve(numel);
    for (uint64_t i = 0; i < numel; ++i) data.push_back(get_f64(f, path));
    out.emplace_back(std::move(shape), std::move(data));
  }
  return out;
}

namespace {

FxPFormat layer_format(const json& jl, const std::string& where) {
  if (!jl.contains("format")) return FxPFormat(8, 6);
  try {
    return FxPFormat::parse(jl["format"].get<std::string>());
  } catch (const LoadError& e) {
    throw LoadError(where + ".format: " + e.what());
  }
}

}  // namespace

ModelSpec ingest(const std::string& model_json_path) {
  std::ifstream f(model_json_path);
  if (!f) throw LoadError("cannot open model file: " + model_json_path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw LoadError("model file: bad JSON in " + model_json_path + ": " +
                    e.what());
  }

  ModelSpec m;
  m.name = j.value("name", "unnamed");
  if (!j.contains("input_dim") || !j["input_dim"].is_number_integer())
    throw LoadError("model file: input_dim: missing or not an integer");
  m.input_dim = j["input_dim"].get<int>();
  if (m.input_dim < 1) throw LoadError("model file: input_dim: must be >= 1");
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
    throw LoadError("model file: layers: missing or empty");

  int flowing = m.input_dim;  // values flowing into the next layer
  for (std::size_t li = 0; li < j["layers"].size(); ++li) {
    const json& jl = j["layers"][li];
    const std::string where = "layers[" + std::to_string(li) + "]";
    engine::LayerDescriptor d;
    d.name = jl.value("name", "layer" + std::to_string(li));
    std::string kind = jl.value("kind", "dense");

    d.format = layer_format(jl, where);
    d.accuracy = cordic::parse_accuracy(jl.value("accuracy", "accurate"));
    if (jl.contains("activation")) {
      try {
        d.activation = af::parse_kind(jl["activation"].get<std::string>());
      } catch (const LoadError& e) {
        throw LoadError(where + ".activation: " + e.what());
      }
    }

    if (kind == "dense") {
      d.kind = engine::LayerKind::dense;
      if (!jl.contains("out"))
        throw LoadError(where + ".out: missing for dense layer");
      d.n_out = jl["out"].get<int>();
      d.n_in = flowing;
      if (d.n_out < 1) throw LoadError(where + ".out: must be >= 1");
      flowing = d.n_out;
    } else if (kind == "conv") {
      d.kind = engine::LayerKind::conv;
      engine::LayerGeometry g;
      if (!jl.contains("in_shape") || jl["in_shape"].size() != 3)
        throw LoadError(where + ".in_shape: expected [C,H,W]");
      g.in_c = jl["in_shape"][0].get<int>();
      g.in_h = jl["in_shape"][1].get<int>();
      g.in_w = jl["in_shape"][2].get<int>();
      if (!jl.contains("kernel") || jl["kernel"].size() != 2)
        throw LoadError(where + ".kernel: expected [kh,kw]");
      g.kernel_h = jl["kernel"][0].get<int>();
      g.kernel_w = jl["kernel"][1].get<int>();
      g.stride = jl.value("stride", 1);
      g.out_channels = jl.value("out_channels", 1);
      if (g.in_c * g.in_h * g.in_w != flowing)
        throw LoadError(where + ".in_shape: does not match incoming size " +
                        std::to_string(flowing));
      if (g.out_h() < 1 || g.out_w() < 1)
        throw LoadError(where + ".kernel: larger than input");
      d.geometry = g;
      d.n_in = g.in_c * g.kernel_h * g.kernel_w;
      d.n_out = g.out_channels * g.out_h() * g.out_w();
      flowing = d.n_out;
    } else if (kind == "pool") {
      d.kind = engine::LayerKind::pool;
      if (jl.value("pool", "aad") != "aad")
        throw LoadError(where + ".pool: only 'aad' pooling is supported");
      engine::LayerGeometry g;
      if (!jl.contains("shape") || jl["shape"].size() != 3)
        throw LoadError(where + ".shape: expected [C,H,W]");
      g.in_c = jl["shape"][0].get<int>();
      g.in_h = jl["shape"][1].get<int>();
      g.in_w = jl["shape"][2].get<int>();
      if (g.in_c * g.in_h * g.in_w != flowing)
        throw LoadError(where + ".shape: does not match incoming size " +
                        std::to_string(flowing));
      aad::PoolWindow win;
      if (!jl.contains("window") || jl["window"].size() != 2)
        throw LoadError(where + ".window: expected [h,w]");
      win.window_h = jl["window"][0].get<int>();
      win.window_w = jl["window"][1].get<int>();
      win.stride = jl.value("stride", win.window_h);
      d.pool = win;
      d.normalize_after_pool = jl.value("normalize", false);
      g.kernel_h = win.window_h;
      g.kernel_w = win.window_w;
      g.stride = win.stride;
      d.geometry = g;
      int oh = (g.in_h - win.window_h) / win.stride + 1;
      int ow = (g.in_w - win.window_w) / win.stride + 1;
      if (oh < 1 || ow < 1) throw LoadError(where + ".window: does not fit");
      d.n_in = flowing;
      d.n_out = g.in_c * oh * ow;
      flowing = d.n_out;
    } else if (kind == "activation-only") {
      d.kind = engine::LayerKind::activation_only;
      d.n_in = flowing;
      d.n_out = flowing;
      if (!d.activation)
        throw LoadError(where + ".activation: required for activation-only");
    } else {
      throw LoadError(where + ".kind: unknown kind '" + kind + "'");
    }
    m.layers.push_back(std::move(d));
  }

  // attach weights
  if (!j.contains("weights_file"))
    throw LoadError("model file: weights_file: missing");
  fs::path wpath = fs::path(model_json_path).parent_path() /
                   j["weights_file"].get<std::string>();
  auto tensors = read_weights_blob(wpath.string());

  std::size_t t = 0;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const auto& d = m.layers[li];
    if (d.kind != engine::LayerKind::dense &&
        d.kind != engine::LayerKind::conv) {
      m.weights.emplace_back();
      m.biases.emplace_back();
      continue;
    }
    int rows = d.kind == engine::LayerKind::conv ? d.geometry->out_channels
                                                 : d.n_out;
    if (t + 2 > tensors.size())
      throw LoadError("weights blob: missing tensors for layer " +
                      std::to_string(li));
    auto& [wshape, wdata] = tensors[t];
    auto& [bshape, bdata] = tensors[t + 1];
    t += 2;
    if (wshape.size() != 2 || int(wshape[0]) != rows ||
        int(wshape[1]) != d.n_in)
      throw LoadError("layers[" + std::to_string(li) +
                      "]: weight tensor shape mismatch (expected " +
                      std::to_string(rows) + "x" + std::to_string(d.n_in) +
                      ")");
    if (bshape.size() != 1 || int(bshape[0]) != rows)
      throw LoadError("layers[" + std::to_string(li) +
                      "]: bias tensor shape mismatch");
    m.weights.push_back(std::move(wdata));
    m.biases.push_back(std::move(bdata));
  }
  if (t != tensors.size())
    throw LoadError("weights blob: " + std::to_string(tensors.size() - t) +
                    " unused tensor(s)");
  return m;
}

Dataset Dataset::load(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw LoadError("cannot open dataset manifest: " + manifest_path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw LoadError("dataset manifest: bad JSON: " + std::string(e.what()));
  }
  Dataset ds;
  ds.input_dim = j.at("input_dim").get<int>();
  ds.classes = j.at("classes").get<int>();
  int count = j.at("count").get<int>();
  fs::path dir = fs::path(manifest_path).parent_path();
  fs::path spath = dir / j.at("samples").get<std::string>();
  fs::path lpath = dir / j.at("labels").get<std::string>();

  std::ifstream sf(spath, std::ios::binary);
  if (!sf) throw LoadError("cannot open samples: " + spath.string());
  ds.samples.assign(count, std::vector<double>(ds.input_dim));
  for (auto& row : ds.samples)
    for (auto& v : row) {
      uint64_t bits = 0;
      char buf[8];
      if (!sf.read(buf, 8))
        throw LoadError("samples file truncated: " + spath.string());
      for (int i = 0; i < 8; ++i) bits |= uint64_t(uint8_t(buf[i])) << (8 * i);
      std::memcpy(&v, &bits, 8);
    }

  std::ifstream lf(lpath, std::ios::binary);
  if (!lf) throw LoadError("cannot open labels: " + lpath.string());
  ds.labels.resize(count);
  for (auto& l : ds.labels) {
    char c;
    if (!lf.read(&c, 1))
      throw LoadError("labels file truncated: " + lpath.string());
    l = uint8_t(c);
  }
  return ds;
}

void Dataset::save(const std::string& manifest_path, const Dataset& ds) {
  fs::path dir = fs::path(manifest_path).parent_path();
  fs::path spath = dir / "samples.bin";
  fs::path lpath = dir / "labels.bin";
  {
    std::ofstream sf(spath, std::ios::binary | std::ios::trunc);
    for (const auto& row : ds.samples)
      for (double v : row) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = char((bits >> (8 * i)) & 0xff);
        sf.write(buf, 8);
      }
  }
  {
    std::ofstream lf(lpath, std::ios::binary | std::ios::trunc);
    for (int l : ds.labels) {
      char c = char(l);
      lf.write(&c, 1);
    }
  }
  json j;
  j["samples"] = "samples.bin";
  j["labels"] = "labels.bin";
  j["count"] = ds.samples.size();
  j["input_dim"] = ds.input_dim;
  j["classes"] = ds.classes;
  std::ofstream mf(manifest_path, std::ios::trunc);
  mf << j.dump(2) << '\n';
}

}  // namespace corvet::runner
