#pragma once

#include <string>
#include <vector>

#include "corvet/engine.hpp"
#include "corvet/memmap.hpp"

namespace corvet::runner {

// A parsed, shape-checked model: descriptors plus float reference tensors.
// Weight-bearing layers keep row-major out x in weights (conv kernels as
// out_channels x C*KH*KW rows).
struct ModelSpec {
  std::string name;
  int input_dim = 0;
  std::vector<engine::LayerDescriptor> layers;
  std::vector<std::vector<double>> weights;  // empty for parameterless layers
  std::vector<std::vector<double>> biases;

  // Address topology over the weight-bearing layers, and the map from
  // network layer position to address-space layer id (-1 if none).
  mem::Topology address_topology() const;
  std::vector<int> address_layer_index() const;
};

// Loads model JSON + weights blob; validates the dimension chain (Eq-style
// J(l+1) = N(l) across dense layers) and tensor shapes. Errors name the
// offending JSON path.
ModelSpec ingest(const std::string& model_json_path);

// Weight blob: "CVTW", u32 tensor count, then per tensor u32 ndim,
// u32 dims[], f64 data[] little-endian. Tensors in layer order, W then b.
void write_weights_blob(const std::string& path,
                        const std::vector<std::vector<double>>& tensors,
                        const std::vector<std::vector<uint32_t>>& shapes);
std::vector<std::pair<std::vector<uint32_t>, std::vector<double>>>
read_weights_blob(const std::string& path);

// Labelled evaluation samples. The manifest JSON names the binary sample
// (f64 little-endian) and label (u8) files.
struct Dataset {
  int input_dim = 0;
  int classes = 0;
  std::vector<std::vector<double>> samples;
  std::vector<int> labels;

  static Dataset load(const std::string& manifest_path);
  static void save(const std::string& manifest_path, const Dataset& ds);
};

}  // namespace corvet::runner
