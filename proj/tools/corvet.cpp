// corvet: runs quantized networks through the CORDIC vector-engine model,
// sweeps accuracy/latency trade-offs, and emits parameter images.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "corvet/runner.hpp"
#include "json.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace corvet;
using cordic::Accuracy;

namespace {

struct RunManifest {
  std::string model_path;
  std::string dataset_path;
  std::string engine_path;
  std::string modes = "uniform-acc";
  std::string out_dir = ".";
  uint64_t seed = 0;
  int limit = 0;  // 0: whole dataset; else seed-shuffled subsample
  bool trace = false;
};

// Primary outputs are written whole, then renamed into place.
void atomic_write(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw LoadError("cannot write " + path.string());
    f.write(content.data(), std::streamsize(content.size()));
  }
  fs::rename(tmp, path);
}

runner::Dataset load_dataset(const RunManifest& man) {
  auto ds = runner::Dataset::load(man.dataset_path);
  if (man.limit <= 0 || man.limit >= int(ds.samples.size())) return ds;
  std::vector<std::size_t> order(ds.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(man.seed);
  std::shuffle(order.begin(), order.end(), rng);
  runner::Dataset sub;
  sub.input_dim = ds.input_dim;
  sub.classes = ds.classes;
  for (int i = 0; i < man.limit; ++i) {
    sub.samples.push_back(ds.samples[order[i]]);
    sub.labels.push_back(ds.labels[order[i]]);
  }
  return sub;
}

engine::EngineConfig load_engine(const RunManifest& man) {
  if (man.engine_path.empty()) return {};
  return engine::EngineConfig::from_json_file(man.engine_path);
}

std::vector<Accuracy> resolve_modes(const RunManifest& man,
                                    const runner::QuantizedModel& q,
                                    const runner::Dataset& ds,
                                    const engine::EngineConfig& cfg,
                                    json* scan_out) {
  std::size_t n = q.layers.size();
  if (man.modes == "uniform-approx")
    return runner::uniform_assignment(n, Accuracy::approximate);
  if (man.modes == "uniform-acc")
    return runner::uniform_assignment(n, Accuracy::accurate);
  if (man.modes == "heuristic") {
    auto rep = runner::sensitivity_scan(q, ds, cfg);
    if (scan_out) {
      json js;
      js["threshold_pp"] = rep.threshold;
      js["baseline_accuracy"] = rep.baseline_accuracy;
      auto& per = js["per_layer"] = json::array();
      for (const auto& e : rep.per_layer)
        per.push_back({{"layer", e.layer}, {"drop_pp", e.drop_pp}});
      *scan_out = std::move(js);
    }
    return rep.assignment;
  }
  if (man.modes.rfind("file=", 0) == 0) {
    std::ifstream f(man.modes.substr(5));
    if (!f) throw LoadError("cannot open modes file: " + man.modes.substr(5));
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw LoadError(std::string("modes file: bad JSON: ") + e.what());
    }
    std::vector<Accuracy> assign;
    for (const auto& s : j.at("modes"))
      assign.push_back(cordic::parse_accuracy(s.get<std::string>()));
    if (assign.size() != n)
      throw ConfigError("modes file lists " + std::to_string(assign.size()) +
                        " layers, model has " + std::to_string(n));
    return assign;
  }
  throw ConfigError("unknown --modes value '" + man.modes + "'");
}

json cycles_json(const engine::CycleReport& r) {
  json j;
  j["total"] = r.total_cycles;
  j["mac"] = r.mac_cycles;
  j["af"] = r.af_cycles;
  j["pool"] = r.pool_cycles;
  j["control"] = r.control_overhead_cycles;
  j["mac_ops"] = r.mac_ops;
  j["lane_occupancy"] = r.lane_occupancy;
  j["effective_macs_per_cycle"] = r.effective_macs_per_cycle;
  j["af_hr_busy"] = r.af_hr_busy_cycles;
  j["af_lv_busy"] = r.af_lv_busy_cycles;
  j["segment_ports_shared"] = r.segment_ports_shared;
  return j;
}

std::string results_json(const RunManifest& man, const runner::ModelSpec& m,
                         const runner::EvalResult& res, const json& scan) {
  json j;
  j["model"] = m.name;
  j["modes"] = man.modes;
  j["seed"] = man.seed;
  j["samples"] = res.sample_count;
  j["float_accuracy"] = res.float_accuracy;
  j["fxp_accuracy"] = res.fxp_accuracy;
  j["accuracy_delta"] = res.float_accuracy - res.fxp_accuracy;
  auto& assign = j["assignment"] = json::array();
  for (auto a : res.assignment) assign.push_back(cordic::to_string(a));
  j["scale_exps"] = res.scale_exps;
  j["cycles"] = cycles_json(res.network_report);
  j["cycles"]["per_layer"] = res.network_report.per_layer_cycles;
  j["cycles"]["total_all_samples"] = res.total_cycles;
  if (!scan.is_null()) j["sensitivity"] = scan;
  auto& per = j["per_sample"] = json::array();
  for (int i = 0; i < res.sample_count; ++i) {
    per.push_back({{"pred", res.predictions[i]},
                   {"float_pred", res.float_predictions[i]},
                   {"outputs_raw", res.outputs_raw[i]}});
  }
  return j.dump(2) + "\n";
}

std::string cycles_csv(const runner::ModelSpec& m,
                       const runner::EvalResult& res) {
  std::ostringstream os;
  os << "layer,name,kind,format,accuracy,mac_cycles,af_cycles,pool_cycles,"
        "control_cycles,scheduled_cycles\n";
  for (std::size_t l = 0; l < res.layer_reports.size(); ++l) {
    const auto& r = res.layer_reports[l];
    const auto& d = m.layers[l];
    const char* kind = d.kind == engine::LayerKind::dense ? "dense"
                       : d.kind == engine::LayerKind::conv ? "conv"
                       : d.kind == engine::LayerKind::pool ? "pool"
                                                           : "activation-only";
    os << l << ',' << d.name << ',' << kind << ',' << d.format.name() << ','
       << cordic::to_string(res.assignment[l]) << ',' << r.mac_cycles << ','
       << r.af_cycles << ',' << r.pool_cycles << ','
       << r.control_overhead_cycles << ',' << r.total_cycles << '\n';
  }
  const auto& t = res.network_report;
  os << "total,,,,," << t.mac_cycles << ',' << t.af_cycles << ','
     << t.pool_cycles << ',' << t.control_overhead_cycles << ','
     << t.total_cycles << '\n';
  return os.str();
}

std::string metadata_json(const RunManifest& man) {
  json j;
  j["model_path"] = man.model_path;
  j["dataset_path"] = man.dataset_path;
  j["engine_path"] = man.engine_path;
  j["threads"] = runner::thread_cap();
  j["timestamp"] = std::time(nullptr);  // quarantined from results.json
  return j.dump(2) + "\n";
}

int cmd_run(const RunManifest& man) {
  auto m = runner::ingest(man.model_path);
  auto ds = load_dataset(man);
  auto cfg = load_engine(man);
  auto q = runner::quantize_model(m);
  json scan;
  auto assignment = resolve_modes(man, q, ds, cfg, &scan);

  auto memory = runner::load_image(runner::build_image(q), q);
  auto res = runner::evaluate(q, m, ds, cfg, assignment, &memory);

  fs::create_directories(man.out_dir);
  atomic_write(fs::path(man.out_dir) / "results.json",
               results_json(man, m, res, scan));
  atomic_write(fs::path(man.out_dir) / "cycles.csv", cycles_csv(m, res));
  atomic_write(fs::path(man.out_dir) / "metadata.json", metadata_json(man));

  if (man.trace) {
    // signal trace of the first sample's forward pass
    engine::TraceSink sink;
    auto layers = q.layers;
    for (std::size_t i = 0; i < layers.size(); ++i)
      layers[i].desc.accuracy = assignment[i];
    std::vector<FxPValue> in;
    for (double x : ds.samples.at(0))
      in.push_back(quantize(x, layers.front().desc.format));
    engine::run_network(layers, in, cfg, nullptr, &sink);
    std::ostringstream os;
    sink.to_csv(os);
    atomic_write(fs::path(man.out_dir) / "trace.csv", os.str());
  }

  std::cout << "model " << m.name << ": float " << res.float_accuracy
            << "%, fxp " << res.fxp_accuracy << "%, "
            << res.network_report.total_cycles << " cycles/sample\n";
  return 0;
}

double max_abs_error(const runner::ModelSpec& m, const runner::Dataset& ds,
                     const runner::EvalResult& res, FxPFormat out_fmt) {
  double worst = 0.0;
  for (int i = 0; i < res.sample_count; ++i) {
    auto fl = runner::run_float(m, ds.samples[i]);
    for (std::size_t k = 0; k < fl.size(); ++k) {
      double fx = double(res.outputs_raw[i][k]) * out_fmt.resolution();
      worst = std::max(worst, std::abs(fx - fl[k]));
    }
  }
  return worst;
}

int cmd_sweep(const RunManifest& man, const std::string& axis, bool plot) {
  auto m = runner::ingest(man.model_path);
  auto ds = load_dataset(man);
  auto base_cfg = load_engine(man);

  struct Point {
    std::string label;
    double accuracy;
    double max_err;
    int64_t cycles;
    double macs_per_cycle;
  };
  std::vector<Point> points;

  auto eval_point = [&](const std::string& label, runner::ModelSpec spec,
                        engine::EngineConfig cfg) {
    auto q = runner::quantize_model(spec);
    auto assignment = resolve_modes(man, q, ds, cfg, nullptr);
    auto res = runner::evaluate(q, spec, ds, cfg, assignment);
    points.push_back({label, res.fxp_accuracy,
                      max_abs_error(spec, ds, res, spec.layers.back().format),
                      res.network_report.total_cycles,
                      res.network_report.effective_macs_per_cycle});
  };

  if (axis == "iterations") {
    for (int n = 1; n <= 16; ++n) {
      auto cfg = base_cfg;
      cfg.iterations_override = n;
      eval_point(std::to_string(n), m, cfg);
    }
  } else if (axis == "precision") {
    for (int bits : {16, 8, 4}) {
      auto spec = m;
      for (auto& l : spec.layers)
        l.format = FxPFormat::with_default_frac(bits);
      eval_point("fxp" + std::to_string(bits), spec, base_cfg);
    }
  } else if (axis == "pes") {
    for (int pes : {64, 128, 256}) {
      auto cfg = base_cfg;
      cfg.num_pes = pes;
      eval_point(std::to_string(pes), m, cfg);
    }
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "'");
  }

  std::ostringstream os;
  os << "point,accuracy,max_abs_err,total_cycles,effective_macs_per_cycle\n";
  for (const auto& p : points)
    os << p.label << ',' << p.accuracy << ',' << p.max_err << ',' << p.cycles
       << ',' << p.macs_per_cycle << '\n';
  fs::create_directories(man.out_dir);
  atomic_write(fs::path(man.out_dir) / "sweep.csv", os.str());

  if (plot) {
    SvgChart chart("sweep: " + axis);
    std::vector<double> xs, acc, cyc;
    for (std::size_t i = 0; i < points.size(); ++i) {
      xs.push_back(double(i));
      acc.push_back(points[i].accuracy);
      cyc.push_back(double(points[i].cycles));
    }
    chart.add_series("accuracy %", xs, acc);
    chart.add_series("cycles", xs, cyc);
    std::vector<std::string> labels;
    for (const auto& p : points) labels.push_back(p.label);
    chart.set_labels(labels);
    atomic_write(fs::path(man.out_dir) / "sweep.svg", chart.render());
  }
  std::cout << "sweep " << axis << ": " << points.size() << " points\n";
  return 0;
}

int cmd_loadimg(const std::string& model_path, const std::string& out_path,
                bool verify, bool json_form, bool verify_existing) {
  auto m = runner::ingest(model_path);
  auto q = runner::quantize_model(m);
  auto img = runner::build_image(q);
  if (!verify_existing) {
    if (json_form)
      mem::write_image_json(out_path, img);
    else
      mem::write_image(out_path, img);
  }
  if (verify || verify_existing) {
    auto back =
        json_form ? mem::read_image_json(out_path) : mem::read_image(out_path);
    if (back.entries != img.entries)
      throw SimulationError("verify: image round trip mismatch");
    auto memory = runner::load_image(back, q);
    if (memory.count() != img.entries.size())
      throw SimulationError("verify: memory entry count mismatch");
    std::cout << "verify: ok (" << memory.count() << " parameters)\n";
  }
  std::cout << "parameter image: " << out_path << " (" << img.entries.size()
            << " entries, " << int(img.header.addr_bits)
            << " address bits)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CORDIC vector-engine simulator"};
  app.require_subcommand(1);

  RunManifest man;
  std::string axis;
  bool plot = false;
  bool verify = false;
  bool json_form = false;
  std::string img_out = "params.cvtp";

  auto* run = app.add_subcommand("run", "evaluate a model on a dataset");
  run->add_option("--model", man.model_path, "model JSON")->required();
  run->add_option("--dataset", man.dataset_path, "dataset manifest JSON")
      ->required();
  run->add_option("--engine", man.engine_path, "engine config JSON");
  run->add_option("--modes", man.modes,
                  "uniform-approx | uniform-acc | heuristic | file=PATH");
  run->add_option("--out", man.out_dir, "output directory");
  run->add_option("--seed", man.seed, "seed for dataset subsampling");
  run->add_option("--limit", man.limit, "evaluate a seeded subsample");
  run->add_flag("--trace", man.trace, "emit trace.csv for the first sample");

  auto* sweep = app.add_subcommand("sweep", "sweep an engine axis");
  sweep->add_option("--model", man.model_path, "model JSON")->required();
  sweep->add_option("--dataset", man.dataset_path, "dataset manifest JSON")
      ->required();
  sweep->add_option("--engine", man.engine_path, "engine config JSON");
  sweep->add_option("--modes", man.modes,
                    "uniform-approx | uniform-acc | heuristic | file=PATH");
  sweep->add_option("--sweep", axis, "iterations | precision | pes")
      ->required();
  sweep->add_option("--out", man.out_dir, "output directory");
  sweep->add_option("--seed", man.seed, "seed for dataset subsampling");
  sweep->add_option("--limit", man.limit, "evaluate a seeded subsample");
  sweep->add_flag("--plot", plot, "also write sweep.svg");

  auto* loadimg = app.add_subcommand("loadimg", "emit a LIFO parameter image");
  loadimg->add_option("--model", man.model_path, "model JSON")->required();
  loadimg->add_option("--out", img_out, "image file path");
  loadimg->add_flag("--verify", verify, "reload and round-trip the image");
  loadimg->add_flag("--json", json_form, "write the JSON debug form");
  bool verify_existing = false;
  loadimg->add_flag("--verify-existing", verify_existing,
                    "verify an already emitted image without rewriting it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "corvet: error: config: " << e.what() << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand("run")) return cmd_run(man);
    if (app.got_subcommand("sweep")) return cmd_sweep(man, axis, plot);
    return cmd_loadimg(man.model_path, img_out, verify, json_form,
                       verify_existing);
  } catch (const LoadError& e) {
    std::cerr << "corvet: error: config: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "corvet: error: config: " << e.what() << "\n";
    return 1;
  } catch (const ContractViolation& e) {
    std::cerr << "corvet: error: config: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "corvet: error: runtime: " << e.what() << "\n";
    return 2;
  }
}
