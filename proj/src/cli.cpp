#include "datslice/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "datslice/cost.hpp"
#include "datslice/report.hpp"
#include "datslice/search.hpp"
#include "datslice/tensor_io.hpp"

namespace datslice::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

SliceConfig parse_slice(const std::string& text) {
  SliceConfig cfg;
  char sep1 = 0, sep2 = 0;
  std::istringstream in(text);
  if (!(in >> cfg.h_s >> sep1 >> cfg.w_s >> sep2 >> cfg.overlap) || sep1 != 'x' || sep2 != 'x' ||
      !in.eof()) {
    throw ValidationError("bad slice spec '" + text + "', expected HxWxK, e.g. 28x14x1");
  }
  cfg.validate();
  return cfg;
}

// Shared feature-map / attention-parameter options.
struct FixtureOpts {
  int channels = 16;
  int height = 56;
  int width = 56;
  std::uint64_t input_seed = 7;
  std::string input_path;
  std::string params_path;
  std::uint64_t param_seed = 1;
  int heads = 4;
  int ref_points = 4;
  int stride = 7;
  double offset_scale = 14.0;
  bool shared_offsets = false;

  void add_options(CLI::App& cmd) {
    cmd.add_option("--channels", channels, "feature map channels (d_model)")->capture_default_str();
    cmd.add_option("--height", height, "feature map height")->capture_default_str();
    cmd.add_option("--width", width, "feature map width")->capture_default_str();
    cmd.add_option("--input", input_path, "input feature map (FMAP file); overrides --input-seed");
    cmd.add_option("--input-seed", input_seed, "seed for the synthesized input map")
        ->capture_default_str();
    cmd.add_option("--params", params_path, "attention weights (DATP file); overrides synthesis");
    cmd.add_option("--param-seed", param_seed, "seed for synthesized attention weights")
        ->capture_default_str();
    cmd.add_option("--heads", heads, "attention heads")->capture_default_str();
    cmd.add_option("--ref-points", ref_points, "sampled keys per reference cell per head")
        ->capture_default_str();
    cmd.add_option("--stride", stride, "reference grid stride")->capture_default_str();
    cmd.add_option("--offset-scale", offset_scale, "max offset magnitude in pixels")
        ->capture_default_str();
    cmd.add_flag("--shared-offsets", shared_offsets,
                 "share one offset group across heads instead of per-head offsets");
  }

  Tensor load_map() const {
    if (!input_path.empty()) {
      Tensor t = load_tensor(input_path);
      if (t.rank() != 3) {
        throw FormatError("input map must be rank 3 [C, H, W]");
      }
      return t;
    }
    return uniform_random_tensor({channels, height, width}, input_seed);
  }

  DeformAttnParams load_attn() const {
    if (!params_path.empty()) return load_params(params_path);
    return make_params(channels, heads, ref_points, offset_scale, param_seed, stride,
                       !shared_offsets);
  }

  json to_json(const Tensor& map, const DeformAttnParams& attn) const {
    json j{{"channels", map.dim(0)},
           {"height", map.dim(1)},
           {"width", map.dim(2)},
           {"attention", params_meta_json(attn)}};
    if (!input_path.empty()) {
      j["input"] = input_path;
    } else {
      j["input_seed"] = input_seed;
    }
    if (!params_path.empty()) j["params"] = params_path;
    return j;
  }
};

struct CostOpts {
  CostModelParams params;

  void add_options(CLI::App& cmd) {
    cmd.add_option("--bit-width", params.bit_width, "hardware storage bits per element")
        ->capture_default_str();
    cmd.add_option("--beta", params.beta, "constant resource overhead")->capture_default_str();
    cmd.add_option("--buffer-bits", params.buffer_capacity_bits, "on-chip buffer capacity in bits")
        ->capture_default_str();
    cmd.add_option("--burst-bytes", params.burst_bytes, "DRAM burst granularity in bytes")
        ->capture_default_str();
  }
};

fs::path prepare_out_dir(const std::string& out_dir) {
  fs::path dir(out_dir);
  fs::create_directories(dir);
  return dir;
}

int cmd_forward(const FixtureOpts& fixture, const std::string& slice_spec, bool full,
                int threads, const std::string& save_params_path, const std::string& out_dir) {
  const Tensor map = fixture.load_map();
  const DeformAttnParams attn = fixture.load_attn();
  const fs::path dir = prepare_out_dir(out_dir);
  if (!save_params_path.empty()) {
    const fs::path parent = fs::path(save_params_path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    save_params(save_params_path, attn);
  }
  json report{{"command", "forward"}, {"config", fixture.to_json(map, attn)}};

  if (full || slice_spec.empty()) {
    report["mode"] = "full";
    const ForwardResult result = forward_full(map, attn);
    save_tensor((dir / "output.fmap").string(), result.output);
    report["trace"] = trace_stats_json(result.trace);
  } else {
    const SliceConfig cfg = parse_slice(slice_spec);
    report["mode"] = "sliced";
    report["config"]["slice"] = datslice::to_json(cfg);
    const ForwardResult full_result = forward_full(map, attn);
    const SlicedForwardResult sliced = forward_sliced(map, attn, cfg, threads);
    save_tensor((dir / "output.fmap").string(), sliced.output);
    report["fidelity"] = fidelity_from_outputs(full_result.output, sliced.output);

    json patches = json::array();
    SampleTrace merged;
    for (std::size_t p = 0; p < sliced.traces.size(); ++p) {
      const Patch& patch = sliced.patch_layout.patches[p];
      patches.push_back(json{
          {"core", {{"y0", patch.core.y0}, {"x0", patch.core.x0}, {"y1", patch.core.y1}, {"x1", patch.core.x1}}},
          {"samples", sliced.traces[p].size()},
          {"trace_confined", trace_confined(sliced.traces[p], patch.padded)}});
      merged.insert(merged.end(), sliced.traces[p].begin(), sliced.traces[p].end());
    }
    report["patches"] = std::move(patches);
    report["trace"] = trace_stats_json(merged);
  }

  write_json_file((dir / "report.json").string(), report);
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
  return 0;
}

int cmd_cost(Eigen::Index h, Eigen::Index w, const CostOpts& cost, const std::string& mode,
             const std::string& slice_spec, const std::string& out_dir) {
  std::optional<SliceConfig> cfg;
  if (!slice_spec.empty()) cfg = parse_slice(slice_spec);

  const fs::path dir = prepare_out_dir(out_dir);
  json report{{"command", "cost"},
              {"config", json{{"height", h},
                              {"width", w},
                              {"mode", mode},
                              {"cost_model", datslice::to_json(cost.params)}}}};
  if (cfg) {
    report["config"]["slice"] = datslice::to_json(*cfg);
    report["resource"] = resource(*cfg, cost.params);
  }

  auto run_mode = [&](TrafficMode m) { return simulate_traffic(h, w, m, cfg, cost.params); };

  if (mode == "all") {
    if (!cfg) {
      throw ValidationError("cost --mode all needs --slice for the sliced leg");
    }
    const TrafficReport baseline = run_mode(TrafficMode::kBaseline);
    const TrafficReport fused = run_mode(TrafficMode::kFused);
    const TrafficReport sliced = run_mode(TrafficMode::kSliced);
    report["traffic"] = json{{"baseline", datslice::to_json(baseline)},
                             {"fused", datslice::to_json(fused)},
                             {"sliced", datslice::to_json(sliced)}};
    std::vector<std::pair<double, std::string>> order{{baseline.normalized, "baseline"},
                                                      {fused.normalized, "fused"},
                                                      {sliced.normalized, "sliced"}};
    std::sort(order.begin(), order.end());
    json names = json::array();
    for (const auto& [n, name] : order) names.push_back(name);
    report["ordering"] = std::move(names);
  } else {
    TrafficMode m;
    if (mode == "baseline") {
      m = TrafficMode::kBaseline;
    } else if (mode == "fused") {
      m = TrafficMode::kFused;
    } else if (mode == "sliced") {
      m = TrafficMode::kSliced;
    } else {
      throw ValidationError("unknown mode '" + mode + "'");
    }
    report["traffic"] = datslice::to_json(run_mode(m));
  }

  write_json_file((dir / "report.json").string(), report);
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
  return 0;
}

struct SearchOpts {
  SearchSpace space;
  SearchParams params;
  std::vector<int> h_range{8, 28};
  std::vector<int> w_range{8, 28};
  bool oracle = false;

  void add_options(CLI::App& cmd) {
    cmd.add_option("--h-range", h_range, "inclusive patch-height range: LO HI")
        ->expected(2)
        ->delimiter(':')
        ->capture_default_str();
    cmd.add_option("--w-range", w_range, "inclusive patch-width range: LO HI")
        ->expected(2)
        ->delimiter(':')
        ->capture_default_str();
    cmd.add_option("--overlaps", space.overlaps, "overlap widths to search")
        ->delimiter(',')
        ->capture_default_str();
    cmd.add_flag("--divisible-only", space.divisible_only,
                 "restrict to extents dividing the map dims");
    cmd.add_option("--iterations", params.iterations, "search iterations T")
        ->capture_default_str();
    cmd.add_option("--sample-size", params.sample_size, "uniform samples per iteration k")
        ->capture_default_str();
    cmd.add_option("--crossover-prob", params.crossover_prob, "gene swap probability P")
        ->capture_default_str();
    cmd.add_option("--max-step", params.mutation_max_step, "max mutation step")
        ->capture_default_str();
    cmd.add_option("--r-min", params.resource_min, "resource lower bound")->capture_default_str();
    cmd.add_option("--r-max", params.resource_max, "resource upper bound")->capture_default_str();
    cmd.add_option("--seed", params.seed, "search RNG seed")->capture_default_str();
    cmd.add_flag("--oracle", oracle, "also run the exhaustive front and audit dominance");
  }
};

int cmd_search(const FixtureOpts& fixture, SearchOpts& opts, const CostOpts& cost, int threads,
               const std::string& out_dir) {
  opts.space.h_lo = opts.h_range.at(0);
  opts.space.h_hi = opts.h_range.at(1);
  opts.space.w_lo = opts.w_range.at(0);
  opts.space.w_hi = opts.w_range.at(1);

  const Tensor map = fixture.load_map();
  opts.space.map_h = map.dim(1);
  opts.space.map_w = map.dim(2);
  const DeformAttnParams attn = fixture.load_attn();
  CostModelParams cost_params = cost.params;
  cost_params.channels = static_cast<int>(map.dim(0));

  FidelityResourceEvaluator evaluator(map, attn, cost_params, threads);
  CachingEvaluator cache(evaluator);
  const SearchResult result = run_search(opts.space, opts.params, cache);

  const fs::path dir = prepare_out_dir(out_dir);
  json report{{"command", "search"},
              {"config", json{{"space", datslice::to_json(opts.space)},
                              {"search", datslice::to_json(opts.params)},
                              {"cost_model", datslice::to_json(cost_params)},
                              {"fixture", fixture.to_json(map, attn)}}},
              {"n_evaluations", result.n_evaluations},
              {"seed", result.seed}};

  json front = json::array();
  for (const Candidate& c : result.front) front.push_back(datslice::to_json(c));
  report["front"] = std::move(front);
  report["front_size"] = result.front.size();
  report["hypervolume"] = hypervolume(result.front, opts.params.resource_max);

  if (opts.oracle) {
    const SearchResult brute =
        brute_force_front(opts.space, cache, opts.params.resource_min, opts.params.resource_max);
    json oracle{{"front_size", brute.front.size()}};
    json ofront = json::array();
    for (const Candidate& c : brute.front) ofront.push_back(datslice::to_json(c));
    oracle["front"] = std::move(ofront);
    json dominated = json::array();
    for (const Candidate& mine : result.front) {
      for (const Candidate& theirs : brute.front) {
        if (dominates(theirs, mine)) {
          dominated.push_back(datslice::to_json(mine));
          break;
        }
      }
    }
    oracle["dominated_search_members"] = dominated;
    oracle["sound"] = dominated.empty();
    report["oracle"] = std::move(oracle);
  }

  if (result.front.empty()) {
    report["diagnostic"] = result.diagnostic;
    write_json_file((dir / "front.json").string(), report);
    std::cerr << "error: empty feasible region: " << result.diagnostic << "\n";
    return 3;
  }

  write_text_file((dir / "front.csv").string(), front_csv(result.front));
  write_text_file((dir / "front.svg").string(), svg_scatter(result.evaluated, result.front));
  write_json_file((dir / "front.json").string(), report);
  std::cout << "wrote " << (dir / "front.csv").string() << " (" << result.front.size()
            << " members)\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"slicing strategies for deformable attention: forward passes, "
               "DRAM traffic estimates and bi-objective slice search"};
  app.set_config("--config", "", "config file (key = value, one [section] per subcommand)");
  app.require_subcommand(1);

  FixtureOpts fwd_fixture;
  std::string fwd_slice;
  bool fwd_full = false;
  int fwd_threads = 1;
  std::string fwd_save_params;
  std::string fwd_out = "out";
  CLI::App* fwd = app.add_subcommand("forward", "run one attention forward pass");
  fwd_fixture.add_options(*fwd);
  auto* slice_opt =
      fwd->add_option("--slice", fwd_slice, "slice config HxWxK (h_s x w_s x overlap)");
  fwd->add_flag("--full", fwd_full, "run the unsliced reference pass (default)")
      ->excludes(slice_opt);
  fwd->add_option("--threads", fwd_threads, "concurrent patch workers")->capture_default_str();
  fwd->add_option("--save-params", fwd_save_params, "also write resolved weights to a DATP file");
  fwd->add_option("--out-dir", fwd_out, "output directory")->capture_default_str();

  Eigen::Index cost_h = 56, cost_w = 56;
  CostOpts cost_opts;
  std::string cost_mode = "all";
  std::string cost_slice;
  std::string cost_out = "out";
  CLI::App* cost = app.add_subcommand("cost", "resource formula and DRAM traffic simulation");
  cost->add_option("--height", cost_h, "map height")->capture_default_str();
  cost->add_option("--width", cost_w, "map width")->capture_default_str();
  cost->add_option("--channels", cost_opts.params.channels, "map channels")->capture_default_str();
  cost_opts.add_options(*cost);
  cost->add_option("--mode", cost_mode, "baseline | fused | sliced | all")->capture_default_str();
  cost->add_option("--slice", cost_slice, "slice config HxWxK");
  cost->add_option("--out-dir", cost_out, "output directory")->capture_default_str();

  FixtureOpts search_fixture;
  SearchOpts search_opts;
  CostOpts search_cost;
  int search_threads = 1;
  std::string search_out = "out";
  CLI::App* search = app.add_subcommand("search", "bi-objective evolutionary slice search");
  search_fixture.add_options(*search);
  search_opts.add_options(*search);
  search_cost.add_options(*search);
  search->add_option("--threads", search_threads, "concurrent patch workers")
      ->capture_default_str();
  search->add_option("--out-dir", search_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fwd->parsed()) {
      return cmd_forward(fwd_fixture, fwd_slice, fwd_full, fwd_threads, fwd_save_params, fwd_out);
    }
    if (cost->parsed()) {
      return cmd_cost(cost_h, cost_w, cost_opts, cost_mode, cost_slice, cost_out);
    }
    if (search->parsed()) {
      return cmd_search(search_fixture, search_opts, search_cost, search_threads, search_out);
    }
  } catch (const FormatError& e) {
    std::cerr << "error: format: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace datslice::cli
