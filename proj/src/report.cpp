#include "datslice/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace datslice {

using nlohmann::json;

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

const char* mode_name(TrafficMode mode) {
  switch (mode) {
    case TrafficMode::kBaseline: return "baseline";
    case TrafficMode::kFused: return "fused";
    case TrafficMode::kSliced: return "sliced";
  }
  return "unknown";
}

json rect_json(const Rect& r) {
  return json{{"y0", r.y0}, {"x0", r.x0}, {"y1", r.y1}, {"x1", r.x1}};
}

}  // namespace

json to_json(const SliceConfig& cfg) {
  return json{{"h_s", cfg.h_s}, {"w_s", cfg.w_s}, {"overlap", cfg.overlap}};
}

json to_json(const Candidate& cand) {
  return json{{"config", to_json(cand.cfg)},
              {"fidelity", cand.fidelity},
              {"resource", cand.resource}};
}

json to_json(const CostModelParams& params) {
  return json{{"bit_width", params.bit_width},
              {"beta", params.beta},
              {"buffer_capacity_bits", params.buffer_capacity_bits},
              {"burst_bytes", params.burst_bytes},
              {"channels", params.channels}};
}

json to_json(const SearchSpace& space) {
  return json{{"h_range", {space.h_lo, space.h_hi}},
              {"w_range", {space.w_lo, space.w_hi}},
              {"overlaps", space.overlaps},
              {"divisible_only", space.divisible_only},
              {"map_h", space.map_h},
              {"map_w", space.map_w},
              {"size", space.size()}};
}

json to_json(const SearchParams& params) {
  return json{{"iterations", params.iterations},
              {"sample_size", params.sample_size},
              {"crossover_prob", params.crossover_prob},
              {"mutation_max_step", params.mutation_max_step},
              {"resource_min", params.resource_min},
              {"resource_max", params.resource_max},
              {"seed", params.seed}};
}

json to_json(const TrafficReport& report) {
  json j{{"mode", mode_name(report.mode)},
         {"h", report.h},
         {"w", report.w},
         {"dram_read_bits", report.dram_read_bits},
         {"dram_write_bits", report.dram_write_bits},
         {"total_bits", report.total_bits()},
         {"baseline_total_bits", report.baseline_total_bits},
         {"normalized", report.normalized},
         {"cost_model", to_json(report.params)}};
  if (report.cfg) j["config"] = to_json(*report.cfg);
  if (!report.per_patch.empty()) {
    json patches = json::array();
    for (const PatchTraffic& p : report.per_patch) {
      patches.push_back(json{{"core", rect_json(p.core)},
                             {"padded", rect_json(p.padded)},
                             {"read_bits", p.read_bits},
                             {"write_bits", p.write_bits},
                             {"spilled", p.spilled}});
    }
    j["per_patch"] = std::move(patches);
  }
  return j;
}

json params_meta_json(const DeformAttnParams& params) {
  return json{{"d_model", params.d_model},
              {"n_heads", params.n_heads},
              {"n_ref_points", params.n_ref_points},
              {"grid_stride", params.grid_stride},
              {"offset_scale", params.offset_scale},
              {"per_head_offsets", params.per_head_offsets},
              {"seed", params.seed}};
}

json trace_stats_json(const SampleTrace& trace) {
  json j{{"samples", trace.size()}};
  if (trace.empty()) return j;
  double y_min = trace[0].y, y_max = trace[0].y, x_min = trace[0].x, x_max = trace[0].x;
  double max_disp = 0.0;
  for (const SampleRecord& r : trace) {
    y_min = std::min(y_min, r.y);
    y_max = std::max(y_max, r.y);
    x_min = std::min(x_min, r.x);
    x_max = std::max(x_max, r.x);
    max_disp = std::max({max_disp, std::abs(r.y - r.ref_y), std::abs(r.x - r.ref_x)});
  }
  j["y_range"] = {y_min, y_max};
  j["x_range"] = {x_min, x_max};
  j["max_offset_magnitude"] = max_disp;
  return j;
}

std::string front_csv(const std::vector<Candidate>& front) {
  std::string csv = "h_s,w_s,overlap,fidelity,resource\n";
  char row[160];
  for (const Candidate& c : front) {
    std::snprintf(row, sizeof(row), "%d,%d,%d,%.17g,%.17g\n", c.cfg.h_s, c.cfg.w_s, c.cfg.overlap,
                  c.fidelity, c.resource);
    csv += row;
  }
  return csv;
}

std::string svg_scatter(const std::vector<Candidate>& evaluated,
                        const std::vector<Candidate>& front) {
  const double width = 720, height = 540;
  const double left = 70, right = 20, top = 20, bottom = 55;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double r_lo = 0.0, r_hi = 1.0;
  if (!evaluated.empty()) {
    r_lo = r_hi = evaluated[0].resource;
    for (const Candidate& c : evaluated) {
      r_lo = std::min(r_lo, c.resource);
      r_hi = std::max(r_hi, c.resource);
    }
    if (r_hi == r_lo) r_hi = r_lo + 1.0;
  }
  auto px = [&](double resource) { return left + (resource - r_lo) / (r_hi - r_lo) * plot_w; };
  auto py = [&](double fid) { return top + (1.0 - fid) * plot_h; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", width) +
         "\" height=\"" + fmt("%.0f", height) + "\" viewBox=\"0 0 " + fmt("%.0f", width) + " " +
         fmt("%.0f", height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axes with 5 ticks per side.
  svg += "<g stroke=\"#333\" stroke-width=\"1\" fill=\"none\">\n";
  svg += "<line x1=\"" + fmt("%.1f", left) + "\" y1=\"" + fmt("%.1f", top + plot_h) + "\" x2=\"" +
         fmt("%.1f", left + plot_w) + "\" y2=\"" + fmt("%.1f", top + plot_h) + "\"/>\n";
  svg += "<line x1=\"" + fmt("%.1f", left) + "\" y1=\"" + fmt("%.1f", top) + "\" x2=\"" +
         fmt("%.1f", left) + "\" y2=\"" + fmt("%.1f", top + plot_h) + "\"/>\n";
  svg += "</g>\n<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double rx = r_lo + f * (r_hi - r_lo);
    svg += "<text x=\"" + fmt("%.1f", px(rx)) + "\" y=\"" + fmt("%.1f", top + plot_h + 18) +
           "\" text-anchor=\"middle\">" + fmt("%.6g", rx) + "</text>\n";
    svg += "<text x=\"" + fmt("%.1f", left - 8) + "\" y=\"" + fmt("%.1f", py(f) + 4) +
           "\" text-anchor=\"end\">" + fmt("%.2f", f) + "</text>\n";
  }
  svg += "<text x=\"" + fmt("%.1f", left + plot_w / 2) + "\" y=\"" + fmt("%.1f", height - 12) +
         "\" text-anchor=\"middle\">resource</text>\n";
  svg += "<text x=\"16\" y=\"" + fmt("%.1f", top + plot_h / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + fmt("%.1f", top + plot_h / 2) +
         ")\">fidelity</text>\n";
  svg += "</g>\n";

  svg += "<g fill=\"#9aa0a6\" fill-opacity=\"0.8\">\n";
  for (const Candidate& c : evaluated) {
    svg += "<circle cx=\"" + fmt("%.2f", px(c.resource)) + "\" cy=\"" + fmt("%.2f", py(c.fidelity)) +
           "\" r=\"2.5\"/>\n";
  }
  svg += "</g>\n<g fill=\"#d62728\" stroke=\"#7f1010\" stroke-width=\"0.8\">\n";
  for (const Candidate& c : front) {
    svg += "<circle cx=\"" + fmt("%.2f", px(c.resource)) + "\" cy=\"" + fmt("%.2f", py(c.fidelity)) +
           "\" r=\"4.5\"/>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw IoError("failed while writing " + path);
  }
}

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace datslice
