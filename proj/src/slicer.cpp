#include "datslice/slicer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

namespace datslice {

void SliceConfig::validate() const {
  if (h_s < 1 || w_s < 1) {
    throw ValidationError("SliceConfig: patch extents must be >= 1");
  }
  if (overlap < 0 || overlap > 2) {
    throw ValidationError("SliceConfig: overlap must be 0, 1 or 2, got " +
                          std::to_string(overlap));
  }
}

PatchLayout layout(Eigen::Index h, Eigen::Index w, const SliceConfig& cfg) {
  cfg.validate();
  if (h < 1 || w < 1) {
    throw ShapeError("layout: map extents must be >= 1");
  }
  PatchLayout out;
  out.rows = (h + cfg.h_s - 1) / cfg.h_s;
  out.cols = (w + cfg.w_s - 1) / cfg.w_s;
  out.patches.reserve(static_cast<std::size_t>(out.rows * out.cols));
  const Eigen::Index k = cfg.overlap;
  for (Eigen::Index i = 0; i < out.rows; ++i) {
    const Eigen::Index y0 = i * cfg.h_s;
    const Eigen::Index y1 = std::min<Eigen::Index>(y0 + cfg.h_s, h);
    for (Eigen::Index j = 0; j < out.cols; ++j) {
      const Eigen::Index x0 = j * cfg.w_s;
      const Eigen::Index x1 = std::min<Eigen::Index>(x0 + cfg.w_s, w);
      Patch p;
      p.core = {y0, x0, y1, x1};
      p.padded = {std::max<Eigen::Index>(y0 - k, 0), std::max<Eigen::Index>(x0 - k, 0),
                  std::min<Eigen::Index>(y1 + k, h), std::min<Eigen::Index>(x1 + k, w)};
      out.patches.push_back(p);
    }
  }
  return out;
}

SlicedForwardResult forward_sliced(const Tensor& x, const DeformAttnParams& params,
                                   const SliceConfig& cfg, int threads) {
  if (x.rank() != 3) {
    throw ShapeError("forward_sliced: input must be rank 3 [C, H, W]");
  }
  SlicedForwardResult result;
  result.patch_layout = layout(x.dim(1), x.dim(2), cfg);
  result.output = Tensor(x.dims());
  const std::size_t n = result.patch_layout.patches.size();
  result.traces.resize(n);

  auto run_patch = [&](std::size_t p) {
    const Patch& patch = result.patch_layout.patches[p];
    result.traces[p] = forward_region(x, params, patch.core, patch.padded, result.output);
  };

  threads = std::max(1, threads);
  if (threads == 1 || n == 1) {
    for (std::size_t p = 0; p < n; ++p) run_patch(p);
  } else {
    // Patches write disjoint core regions, so any schedule yields the same
    // output.
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t p = next.fetch_add(1); p < n; p = next.fetch_add(1)) run_patch(p);
    };
    std::vector<std::thread> pool;
    const int count = std::min<int>(threads, static_cast<int>(n));
    pool.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return result;
}

double fidelity_from_outputs(const Tensor& full_output, const Tensor& sliced_output,
                             FidelityMetric metric) {
  if (!full_output.same_dims(sliced_output)) {
    throw ShapeError("fidelity: outputs have different extents");
  }
  if (metric == FidelityMetric::kMaxAbsError) {
    const double err = (sliced_output.array() - full_output.array()).abs().maxCoeff();
    return 1.0 - std::min(1.0, err);
  }
  const double ref = std::sqrt(full_output.array().square().sum());
  const double err = std::sqrt((sliced_output.array() - full_output.array()).square().sum());
  if (ref == 0.0) {
    return err == 0.0 ? 1.0 : 0.0;
  }
  return 1.0 - std::min(1.0, err / ref);
}

double fidelity(const Tensor& x, const DeformAttnParams& params, const SliceConfig& cfg,
                FidelityMetric metric) {
  const ForwardResult full = forward_full(x, params);
  const SlicedForwardResult sliced = forward_sliced(x, params, cfg);
  return fidelity_from_outputs(full.output, sliced.output, metric);
}

bool trace_confined(const SampleTrace& trace, const Rect& bounds) {
  for (const SampleRecord& r : trace) {
    if (!bounds.contains_point(r.y, r.x)) return false;
  }
  return true;
}

}  // namespace datslice
