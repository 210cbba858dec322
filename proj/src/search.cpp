#include "datslice/search.hpp"

#include <algorithm>
#include <cmath>

namespace datslice {

void SearchSpace::validate() const {
  if (h_lo < 1 || w_lo < 1 || h_lo > h_hi || w_lo > w_hi) {
    throw ValidationError("SearchSpace: extent ranges must satisfy 1 <= lo <= hi");
  }
  if (overlaps.empty()) {
    throw ValidationError("SearchSpace: overlap set must be non-empty");
  }
  for (int k : overlaps) {
    if (k < 0 || k > 2) {
      throw ValidationError("SearchSpace: overlaps must lie in {0, 1, 2}");
    }
  }
  if (h_values().empty() || w_values().empty()) {
    throw ValidationError("SearchSpace: empty after divisibility filter");
  }
}

namespace {

std::vector<int> range_values(int lo, int hi, bool divisible_only, Eigen::Index extent) {
  std::vector<int> values;
  for (int v = lo; v <= hi; ++v) {
    if (divisible_only && extent % v != 0) continue;
    values.push_back(v);
  }
  return values;
}

}  // namespace

std::vector<int> SearchSpace::h_values() const {
  return range_values(h_lo, h_hi, divisible_only, map_h);
}

std::vector<int> SearchSpace::w_values() const {
  return range_values(w_lo, w_hi, divisible_only, map_w);
}

std::vector<SliceConfig> SearchSpace::enumerate() const {
  validate();
  std::vector<SliceConfig> configs;
  const std::vector<int> hs = h_values();
  const std::vector<int> ws = w_values();
  std::vector<int> ks = overlaps;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  configs.reserve(hs.size() * ws.size() * ks.size());
  for (int h : hs)
    for (int w : ws)
      for (int k : ks) configs.push_back({h, w, k});
  return configs;
}

std::size_t SearchSpace::size() const { return enumerate().size(); }

bool SearchSpace::contains(const SliceConfig& cfg) const {
  const std::vector<int> hs = h_values();
  const std::vector<int> ws = w_values();
  return std::find(hs.begin(), hs.end(), cfg.h_s) != hs.end() &&
         std::find(ws.begin(), ws.end(), cfg.w_s) != ws.end() &&
         std::find(overlaps.begin(), overlaps.end(), cfg.overlap) != overlaps.end();
}

void SearchParams::validate() const {
  if (iterations < 1) {
    throw ValidationError("SearchParams: iterations must be >= 1");
  }
  if (sample_size < 2) {
    throw ValidationError("SearchParams: sample_size must be >= 2");
  }
  if (crossover_prob < 0.0 || crossover_prob > 1.0) {
    throw ValidationError("SearchParams: crossover_prob must lie in [0, 1]");
  }
  if (mutation_max_step < 0) {
    throw ValidationError("SearchParams: mutation_max_step must be >= 0");
  }
  if (resource_min > resource_max) {
    throw ValidationError("SearchParams: resource_min must be <= resource_max");
  }
}

Candidate CachingEvaluator::evaluate(const SliceConfig& cfg) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = memo_.find(cfg);
    if (it != memo_.end()) return it->second;
  }
  const auto [f1, f2] = inner_.objectives(cfg);
  Candidate cand{cfg, f1, f2, true};
  std::lock_guard<std::mutex> lock(mutex_);
  return memo_.emplace(cfg, cand).first->second;
}

std::size_t CachingEvaluator::distinct_evaluations() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return memo_.size();
}

std::vector<Candidate> CachingEvaluator::evaluated() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<Candidate> out;
  out.reserve(memo_.size());
  for (const auto& [cfg, cand] : memo_) out.push_back(cand);
  return out;
}

FidelityResourceEvaluator::FidelityResourceEvaluator(Tensor feature_map,
                                                     DeformAttnParams attn_params,
                                                     CostModelParams cost_params, int threads)
    : feature_map_(std::move(feature_map)),
      attn_params_(std::move(attn_params)),
      cost_params_(cost_params),
      threads_(threads) {
  cost_params_.validate();
  full_output_ = forward_full(feature_map_, attn_params_).output;
}

std::pair<double, double> FidelityResourceEvaluator::objectives(const SliceConfig& cfg) {
  const SlicedForwardResult sliced = forward_sliced(feature_map_, attn_params_, cfg, threads_);
  return {fidelity_from_outputs(full_output_, sliced.output), resource(cfg, cost_params_)};
}

bool dominates(const Candidate& a, const Candidate& b) {
  return a.fidelity >= b.fidelity && a.resource <= b.resource &&
         (a.fidelity > b.fidelity || a.resource < b.resource);
}

bool ParetoArchive::insert(const Candidate& cand) {
  for (const Candidate& m : members_) {
    if (dominates(m, cand)) return false;
    if (m.fidelity == cand.fidelity && m.resource == cand.resource) return false;
  }
  std::erase_if(members_, [&cand](const Candidate& m) { return dominates(cand, m); });
  const auto pos = std::lower_bound(
      members_.begin(), members_.end(), cand,
      [](const Candidate& a, const Candidate& b) { return a.cfg < b.cfg; });
  members_.insert(pos, cand);
  return true;
}

double hypervolume(const std::vector<Candidate>& front, double resource_ref) {
  std::vector<Candidate> sorted = front;
  std::sort(sorted.begin(), sorted.end(),
            [](const Candidate& a, const Candidate& b) { return a.resource < b.resource; });
  double volume = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double upper = i + 1 < sorted.size() ? sorted[i + 1].resource : resource_ref;
    if (upper <= sorted[i].resource) continue;
    volume += sorted[i].fidelity * (upper - sorted[i].resource);
  }
  return volume;
}

namespace {

int stepped_value(const std::vector<int>& values, int current, int step) {
  const auto it = std::find(values.begin(), values.end(), current);
  Eigen::Index idx = it == values.end()
                         ? std::min_element(values.begin(), values.end(),
                                            [current](int a, int b) {
                                              return std::abs(a - current) < std::abs(b - current);
                                            }) -
                               values.begin()
                         : it - values.begin();
  idx = std::clamp<Eigen::Index>(idx + step, 0, static_cast<Eigen::Index>(values.size()) - 1);
  return values[static_cast<std::size_t>(idx)];
}

}  // namespace

SliceConfig mutate(const SliceConfig& cfg, const SearchSpace& space, const SearchParams& params,
                   SplitMix64& rng) {
  if (params.mutation_max_step == 0) return cfg;
  SliceConfig out = cfg;
  const int max = params.mutation_max_step;
  out.h_s = stepped_value(space.h_values(), cfg.h_s, rng.uniform_int(-max, max));
  out.w_s = stepped_value(space.w_values(), cfg.w_s, rng.uniform_int(-max, max));
  if (rng.uniform() < 1.0 / 3.0) {
    out.overlap = space.overlaps[rng.uniform_index(space.overlaps.size())];
  }
  return out;
}

SliceConfig crossover(const SliceConfig& a, const SliceConfig& b, double p, SplitMix64& rng) {
  SliceConfig child;
  child.h_s = rng.bernoulli(p) ? b.h_s : a.h_s;
  child.w_s = rng.bernoulli(p) ? b.w_s : a.w_s;
  child.overlap = rng.bernoulli(0.5) ? b.overlap : a.overlap;
  return child;
}

SearchResult run_search(const SearchSpace& space, const SearchParams& params,
                        CachingEvaluator& evaluator, const IterationObserver& observer) {
  space.validate();
  params.validate();
  const std::vector<SliceConfig> configs = space.enumerate();
  SplitMix64 rng(params.seed);
  ParetoArchive archive;
  std::vector<SliceConfig> offspring;
  std::size_t feasible_seen = 0;

  for (int t = 1; t <= params.iterations; ++t) {
    // Selection pool: last iteration's offspring plus k uniform samples.
    std::vector<SliceConfig> pool = offspring;
    offspring.clear();
    for (int i = 0; i < params.sample_size; ++i) {
      pool.push_back(configs[rng.uniform_index(configs.size())]);
    }

    // Canonical insertion order keeps the archive schedule-independent.
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    for (const SliceConfig& cfg : pool) {
      const Candidate cand = evaluator.evaluate(cfg);
      if (cand.resource >= params.resource_min && cand.resource <= params.resource_max) {
        ++feasible_seen;
        archive.insert(cand);
      }
    }

    if (!archive.empty()) {
      const auto& front = archive.members();
      offspring.push_back(
          mutate(front[rng.uniform_index(front.size())].cfg, space, params, rng));
      const SliceConfig& pa = front[rng.uniform_index(front.size())].cfg;
      const SliceConfig& pb = front[rng.uniform_index(front.size())].cfg;
      offspring.push_back(crossover(pa, pb, params.crossover_prob, rng));
    }
    if (observer) observer(t, archive.members());
  }

  SearchResult result;
  result.front = archive.members();
  result.evaluated = evaluator.evaluated();
  result.n_evaluations = evaluator.distinct_evaluations();
  result.seed = params.seed;
  if (archive.empty()) {
    result.feasible_region_empty = feasible_seen == 0;
    result.diagnostic = "no evaluated config had resource within [" +
                        std::to_string(params.resource_min) + ", " +
                        std::to_string(params.resource_max) + "]";
  }
  return result;
}

SearchResult brute_force_front(const SearchSpace& space, CachingEvaluator& evaluator,
                               double resource_min, double resource_max) {
  space.validate();
  if (resource_min > resource_max) {
    throw ValidationError("brute_force_front: resource_min must be <= resource_max");
  }
  const std::vector<SliceConfig> configs = space.enumerate();
  if (configs.size() > 100000) {
    throw ValidationError("brute_force_front: space of " + std::to_string(configs.size()) +
                          " configs is too large to enumerate");
  }
  ParetoArchive archive;
  std::size_t feasible_seen = 0;
  for (const SliceConfig& cfg : configs) {
    const Candidate cand = evaluator.evaluate(cfg);
    if (cand.resource >= resource_min && cand.resource <= resource_max) {
      ++feasible_seen;
      archive.insert(cand);
    }
  }
  SearchResult result;
  result.front = archive.members();
  result.evaluated = evaluator.evaluated();
  result.n_evaluations = evaluator.distinct_evaluations();
  if (archive.empty()) {
    result.feasible_region_empty = feasible_seen == 0;
    result.diagnostic = "no config has resource within [" + std::to_string(resource_min) + ", " +
                        std::to_string(resource_max) + "]";
  }
  return result;
}

}  // namespace datslice
