#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "datslice/cost.hpp"
#include "datslice/rng.hpp"
#include "datslice/slicer.hpp"

namespace datslice {

/// Inclusive integer ranges of patch extents plus the overlap choices; the
/// default matches the 8..28 bounds with overlaps {0, 1, 2} (1323 configs).
struct SearchSpace {
  int h_lo = 8, h_hi = 28;
  int w_lo = 8, w_hi = 28;
  std::vector<int> overlaps = {0, 1, 2};
  /// When set, only extents dividing map_h / map_w are admitted.
  bool divisible_only = false;
  Eigen::Index map_h = 56, map_w = 56;

  void validate() const;
  std::vector<int> h_values() const;
  std::vector<int> w_values() const;
  /// All configs in lexicographic (h_s, w_s, overlap) order.
  std::vector<SliceConfig> enumerate() const;
  std::size_t size() const;
  bool contains(const SliceConfig& cfg) const;
};

struct Candidate {
  SliceConfig cfg;
  double fidelity = 0.0;  // f1, maximized
  double resource = 0.0;  // f2, minimized
  bool evaluated = false;
};

struct SearchParams {
  int iterations = 50;
  int sample_size = 16;
  double crossover_prob = 0.5;
  /// Mutation steps are uniform integers in [-max, +max]; 0 disables
  /// mutation entirely.
  int mutation_max_step = 3;
  double resource_min = 0.0;
  double resource_max = 14400.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Objective provider: (fidelity, resource) for one config.
class Evaluator {
public:
  virtual ~Evaluator() = default;
  virtual std::pair<double, double> objectives(const SliceConfig& cfg) = 0;
};

/// Memoizing wrapper; each config is evaluated at most once, and the memo
/// table is safe under concurrent insertion of distinct keys.
class CachingEvaluator {
public:
  explicit CachingEvaluator(Evaluator& inner) : inner_(inner) {}

  Candidate evaluate(const SliceConfig& cfg);
  std::size_t distinct_evaluations() const;
  std::vector<Candidate> evaluated() const;  // lexicographic order

private:
  Evaluator& inner_;
  mutable std::mutex mutex_;
  std::map<SliceConfig, Candidate> memo_;
};

/// The standard fixture evaluator: f1 = fidelity of the sliced forward pass
/// against the precomputed full pass, f2 = the buffer resource estimate.
class FidelityResourceEvaluator : public Evaluator {
public:
  FidelityResourceEvaluator(Tensor feature_map, DeformAttnParams attn_params,
                            CostModelParams cost_params, int threads = 1);

  std::pair<double, double> objectives(const SliceConfig& cfg) override;
  const Tensor& full_output() const { return full_output_; }

private:
  Tensor feature_map_;
  DeformAttnParams attn_params_;
  CostModelParams cost_params_;
  int threads_;
  Tensor full_output_;
};

/// True when a is at least as good in both objectives and strictly better in
/// one (f1 maximized, f2 minimized).
bool dominates(const Candidate& a, const Candidate& b);

/// Archive of mutually non-dominated candidates, kept in lexicographic
/// config order for stable serialization. Candidates whose objective pair
/// exactly equals an archived member are rejected (the earlier discovery
/// wins).
class ParetoArchive {
public:
  bool insert(const Candidate& cand);
  const std::vector<Candidate>& members() const { return members_; }
  bool empty() const { return members_.empty(); }
  std::size_t size() const { return members_.size(); }

private:
  std::vector<Candidate> members_;
};

/// 2-D hypervolume of a non-dominated set against the reference point
/// (fidelity 0, resource = resource_ref).
double hypervolume(const std::vector<Candidate>& front, double resource_ref);

struct SearchResult {
  std::vector<Candidate> front;      // lexicographic order
  std::vector<Candidate> evaluated;  // every distinct config evaluated
  std::size_t n_evaluations = 0;     // distinct configs evaluated
  std::uint64_t seed = 0;
  bool feasible_region_empty = false;
  std::string diagnostic;
};

using IterationObserver =
    std::function<void(int iteration, const std::vector<Candidate>& front)>;

/// Perturbs h_s / w_s by a uniform integer step within the space's value
/// lists (clipped at the ends) and re-draws the overlap with probability 1/3.
SliceConfig mutate(const SliceConfig& cfg, const SearchSpace& space, const SearchParams& params,
                   SplitMix64& rng);

/// Uniform gene crossover: each extent comes from b with probability p, else
/// from a; the overlap is taken from a uniformly chosen parent.
SliceConfig crossover(const SliceConfig& a, const SliceConfig& b, double p, SplitMix64& rng);

/// Bi-objective evolutionary search: per iteration, k uniform samples plus
/// the previous iteration's offspring are evaluated and the feasible
/// non-dominated ones enter the archive; one mutant and one crossover child
/// of archive members seed the next iteration. Deterministic for a fixed
/// seed.
SearchResult run_search(const SearchSpace& space, const SearchParams& params,
                        CachingEvaluator& evaluator, const IterationObserver& observer = {});

/// Exhaustive Pareto front over the whole space; refuses spaces larger than
/// 100000 configs. Ground truth for search tests.
SearchResult brute_force_front(const SearchSpace& space, CachingEvaluator& evaluator,
                               double resource_min, double resource_max);

}  // namespace datslice
