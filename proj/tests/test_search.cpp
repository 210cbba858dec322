#include <doctest.h>

#include <algorithm>
#include <set>
#include <thread>

#include "datslice/report.hpp"
#include "datslice/search.hpp"

using namespace datslice;

namespace {

// Counts how often the wrapped objectives run; for memoization checks.
class CountingEvaluator : public Evaluator {
public:
  std::pair<double, double> objectives(const SliceConfig& cfg) override {
    ++calls;
    return {0.5, static_cast<double>(cfg.h_s * cfg.w_s)};
  }
  int calls = 0;
};

// Perfect trade-off line over an injective index: fidelity rises with
// resource, so nothing dominates anything and no two configs tie.
class TradeoffEvaluator : public Evaluator {
public:
  explicit TradeoffEvaluator(const SearchSpace& space) : configs_(space.enumerate()) {}
  std::pair<double, double> objectives(const SliceConfig& cfg) override {
    const auto it = std::lower_bound(configs_.begin(), configs_.end(), cfg);
    const double f2 = static_cast<double>(it - configs_.begin()) + 1.0;
    return {f2 / (static_cast<double>(configs_.size()) + 1.0), f2};
  }

private:
  std::vector<SliceConfig> configs_;
};

// The inverted line f1 = 1 - f2/f2_max: the cheapest config is best in both
// objectives, so the exact front is that single config.
class InvertedLineEvaluator : public Evaluator {
public:
  explicit InvertedLineEvaluator(const SearchSpace& space) : configs_(space.enumerate()) {}
  std::pair<double, double> objectives(const SliceConfig& cfg) override {
    const auto it = std::lower_bound(configs_.begin(), configs_.end(), cfg);
    const double f2 = static_cast<double>(it - configs_.begin()) + 1.0;
    return {1.0 - f2 / static_cast<double>(configs_.size()), f2};
  }

private:
  std::vector<SliceConfig> configs_;
};

// Real resource formula with constant fidelity: the minimum-resource config
// dominates everything.
class ConstantFidelityEvaluator : public Evaluator {
public:
  std::pair<double, double> objectives(const SliceConfig& cfg) override {
    return {0.5, resource(cfg, CostModelParams{16, 0.0, 1024, 64, 4})};
  }
};

bool same_front(const std::vector<Candidate>& a, const std::vector<Candidate>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].cfg != b[i].cfg || a[i].fidelity != b[i].fidelity || a[i].resource != b[i].resource)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("default space matches the 3 x 21 x 21 sub-net count") {
  SearchSpace space;
  CHECK(space.size() == 1323);
  const auto configs = space.enumerate();
  CHECK(std::is_sorted(configs.begin(), configs.end()));
  CHECK(space.contains({8, 8, 0}));
  CHECK(space.contains({28, 28, 2}));
  CHECK_FALSE(space.contains({7, 8, 0}));
  CHECK_FALSE(space.contains({8, 8, 3}));
}

TEST_CASE("divisibility filter restricts to dividing extents") {
  SearchSpace space;
  space.divisible_only = true;  // 56 is divisible by 8, 14, 28 within [8, 28]
  CHECK(space.h_values() == std::vector<int>{8, 14, 28});
  CHECK(space.size() == 27);
  CHECK_FALSE(space.contains({9, 14, 0}));
}

TEST_CASE("space validation") {
  SearchSpace space;
  space.h_lo = 10;
  space.h_hi = 9;
  CHECK_THROWS_AS(space.validate(), ValidationError);
  space = SearchSpace{};
  space.overlaps = {0, 5};
  CHECK_THROWS_AS(space.validate(), ValidationError);
}

TEST_CASE("evaluation is memoized per config") {
  CountingEvaluator inner;
  CachingEvaluator cache(inner);
  const Candidate a = cache.evaluate({10, 10, 0});
  const Candidate b = cache.evaluate({10, 10, 0});
  CHECK(inner.calls == 1);
  CHECK(a.fidelity == b.fidelity);
  CHECK(a.resource == b.resource);
  CHECK(a.evaluated);
  cache.evaluate({10, 11, 0});
  CHECK(inner.calls == 2);
  CHECK(cache.distinct_evaluations() == 2);
}

TEST_CASE("memo table survives concurrent insertion of distinct keys") {
  CountingEvaluator inner;
  CachingEvaluator cache(inner);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&cache, t] {
      for (int i = 0; i < 50; ++i) {
        cache.evaluate({8 + t, 8 + i % 20, i % 3});
      }
    });
  }
  for (auto& t : pool) t.join();
  // i -> (i % 20, i % 3) is injective below 60, so 50 distinct keys per thread.
  CHECK(cache.distinct_evaluations() == 4u * 50u);
  const auto all = cache.evaluated();
  CHECK(std::is_sorted(all.begin(), all.end(),
                       [](const Candidate& a, const Candidate& b) { return a.cfg < b.cfg; }));
}

TEST_CASE("fidelity evaluator gives 1.0 on the full-map config and the formula resource") {
  Tensor x = uniform_random_tensor({8, 16, 16}, 3);
  DeformAttnParams attn = make_params(8, 2, 2, 4.0, 5, 4);
  FidelityResourceEvaluator eval(x, attn, CostModelParams{16, 0.0, 131072, 64, 8});
  const auto [f_full, r_full] = eval.objectives({16, 16, 0});
  CHECK(f_full == 1.0);
  const auto [f, r] = eval.objectives({28, 14, 1});
  CHECK(r == 6960.0);
  CHECK(f <= 1.0);
  CHECK(f >= 0.0);
}

TEST_CASE("mutation respects bounds and the zero-step identity") {
  SearchSpace space;
  SearchParams params;
  SplitMix64 rng(1);

  params.mutation_max_step = 0;
  for (int i = 0; i < 50; ++i) {
    CHECK(mutate({15, 20, 1}, space, params, rng) == SliceConfig{15, 20, 1});
  }

  params.mutation_max_step = 3;
  SplitMix64 rng2(2);
  // Clipping keeps boundary configs in range.
  for (int i = 0; i < 200; ++i) {
    const SliceConfig m = mutate({28, 28, 2}, space, params, rng2);
    CHECK(space.contains(m));
    CHECK(m.h_s <= 28);
    CHECK(m.w_s <= 28);
  }
}

TEST_CASE("mutation from the center covers most of the range") {
  SearchSpace space;
  SearchParams params;
  SplitMix64 rng(42);
  std::set<int> h_seen;
  for (int i = 0; i < 10000; ++i) {
    SliceConfig m = mutate({18, 18, 1}, space, params, rng);
    CHECK(space.contains(m));
    // Walk a few steps so the histogram spreads beyond +-3.
    m = mutate(m, space, params, rng);
    m = mutate(m, space, params, rng);
    h_seen.insert(m.h_s);
  }
  CHECK(h_seen.size() * 2 > space.h_values().size());
}

TEST_CASE("crossover takes genes from the parents") {
  const SliceConfig a{8, 8, 0}, b{28, 28, 2};
  SplitMix64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const SliceConfig child = crossover(a, b, 0.5, rng);
    CHECK((child.h_s == 8 || child.h_s == 28));
    CHECK((child.w_s == 8 || child.w_s == 28));
    CHECK((child.overlap == 0 || child.overlap == 2));
  }
  SplitMix64 rng2(4);
  const SliceConfig zero = crossover(a, b, 0.0, rng2);
  CHECK(zero.h_s == a.h_s);
  CHECK(zero.w_s == a.w_s);
  SplitMix64 rng3(5);
  const SliceConfig one = crossover(a, b, 1.0, rng3);
  CHECK(one.h_s == b.h_s);
  CHECK(one.w_s == b.w_s);
}

TEST_CASE("dominance and archive bookkeeping") {
  const Candidate good{{8, 8, 0}, 0.9, 100.0, true};
  const Candidate worse{{9, 9, 0}, 0.8, 200.0, true};
  const Candidate tradeoff{{10, 10, 0}, 0.95, 300.0, true};
  CHECK(dominates(good, worse));
  CHECK_FALSE(dominates(worse, good));
  CHECK_FALSE(dominates(good, tradeoff));
  CHECK_FALSE(dominates(good, good));  // needs one strict inequality

  ParetoArchive archive;
  CHECK(archive.insert(worse));
  CHECK(archive.insert(tradeoff));
  CHECK(archive.insert(good));  // evicts `worse`
  CHECK(archive.size() == 2);
  CHECK_FALSE(archive.insert(worse));

  // Equal objective pair: the earlier discovery stays.
  Candidate twin{{12, 12, 1}, 0.9, 100.0, true};
  CHECK_FALSE(archive.insert(twin));
  CHECK(archive.size() == 2);
}

TEST_CASE("hypervolume hand case") {
  // Points (f1 0.5, f2 2) and (f1 1.0, f2 4) with reference resource 10:
  // 0.5 * (4 - 2) + 1.0 * (10 - 4) = 7.
  std::vector<Candidate> front{{{8, 8, 0}, 0.5, 2.0, true}, {{9, 9, 0}, 1.0, 4.0, true}};
  CHECK(hypervolume(front, 10.0) == doctest::Approx(7.0).epsilon(1e-15));
  CHECK(hypervolume({}, 10.0) == 0.0);
}

TEST_CASE("search on a singleton space returns that config") {
  SearchSpace space;
  space.h_lo = space.h_hi = 14;
  space.w_lo = space.w_hi = 14;
  space.overlaps = {1};
  ConstantFidelityEvaluator inner;
  CachingEvaluator cache(inner);
  SearchParams params;
  params.iterations = 3;
  const SearchResult r = run_search(space, params, cache);
  REQUIRE(r.front.size() == 1);
  CHECK(r.front[0].cfg == SliceConfig{14, 14, 1});
}

TEST_CASE("search equals brute force on a tie-free trade-off line") {
  SearchSpace space;
  space.h_hi = 14;  // 7 x 21 x 3 = 441 configs
  TradeoffEvaluator inner(space);
  CachingEvaluator cache(inner);

  SearchParams params;
  params.iterations = 400;
  params.sample_size = 16;
  params.resource_min = 0.0;
  params.resource_max = 1e9;
  params.seed = 11;
  const SearchResult evo = run_search(space, params, cache);
  const SearchResult brute = brute_force_front(space, cache, params.resource_min,
                                               params.resource_max);
  CHECK(evo.n_evaluations == space.size());  // budget covered everything
  CHECK(brute.front.size() == space.size()); // every point lies on the line
  CHECK(same_front(evo.front, brute.front));
}

TEST_CASE("inverted line collapses both fronts to the cheapest config") {
  SearchSpace space;
  space.h_hi = 14;
  InvertedLineEvaluator inner(space);
  CachingEvaluator cache(inner);
  SearchParams params;
  params.iterations = 400;
  params.sample_size = 16;
  params.resource_min = 0.0;
  params.resource_max = 1e9;
  params.seed = 11;
  const SearchResult evo = run_search(space, params, cache);
  const SearchResult brute = brute_force_front(space, cache, 0.0, 1e9);
  REQUIRE(brute.front.size() == 1);
  CHECK(brute.front[0].cfg == SliceConfig{8, 8, 0});
  CHECK(same_front(evo.front, brute.front));
}

TEST_CASE("constant fidelity reduces the front to the minimum resource config") {
  SearchSpace space;
  ConstantFidelityEvaluator inner;
  CachingEvaluator cache(inner);
  const SearchResult brute = brute_force_front(space, cache, 0.0, 1e9);
  REQUIRE(brute.front.size() == 1);
  CHECK(brute.front[0].cfg == SliceConfig{8, 8, 0});

  SearchParams params;
  params.iterations = 600;
  params.sample_size = 16;
  params.resource_min = 0.0;
  params.resource_max = 1e9;
  params.seed = 7;
  const SearchResult evo = run_search(space, params, cache);
  REQUIRE(evo.front.size() == 1);
  CHECK(evo.front[0].cfg == SliceConfig{8, 8, 0});
}

TEST_CASE("archive invariants hold after every iteration") {
  SearchSpace space;
  TradeoffEvaluator inner(space);
  CachingEvaluator cache(inner);
  SearchParams params;
  params.iterations = 60;
  params.resource_min = 100.0;
  params.resource_max = 900.0;
  params.seed = 5;

  double last_hv = -1.0;
  int checked = 0;
  const auto observer = [&](int, const std::vector<Candidate>& front) {
    for (std::size_t i = 0; i < front.size(); ++i) {
      CHECK(front[i].resource >= params.resource_min);
      CHECK(front[i].resource <= params.resource_max);
      for (std::size_t j = 0; j < front.size(); ++j) {
        if (i != j) CHECK_FALSE(dominates(front[i], front[j]));
      }
    }
    const double hv = hypervolume(front, params.resource_max);
    CHECK(hv >= last_hv - 1e-12);
    last_hv = hv;
    ++checked;
  };
  run_search(space, params, cache, observer);
  CHECK(checked == params.iterations);
}

TEST_CASE("identical seeds give byte-identical serialized fronts") {
  SearchSpace space;
  SearchParams params;
  params.iterations = 25;
  params.seed = 99;
  params.resource_min = 0.0;
  params.resource_max = 1e9;

  TradeoffEvaluator inner_a(space);
  CachingEvaluator cache_a(inner_a);
  const SearchResult a = run_search(space, params, cache_a);

  TradeoffEvaluator inner_b(space);
  CachingEvaluator cache_b(inner_b);
  const SearchResult b = run_search(space, params, cache_b);

  CHECK(front_csv(a.front) == front_csv(b.front));
  SearchParams other = params;
  other.seed = 100;
  TradeoffEvaluator inner_c(space);
  CachingEvaluator cache_c(inner_c);
  const SearchResult c = run_search(space, other, cache_c);
  CHECK(front_csv(a.front) != front_csv(c.front));  // different exploration
}

TEST_CASE("empty feasible region is reported, not thrown") {
  SearchSpace space;
  ConstantFidelityEvaluator inner;
  CachingEvaluator cache(inner);
  SearchParams params;
  params.iterations = 10;
  params.resource_min = 1.0;
  params.resource_max = 2.0;  // below every resource value
  const SearchResult r = run_search(space, params, cache);
  CHECK(r.front.empty());
  CHECK(r.feasible_region_empty);
  CHECK(r.diagnostic.find("2.0") != std::string::npos);

  const SearchResult rb = brute_force_front(space, cache, 1.0, 2.0);
  CHECK(rb.front.empty());
  CHECK(rb.feasible_region_empty);
}

TEST_CASE("brute force prunes a dominated pair to one member") {
  SearchSpace space;
  space.h_lo = space.h_hi = 8;
  space.w_lo = 8;
  space.w_hi = 9;
  space.overlaps = {0};
  ConstantFidelityEvaluator inner;  // equal fidelity, so lower resource wins
  CachingEvaluator cache(inner);
  const SearchResult r = brute_force_front(space, cache, 0.0, 1e9);
  REQUIRE(r.front.size() == 1);
  CHECK(r.front[0].cfg == SliceConfig{8, 8, 0});
}

TEST_CASE("brute force refuses oversized spaces") {
  SearchSpace space;
  space.h_lo = 1;
  space.h_hi = 400;
  space.w_lo = 1;
  space.w_hi = 100;
  ConstantFidelityEvaluator inner;
  CachingEvaluator cache(inner);
  CHECK_THROWS_AS(brute_force_front(space, cache, 0.0, 1e9), ValidationError);
}

TEST_CASE("search stays sound against the oracle under a reduced budget") {
  SearchSpace space;
  space.h_hi = 16;
  space.w_hi = 16;  // 9 x 9 x 3 = 243 configs
  TradeoffEvaluator inner(space);
  CachingEvaluator cache(inner);
  SearchParams params;
  params.iterations = 8;
  params.sample_size = 8;  // far below full coverage
  params.resource_min = 0.0;
  params.resource_max = 1e9;
  params.seed = 17;
  const SearchResult evo = run_search(space, params, cache);
  const SearchResult brute = brute_force_front(space, cache, 0.0, 1e9);
  for (const Candidate& mine : evo.front) {
    for (const Candidate& theirs : brute.front) {
      // On the trade-off line nothing dominates anything.
      CHECK_FALSE(dominates(theirs, mine));
    }
  }
}
