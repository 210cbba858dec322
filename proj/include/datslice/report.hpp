#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "datslice/cost.hpp"
#include "datslice/deform_attn.hpp"
#include "datslice/search.hpp"

namespace datslice {

nlohmann::json to_json(const SliceConfig& cfg);
nlohmann::json to_json(const Candidate& cand);
nlohmann::json to_json(const CostModelParams& params);
nlohmann::json to_json(const SearchSpace& space);
nlohmann::json to_json(const SearchParams& params);
nlohmann::json to_json(const TrafficReport& report);
/// Structural metadata of attention params (no weight payloads).
nlohmann::json params_meta_json(const DeformAttnParams& params);
nlohmann::json trace_stats_json(const SampleTrace& trace);

/// CSV with header h_s,w_s,overlap,fidelity,resource; one row per candidate
/// in the given order, %.17g for the objective columns.
std::string front_csv(const std::vector<Candidate>& front);

/// Static scatter plot of (resource, fidelity): every evaluated candidate in
/// grey, front members highlighted. Output is deterministic.
std::string svg_scatter(const std::vector<Candidate>& evaluated,
                        const std::vector<Candidate>& front);

void write_text_file(const std::string& path, const std::string& content);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace datslice
