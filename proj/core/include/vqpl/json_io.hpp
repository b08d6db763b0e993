#pragma once

#include "vqpl/denot.hpp"
#include "vqpl/eval.hpp"

#include <json.hpp>

namespace vqpl {

using Json = nlohmann::ordered_json;

// Golden-state fixture format: { "qubits": n, "amps": [[re, im], ...] }.
Json state_to_json(const StateVector& s);
StateVector state_from_json(const Json& j);

// { "outcomes": [{"value": ..., "prob": ...}], "residual": ..., "steps": ... }
// Outcomes are listed in display order; equal displays are merged.
Json explore_report_to_json(const ExploreReport& rep);

Json subdist_to_json(const SubDist& d);
Json algstate_to_json(const AlgState& s);
Json superop_to_json(const Superoperator& s);
Json adequacy_report_to_json(const AdequacyReport& rep);

} // namespace vqpl
