#pragma once

#include <string>

#include "json.hpp"

#include "leebounds/bounds.hpp"
#include "leebounds/inference.hpp"
#include "leebounds/monotonicity.hpp"
#include "leebounds/simulation.hpp"
#include "leebounds/support.hpp"
#include "leebounds/trimreg.hpp"

namespace leebounds {

using Json = nlohmann::ordered_json;

Json to_json(const BoundsEstimate& est);
Json to_json(const ConfidenceRegion& cr);
Json to_json(const SplitAggregate& agg, const std::vector<SplitEstimate>& splits);
Json to_json(const MonotonicityTestResult& res);
Json to_json(const McReport& rep);
Json to_json(const SupportCurve& curve);
Json to_json(const ProjectionBounds& b);
Json to_json(const Circle& c);
Json to_json(const TrimRegResult& res);
Json to_json(const DgpConfig& cfg);

// Hex form of a 64-bit fingerprint.
std::string hex64(std::uint64_t h);

// Fixed-width text rendering of a monotonicity test.
std::string format_monotonicity(const MonotonicityTestResult& res);
std::string format_trimreg(const TrimRegResult& res);

}  // namespace leebounds
