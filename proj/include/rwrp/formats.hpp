#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include <json.hpp>

#include "rwrp/annealed.hpp"
#include "rwrp/bounds.hpp"
#include "rwrp/lyapunov.hpp"
#include "rwrp/quenched.hpp"

namespace rwrp {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// Shortest round-trip text for a double; empty for NaN.
std::string format_real(double v);
// A CSV field, quoted when it holds a comma or quote.
std::string csv_field(const std::string& s);

// "# rwrp <version>" and "# config: <json>" lines that open every CSV file.
void write_csv_preamble(std::ostream& os, const Json& config);
// {"version", "config", "result"} document.
Json wrap_result(const Json& config, Json result);

// `index mantissa` lines, then `log_scale`, `gauge` and `anchor` footers.
void write_field_dump(std::ostream& os, const QuenchedField& field);

void write_flip_csv(std::ostream& os, std::span<const FlipBoundRow> rows);
void write_cost_csv(std::ostream& os, std::span<const CostEstimate> rows);
void write_derivative_csv(std::ostream& os, std::span<const DerivativeReport> rows);
void write_lyapunov_csv(std::ostream& os, std::span<const LyapunovPoint> points);
void write_bound_csv(std::ostream& os, const BoundReport& report);

Json to_json(const Site& s);
Json to_json(const CostEstimate& c);
Json to_json(const DerivativeReport& r);
Json to_json(const LyapunovPoint& p);
Json to_json(const DifferenceRow& r);
Json to_json(const BoundCell& c);
Json to_json(const BoundReport& r);
Json to_json(const RateFunctionValue& v);
Json to_json(const FlipBoundRow& r);

}  // namespace rwrp
