#pragma once

#include <span>
#include <string>
#include <vector>

#include "coalition_prune/estimator.hpp"
#include "coalition_prune/exact.hpp"
#include "coalition_prune/pruning.hpp"

namespace cprune {

// Round-trip text for a double ("%.17g").
std::string format_real(double value);

// player,layer,head,shapley
std::string exact_csv(std::span<const double> values, const HeadLayout& layout);

// player,layer,head,mean,variance,t,lower,upper,converged,reason
std::string estimates_csv(std::span<const ShapleyEstimate> estimates,
                          const HeadLayout& layout);
std::vector<ShapleyEstimate> parse_estimates_csv(const std::string& text);

// {decisions, k, mask_bits, metric_before, metric_after, delta}
std::string prune_report_json(const PruneReport& report);

// heads_removed,metric,ranking_kind
std::string curve_csv(std::span<const PruningCurve> curves);

// Square matrix with a language-tag header row and column.
std::string correlation_csv(std::span<const std::string> labels,
                            const std::vector<std::vector<double>>& matrix);

}  // namespace cprune
