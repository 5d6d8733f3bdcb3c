#include "coalition_prune/tables.hpp"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include <json.hpp>

#include "coalition_prune/error.hpp"

namespace cprune {

std::string format_real(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string exact_csv(std::span<const double> values, const HeadLayout& layout) {
  std::string out = "player,layer,head,shapley\n";
  for (std::size_t p = 0; p < values.size(); ++p) {
    const auto c = layout.coordinate(p);
    out += std::to_string(p) + "," + std::to_string(c.layer) + "," + std::to_string(c.head) +
           "," + format_real(values[p]) + "\n";
  }
  return out;
}

std::string estimates_csv(std::span<const ShapleyEstimate> estimates, const HeadLayout& layout) {
  std::string out = "player,layer,head,mean,variance,t,lower,upper,converged,reason\n";
  for (std::size_t p = 0; p < estimates.size(); ++p) {
    const auto& e = estimates[p];
    const auto c = layout.coordinate(p);
    out += std::to_string(p) + "," + std::to_string(c.layer) + "," + std::to_string(c.head) +
           "," + format_real(e.mean) + "," + format_real(e.variance) + "," +
           std::to_string(e.t) + "," + format_real(e.lower) + "," + format_real(e.upper) + "," +
           (e.converged ? "true" : "false") + "," + to_string(e.reason) + "\n";
  }
  return out;
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_real(const std::string& text, std::size_t row) {
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw Error(ErrorCode::parse,
                "row " + std::to_string(row) + ": '" + text + "' is not a number");
  }
  return value;
}

}  // namespace

std::vector<ShapleyEstimate> parse_estimates_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse, "estimates file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_row(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const char* name : {"player", "mean", "variance", "t", "lower", "upper", "converged",
                           "reason"}) {
    if (!column.count(name)) {
      throw Error(ErrorCode::parse, std::string("estimates file lacks column '") + name + "'");
    }
  }

  std::vector<ShapleyEstimate> estimates;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::parse, "row " + std::to_string(row) + " has " +
                                        std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(header.size()));
    }
    const auto player = static_cast<std::size_t>(parse_real(cells[column["player"]], row));
    if (player != estimates.size()) {
      throw Error(ErrorCode::parse, "row " + std::to_string(row) +
                                        ": players must be listed in order starting at 0");
    }
    ShapleyEstimate e;
    e.mean = parse_real(cells[column["mean"]], row);
    e.variance = parse_real(cells[column["variance"]], row);
    e.t = static_cast<std::uint64_t>(parse_real(cells[column["t"]], row));
    e.lower = parse_real(cells[column["lower"]], row);
    e.upper = parse_real(cells[column["upper"]], row);
    const auto& converged = cells[column["converged"]];
    if (converged != "true" && converged != "false") {
      throw Error(ErrorCode::parse, "row " + std::to_string(row) + ": converged must be true/false");
    }
    e.converged = converged == "true";
    e.reason = parse_convergence_reason(cells[column["reason"]]);
    estimates.push_back(e);
  }
  if (estimates.empty()) throw Error(ErrorCode::parse, "estimates file has no rows");
  return estimates;
}

std::string prune_report_json(const PruneReport& report) {
  nlohmann::json decisions = nlohmann::json::array();
  for (auto d : report.decisions) decisions.push_back(d == Decision::keep ? "keep" : "prune");
  nlohmann::json doc = {{"decisions", decisions},
                        {"k", report.k},
                        {"mask_bits", report.mask.to_string()},
                        {"metric_before", report.metric_before},
                        {"metric_after", report.metric_after},
                        {"delta", report.delta}};
  return doc.dump(2) + "\n";
}

std::string curve_csv(std::span<const PruningCurve> curves) {
  std::string out = "heads_removed,metric,ranking_kind\n";
  for (const auto& curve : curves) {
    for (const auto& p : curve.points) {
      out += std::to_string(p.heads_removed) + "," + format_real(p.metric) + "," +
             to_string(curve.kind) + "\n";
    }
  }
  return out;
}

std::string correlation_csv(std::span<const std::string> labels,
                            const std::vector<std::vector<double>>& matrix) {
  if (matrix.size() != labels.size()) {
    throw Error(ErrorCode::argument, "correlation labels do not match the matrix size");
  }
  std::string out;
  for (const auto& label : labels) out += "," + label;
  out += "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += labels[i];
    for (double v : matrix[i]) out += "," + format_real(v);
    out += "\n";
  }
  return out;
}

}  // namespace cprune
