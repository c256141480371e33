#include "sbloss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "sbloss/error.hpp"

namespace sbloss {

namespace {

double mean_of(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json stat_json(const RunStat& s) {
  return {{"mean", optional_json(s.mean)}, {"std", optional_json(s.std)}, {"runs", s.defined}};
}

nlohmann::json summary_json(const Summary& s) {
  return {{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"sd", s.sd}};
}

}  // namespace

std::optional<double> pearson(std::span<const double> preds, std::span<const double> targets) {
  if (preds.size() != targets.size()) throw DomainError("pearson: length mismatch");
  if (preds.size() < 2) throw DomainError("pearson: need at least 2 points");
  const double mx = mean_of(preds);
  const double my = mean_of(targets);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double dx = preds[i] - mx;
    const double dy = targets[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mse(std::span<const double> preds, std::span<const double> targets) {
  if (preds.size() != targets.size()) throw DomainError("mse: length mismatch");
  if (preds.empty()) throw DomainError("mse: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double r = preds[i] - targets[i];
    sum += r * r;
  }
  return sum / static_cast<double>(preds.size());
}

Histogram histogram(std::span<const double> scores) {
  Histogram h{};
  for (double s : scores) ++h[bin_of(s).index];
  return h;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw DomainError("summarize: empty input");
  Summary s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.mean = mean_of(values);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

DistributionReport distribution_report(std::span<const double> preds, std::span<const double> targets) {
  DistributionReport r;
  r.pred_hist = histogram(preds);
  r.target_hist = histogram(targets);
  r.pred = summarize(preds);
  r.target = summarize(targets);
  return r;
}

const AspectEval& EvalReport::at(const std::string& aspect) const {
  for (const auto& a : aspects) {
    if (a.aspect == aspect) return a;
  }
  throw DomainError("report has no aspect '" + aspect + "'");
}

EvalReport evaluate(const std::vector<std::string>& aspects,
                    const std::vector<std::vector<double>>& preds,
                    const std::vector<std::vector<double>>& targets, std::uint64_t seed) {
  if (preds.size() != aspects.size() || targets.size() != aspects.size()) {
    throw DomainError("evaluate: aspect count mismatch");
  }
  EvalReport report;
  report.seed = seed;
  for (std::size_t k = 0; k < aspects.size(); ++k) {
    AspectEval e;
    e.aspect = aspects[k];
    e.count = preds[k].size();
    if (e.count == 0) {
      report.aspects.push_back(std::move(e));
      continue;
    }
    e.mse = mse(preds[k], targets[k]);
    if (e.count >= 2) e.pcc = pearson(preds[k], targets[k]);
    e.distribution = distribution_report(preds[k], targets[k]);
    report.aspects.push_back(std::move(e));
  }
  return report;
}

const AspectAggregate& AggregateReport::at(const std::string& aspect) const {
  for (const auto& a : aspects) {
    if (a.aspect == aspect) return a;
  }
  throw DomainError("aggregate has no aspect '" + aspect + "'");
}

RunStat run_stat(std::span<const double> values) {
  RunStat s;
  s.defined = values.size();
  if (values.empty()) return s;
  s.mean = mean_of(values);
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - *s.mean) * (v - *s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

AggregateReport aggregate_runs(std::span<const EvalReport> reports) {
  if (reports.size() < 2) throw DomainError("aggregate_runs: need at least 2 reports");
  const auto& first = reports.front();
  for (const auto& r : reports) {
    bool same = r.aspects.size() == first.aspects.size();
    for (std::size_t k = 0; same && k < r.aspects.size(); ++k) {
      same = r.aspects[k].aspect == first.aspects[k].aspect;
    }
    if (!same) throw DomainError("aggregate_runs: reports cover different aspect sets");
  }

  AggregateReport out;
  for (const auto& r : reports) out.seeds.push_back(r.seed);
  for (std::size_t k = 0; k < first.aspects.size(); ++k) {
    AspectAggregate agg;
    agg.aspect = first.aspects[k].aspect;
    std::vector<double> pccs, mses;
    for (const auto& r : reports) {
      const auto& e = r.aspects[k];
      if (e.pcc) {
        pccs.push_back(*e.pcc);
      } else {
        ++agg.undefined_pcc;
      }
      if (e.count > 0) mses.push_back(e.mse);
    }
    agg.pcc = run_stat(pccs);
    agg.mse = run_stat(mses);
    out.aspects.push_back(std::move(agg));
  }
  return out;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json aspects = nlohmann::json::array();
  for (const auto& e : report.aspects) {
    nlohmann::json j = {{"aspect", e.aspect}, {"count", e.count}, {"pcc", optional_json(e.pcc)}};
    if (e.count > 0) {
      j["mse"] = e.mse;
      j["pred_histogram"] = e.distribution.pred_hist;
      j["target_histogram"] = e.distribution.target_hist;
      j["pred"] = summary_json(e.distribution.pred);
      j["target"] = summary_json(e.distribution.target);
    }
    aspects.push_back(std::move(j));
  }
  return {{"seed", report.seed}, {"aspects", aspects}};
}

nlohmann::json to_json(const AggregateReport& report) {
  nlohmann::json aspects = nlohmann::json::array();
  for (const auto& a : report.aspects) {
    aspects.push_back({{"aspect", a.aspect},
                       {"pcc", stat_json(a.pcc)},
                       {"mse", stat_json(a.mse)},
                       {"undefined_pcc_runs", a.undefined_pcc}});
  }
  return {{"std_convention", kStdConvention}, {"seeds", report.seeds}, {"aspects", aspects}};
}

std::string format_stat(const RunStat& stat, int precision) {
  if (!stat.mean) return "n/a";
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << *stat.mean;
  if (stat.std) out << "±" << std::setprecision(precision) << *stat.std;
  return out.str();
}

std::string comparison_table(const std::vector<std::string>& column_labels,
                             const std::vector<AggregateReport>& columns, const std::string& metric) {
  if (column_labels.size() != columns.size()) throw DomainError("comparison_table: label count mismatch");
  if (columns.empty()) return {};
  if (metric != "pcc" && metric != "mse") throw DomainError("comparison_table: metric must be pcc or mse");

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"aspect (" + metric + ")"};
  header.insert(header.end(), column_labels.begin(), column_labels.end());
  cells.push_back(header);
  for (const auto& a : columns.front().aspects) {
    std::vector<std::string> row{a.aspect};
    for (const auto& col : columns) {
      const auto& agg = col.at(a.aspect);
      std::string cell = format_stat(metric == "pcc" ? agg.pcc : agg.mse);
      if (metric == "pcc" && agg.undefined_pcc > 0) cell += " (" + std::to_string(agg.undefined_pcc) + " n/a)";
      row.push_back(cell);
    }
    cells.push_back(row);
  }

  // "±" is two bytes but one column wide
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c) out << " | ";
      out << cells[r][c] << std::string(widths[c] - width(cells[r][c]), ' ');
    }
    out << '\n';
    if (r == 0) {
      for (std::size_t c = 0; c < widths.size(); ++c) {
        if (c) out << "-+-";
        out << std::string(widths[c], '-');
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string histogram_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "class,lower,upper";
  for (const auto& e : report.aspects) out << ',' << e.aspect << "_pred," << e.aspect << "_target";
  out << '\n';
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    char bounds[64];
    std::snprintf(bounds, sizeof bounds, "%zu,%.1f,%.1f", k, kClassWidth * k, kClassWidth * (k + 1));
    out << bounds;
    for (const auto& e : report.aspects) {
      out << ',' << e.distribution.pred_hist[k] << ',' << e.distribution.target_hist[k];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sbloss
