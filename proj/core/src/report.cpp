#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "sewa/experiment.hpp"
#include "sewa/io_util.hpp"

namespace sewa {

namespace {

struct MeanStderr {
  double mean = 0.0;
  double stderr_value = 0.0;
};

MeanStderr mean_stderr(const std::vector<double>& v) {
  MeanStderr out;
  if (v.empty()) return {std::nan(""), std::nan("")};
  const auto n = static_cast<double>(v.size());
  for (double x : v) out.mean += x;
  out.mean /= n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.stderr_value = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

}  // namespace

void finalize_report(MethodReport& report) {
  std::vector<double> losses, accs;
  for (const auto& r : report.per_seed) {
    if (!r.ok) continue;
    losses.push_back(r.eval.loss);
    accs.push_back(r.eval.accuracy);
  }
  const MeanStderr l = mean_stderr(losses);
  const MeanStderr a = mean_stderr(accs);
  report.mean_loss = l.mean;
  report.stderr_loss = l.stderr_value;
  report.mean_acc = a.mean;
  report.stderr_acc = a.stderr_value;
}

SummaryFiles emit_summary(const std::vector<MethodReport>& reports) {
  SummaryFiles out;
  out.csv = "method,K,seed,eval_loss,eval_acc\n";
  for (const auto& r : reports) {
    const std::string prefix = r.method + ',' + std::to_string(r.K) + ',';
    for (const auto& s : r.per_seed) {
      out.csv += prefix + std::to_string(s.seed) + ',' + format_double(s.eval.loss) + ',' +
                 format_double(s.eval.accuracy) + '\n';
    }
    out.csv += prefix + "mean," + format_double(r.mean_loss) + ',' + format_double(r.mean_acc) + '\n';
    out.csv += prefix + "stderr," + format_double(r.stderr_loss) + ',' +
               format_double(r.stderr_acc) + '\n';
  }

  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double la = reports[a].mean_loss;
    const double lb = reports[b].mean_loss;
    if (std::isnan(la) || std::isnan(lb)) return !std::isnan(la) && std::isnan(lb);
    return la < lb;
  });
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %6s %14s %12s %10s %10s %6s\n", "method", "K",
                "mean_loss", "stderr", "mean_acc", "stderr", "seeds");
  out.table = line;
  for (std::size_t i : order) {
    const auto& r = reports[i];
    std::size_t ok = 0;
    for (const auto& s : r.per_seed) ok += s.ok ? 1 : 0;
    std::snprintf(line, sizeof line, "%-16s %6zu %14.6g %12.4g %10.4f %10.4f %3zu/%-2zu\n",
                  r.method.c_str(), r.K, r.mean_loss, r.stderr_loss, r.mean_acc, r.stderr_acc,
                  ok, r.per_seed.size());
    out.table += line;
  }
  return out;
}

}  // namespace sewa
