#include "ccmia/eavesdrop.hpp"

#include <cmath>
#include <limits>

#include "ccmia/rng.hpp"

namespace ccmia {

const char* to_string(ProxyRule r) {
  return r == ProxyRule::zero_order_hold ? "zero_order_hold" : "skip";
}

ProxyRule proxy_rule_from_string(const std::string& s) {
  if (s == "zero_order_hold") return ProxyRule::zero_order_hold;
  if (s == "skip") return ProxyRule::skip;
  throw ConfigError("unknown proxy rule: " + s);
}

TapTrace tap(const std::vector<RoundRecord>& records, const TapConfig& cfg) {
  if (records.empty()) throw Error("tap: no records");
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw ConfigError("tap: gamma in [0,1]");

  TapTrace trace;
  trace.rounds = static_cast<int>(records.size());
  trace.clients = static_cast<int>(records[0].uploads.size());
  trace.cells.assign(trace.rounds, std::vector<TapCell>(trace.clients));

  std::vector<std::optional<Gradients>> held(trace.clients);
  if (cfg.proxy_rule == ProxyRule::zero_order_hold) {
    // zeros until the first interception
    for (auto& h : held) {
      Gradients z = records[0].uploads[0];
      scale(z, 0.0);
      h = z;
    }
  }

  for (int t = 0; t < trace.rounds; ++t) {
    for (int k = 0; k < trace.clients; ++k) {
      TapCell& cell = trace.cells[t][k];
      cell.selected = records[t].selected.empty() ? true : records[t].selected[k] != 0;
      Rng rng(sub_seed(cfg.seed, "tap", static_cast<std::uint64_t>(t),
                       static_cast<std::uint64_t>(k)));
      cell.intercepted = rng.uniform01() < cfg.gamma;
      if (cell.intercepted) {
        cell.estimate = records[t].uploads[k];
        if (cfg.proxy_rule == ProxyRule::zero_order_hold)
          held[k] = records[t].uploads[k];
      } else if (cfg.proxy_rule == ProxyRule::zero_order_hold) {
        cell.estimate = held[k];
      }
    }
  }
  return trace;
}

double cell_estimation_error(const TapCell& cell, const Gradients& truth) {
  if (cell.intercepted) return 0.0;
  if (!cell.estimate) return std::numeric_limits<double>::quiet_NaN();
  Gradients diff = truth;
  axpy(diff, -1.0, *cell.estimate);
  return squared_norm(diff);
}

std::vector<double> estimation_error(const TapTrace& trace,
                                     const std::vector<RoundRecord>& records) {
  std::vector<double> out(trace.rounds, std::numeric_limits<double>::quiet_NaN());
  for (int t = 0; t < trace.rounds; ++t) {
    double sum = 0.0;
    bool any = false;
    for (int k = 0; k < trace.clients; ++k) {
      double e = cell_estimation_error(trace.cells[t][k], records[t].uploads[k]);
      if (!std::isnan(e)) {
        sum += e;
        any = true;
      }
    }
    if (any) out[t] = sum;
  }
  return out;
}

}  // namespace ccmia
