#pragma once

#include <optional>
#include <vector>

#include "ccmia/federation.hpp"

namespace ccmia {

enum class ProxyRule { zero_order_hold, skip };

const char* to_string(ProxyRule r);
ProxyRule proxy_rule_from_string(const std::string& s);

struct TapConfig {
  double gamma = 1.0;  // per-cell interception probability
  std::uint64_t seed = 0;
  ProxyRule proxy_rule = ProxyRule::zero_order_hold;
};

struct TapCell {
  bool intercepted = false;
  bool selected = true;
  std::optional<Gradients> estimate;  // true gradient when intercepted
};

struct TapTrace {
  int rounds = 0;
  int clients = 0;
  std::vector<std::vector<TapCell>> cells;  // [round][client]
};

// Bernoulli(gamma) interception per (round, client) cell, independent draws
// (one substream per cell). Missed cells fall back to the proxy rule:
// zero_order_hold repeats the client's last intercepted gradient (zeros
// before the first hit); skip leaves the estimate absent.
TapTrace tap(const std::vector<RoundRecord>& records, const TapConfig& cfg);

// Per-round squared Frobenius error sum ||x_c - x_a||^2 over cells with an
// estimate; exactly 0 on intercepted cells. Rounds where every cell lacks an
// estimate yield NaN.
std::vector<double> estimation_error(const TapTrace& trace,
                                     const std::vector<RoundRecord>& records);

// Per-cell error for reporting; NaN where no estimate exists.
double cell_estimation_error(const TapCell& cell, const Gradients& truth);

}  // namespace ccmia
