#pragma once

// Central finite-difference verification of analytic gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lflane::nn {

struct grad_probe {
  std::string name;
  std::span<double> values;           // perturbed in place, restored afterwards
  std::span<const double> analytic;   // dL/dvalues computed by the backward pass
};

struct grad_check_entry {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0;
  double max_abs_error = 0;
};

struct grad_check_report {
  std::vector<grad_check_entry> entries;

  double max_rel_error() const {
    double m = 0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// entries whose true gradient is ~0 from reporting pure round-off as error.
inline constexpr double grad_check_floor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), grad_check_floor});
}

// Never throws on mismatch: the report carries the errors.
inline grad_check_report grad_check(const std::function<double()>& loss, const std::vector<grad_probe>& probes,
                                    double h = 1e-5) {
  grad_check_report report;
  for (const auto& probe : probes) {
    grad_check_entry e{probe.name, probe.values.size(), 0, 0};
    for (std::size_t i = 0; i < probe.values.size(); ++i) {
      const double saved = probe.values[i];
      probe.values[i] = saved + h;
      const double up = loss();
      probe.values[i] = saved - h;
      const double down = loss();
      probe.values[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = probe.analytic[i];
      e.max_abs_error = std::max(e.max_abs_error, std::abs(a - numeric));
      double rel = relative_error(a, numeric);
      if (!std::isfinite(rel)) rel = INFINITY;
      e.max_rel_error = std::max(e.max_rel_error, rel);
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace lflane::nn
