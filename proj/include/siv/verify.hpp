#pragma once

#include <functional>
#include <string>
#include <vector>

namespace siv {

/// One analytic self-check: the measured quantity and the limit it must
/// respect.
struct CheckResult {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool passed = false;
};

/// Checks against closed-form solutions: Taylor-Green energy decay, scalar
/// mode decay, second-order time stepping, adjoint gradient, transport by
/// characteristics and velocity recovery. Takes well under a minute.
std::vector<CheckResult> run_analytic_suite(const std::function<void(const CheckResult&)>& on_result = {});

}  // namespace siv
