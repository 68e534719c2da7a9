#pragma once

// Central finite differences and a two-step-size consistency report.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "endotrack/tensor.hpp"

namespace endotrack {

/// (f(x + h e_i) - f(x - h e_i)) / 2h for every element of x.
/// Throws NonFiniteFunction if f is not finite at a probe point.
template <typename Scalar, typename F>
Tensor<Scalar> finite_diff_grad(F&& f, const Tensor<Scalar>& x, Scalar h) {
  if (!(h > Scalar(0))) throw Error(ErrorCode::NonFiniteFunction, "step must be positive");
  Tensor<Scalar> grad(x.shape());
  Tensor<Scalar> probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar xi = x.data()[i];
    probe.data()[i] = xi + h;
    const Scalar fp = f(static_cast<const Tensor<Scalar>&>(probe));
    probe.data()[i] = xi - h;
    const Scalar fm = f(static_cast<const Tensor<Scalar>&>(probe));
    probe.data()[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw Error(ErrorCode::NonFiniteFunction, "function is not finite near element " + std::to_string(i));
    }
    grad.data()[i] = (fp - fm) / (Scalar(2) * h);
  }
  return grad;
}

struct GradCheckEntry {
  std::string name;
  double coarse = 0.0;  // step h
  double fine = 0.0;    // step h / 10
  double rel_error = 0.0;
  bool finite = false;
  bool ok = false;
};

struct GradCheckReport {
  std::string label;
  std::vector<GradCheckEntry> entries;

  bool passed() const {
    if (entries.empty()) return false;
    for (const auto& e : entries) {
      if (!e.ok) return false;
    }
    return true;
  }

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.finite ? e.rel_error : INFINITY);
    return m;
  }
};

struct StepConsistency {
  double step = 1e-4;
  double rtol = 0.05;
  double atol = 1e-8;
};

inline double relative_difference(double a, double b, double atol) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale <= atol) return 0.0;
  return std::abs(a - b) / scale;
}

/// Differentiates f at x with steps h and h/10 and records, per element,
/// whether the two estimates agree.
inline GradCheckReport step_consistency_report(std::string label,
                                               const std::function<double(const Tensor<double>&)>& f,
                                               const Tensor<double>& x,
                                               const std::function<std::string(Index)>& name_of,
                                               const StepConsistency& opt = {}) {
  GradCheckReport report{std::move(label), {}};
  Tensor<double> coarse, fine;
  bool finite = true;
  try {
    coarse = finite_diff_grad(f, x, opt.step);
    fine = finite_diff_grad(f, x, opt.step / 10.0);
    finite = coarse.all_finite() && fine.all_finite();
  } catch (const Error&) {
    finite = false;
  }
  for (Index i = 0; i < x.size(); ++i) {
    GradCheckEntry e;
    e.name = name_of(i);
    e.finite = finite;
    if (finite) {
      e.coarse = coarse.data()[i];
      e.fine = fine.data()[i];
      const double diff = std::abs(e.coarse - e.fine);
      e.rel_error = relative_difference(e.coarse, e.fine, opt.atol);
      e.ok = diff <= opt.atol || diff <= opt.rtol * std::max(std::abs(e.coarse), std::abs(e.fine));
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace endotrack
