#pragma once

// Trajectory error metrics.
//
//   ATE  |t_gt - t_est|                                   (trajectory units)
//   CE   mean over (rx, ry, rz) of 1 - cos(angle_gt - angle_est)
//   DE   angle between the rotated camera x axes          (degrees)
//   RTE  |trans(rel_gt^-1 rel_est)|                       (trajectory units)
//   ROT  acos((tr(rot(rel_gt^-1 rel_est)) - 1) / 2)       (degrees)
//
// ROT is the geodesic angle. The formula the metric is usually quoted with
// drops the acos, which would report 57.3 for a perfect estimate; the acos is
// kept here.

#include <iosfwd>
#include <span>
#include <vector>

#include "endotrack/se3.hpp"
#include "endotrack/tracker.hpp"

namespace endotrack {

double ate(const Posed& gt, const Posed& est);
double ce(const Posed& gt, const Posed& est);
double de(const Posed& gt, const Posed& est);
double rte(const Posed& gt_rel, const Posed& est_rel);
double rot(const Posed& gt_rel, const Posed& est_rel);

/// Wraps an angle difference into (-pi, pi].
double wrap_angle(double a);

/// Throws UnitMismatch when the two tags differ.
void require_same_unit(LengthUnit a, LengthUnit b);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

MetricSummary summarize(std::span<const double> values);

struct MetricReport {
  LengthUnit unit = LengthUnit::Millimetre;
  int stride = kDefaultStride;
  std::vector<long> frame_indices;
  std::vector<double> ate, ce, de;  // one per frame
  std::vector<double> rte, rot;     // one per consecutive pair, frames 1..n-1
  MetricSummary ate_summary, ce_summary, de_summary, rte_summary, rot_summary;
};

/// Throws UnitMismatch on differing units and AlignmentError on differing
/// strides or frame indices.
MetricReport evaluate(const Trajectory& gt, const Trajectory& est);

/// Per-frame table followed by a mean±std summary block.
void write_report(std::ostream& os, const MetricReport& report);

}  // namespace endotrack
