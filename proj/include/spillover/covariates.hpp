#pragma once

#include <spillover/common.hpp>
#include <spillover/ingest.hpp>

#include <cmath>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spillover::covariates {

inline constexpr int kHmiDays = 28;

template <typename S>
struct MinMaxScaled {
  VectorX<S> values;
  S min = S(0);
  S max = S(0);
  bool constant = false;  // degenerate input, mapped to zeros
};

// (x - min) / (max - min); a constant vector maps to zeros and sets `constant`.
template <typename Derived>
MinMaxScaled<typename Derived::Scalar> min_max_scale(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  if (x.size() == 0) throw InvalidArgument("min-max scaling needs at least one value");
  MinMaxScaled<S> out;
  out.min = x.minCoeff();
  out.max = x.maxCoeff();
  const S range = out.max - out.min;
  if (!(range > S(0))) {
    out.constant = true;
    out.values = VectorX<S>::Zero(x.size());
    return out;
  }
  out.values = (x.derived().array() - out.min) / range;
  // Pin the extremes so idempotence holds bit-for-bit.
  for (Index i = 0; i < x.size(); ++i) {
    if (x(i) == out.min) out.values(i) = S(0);
    if (x(i) == out.max) out.values(i) = S(1);
  }
  return out;
}

// Half the L1 distance between the two groups' distributions over subunits:
// 0.5 * sum |x_i / X - y_i / Y|. Throws InvalidArgument when either total is zero.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar dissimilarity_index(const Eigen::MatrixBase<DerivedA>& focus,
                                              const Eigen::MatrixBase<DerivedB>& reference) {
  using S = typename DerivedA::Scalar;
  if (focus.size() != reference.size()) throw InvalidArgument("group count vectors differ in length");
  if ((focus.array() < S(0)).any() || (reference.array() < S(0)).any()) {
    throw InvalidArgument("group counts must be nonnegative");
  }
  const S total_focus = focus.sum();
  const S total_reference = reference.sum();
  if (!(total_focus > S(0)) || !(total_reference > S(0))) {
    throw InvalidArgument("dissimilarity index needs positive totals in both groups");
  }
  return S(0.5) * (focus.derived().array() / total_focus - reference.derived().array() / total_reference).abs().sum();
}

struct HumanMobilityIndex {
  Vector raw;     // visits per day
  Vector scaled;  // min-max over CBGs
  bool constant = false;
};

// raw_i = visits_i / days, then min-max scaled across CBGs.
HumanMobilityIndex human_mobility_index(const Vector& visits, int days = kHmiDays);

// count / land area, per square mile. Throws InvalidArgument on a nonpositive area.
double density(double count, double land_area_sqmi);

// Stops starting inside the window, counted per CBG they occur in.
std::map<std::string, double> count_visits(std::span<const ingest::StopRecord> stops, DateWindow window);

struct ControlVariables {
  std::string cbg_id;
  double pop = 0.0;  // persons per square mile
  double ms = 0.0;   // minority dissimilarity of the CBG's tract
  double is = 0.0;   // low-income dissimilarity of the CBG's tract
  double hmi = 0.0;  // scaled human mobility index
  double poi = 0.0;  // facilities per square mile
  double rd = 0.0;   // road segments per square mile

  bool operator==(const ControlVariables&) const = default;
};

inline const std::vector<std::string>& control_names() {
  static const std::vector<std::string> names{"pop", "ms", "is", "hmi", "poi", "rd"};
  return names;
}

struct ControlTable {
  std::vector<ControlVariables> rows;  // CBG index order, excluded CBGs omitted
  Diagnostics excluded;
  std::vector<std::string> warnings;
};

// Builds the six controls. Segregation indices are computed per tract over its member CBGs
// (minority = non-Hispanic Black + Asian vs non-Hispanic White; low income = Q1 + Q2 vs Q3 + Q4)
// and assigned to every member.
ControlTable compute_controls(const ingest::CbgIndex& index, std::span<const ingest::CensusRecord> census,
                              std::span<const ingest::CountRecord> poi, std::span<const ingest::CountRecord> roads,
                              const std::map<std::string, double>& visits, int hmi_days = kHmiDays);

void write_controls(std::ostream& out, std::span<const ControlVariables> rows);
std::vector<ControlVariables> read_controls(const csv::Table& table);

}  // namespace spillover::covariates
