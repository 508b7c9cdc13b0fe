#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "yinyang/errors.hpp"
#include "yinyang/orchestrator.hpp"
#include "yinyang/score.hpp"

namespace yinyang {

// exp of the Shannon entropy of the eigenvalues of K / n. Eigenvalues in
// [-1e-9, 0) are clamped to 0; anything below -1e-6 is rejected.
template <typename Derived>
typename Derived::Scalar vendi_score(const Eigen::MatrixBase<Derived>& kernel) {
  using Scalar = typename Derived::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (kernel.rows() == 0 || kernel.rows() != kernel.cols()) throw DataError("vendi score needs a nonempty square matrix");
  const auto n = static_cast<Scalar>(kernel.rows());
  const Dense symmetric = (kernel + kernel.transpose()) / (Scalar(2) * n);
  Eigen::SelfAdjointEigenSolver<Dense> solver(symmetric, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw DataError("eigendecomposition failed");
  Scalar entropy = 0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    Scalar lambda = solver.eigenvalues()(i);
    if (lambda < Scalar(-1e-6)) throw DataError("similarity matrix has a negative eigenvalue; not a kernel");
    if (lambda <= Scalar(0)) continue;  // 0 ln 0 = 0, small negatives clamp to 0
    entropy -= lambda * std::log(lambda);
  }
  return std::exp(entropy);
}

double sd_score(const PairModel& sd, std::span<const Phrase> phrases);
// score(P_1, P_i) for i = 2..N.
std::vector<double> sd_pair_scores(const PairModel& sd, std::span<const Phrase> phrases);

// Cosine similarities of embed(P_1, P_i), i = 2..N; symmetrized, unit diagonal.
Eigen::MatrixXd build_similarity_matrix(const PairModel& sd, std::span<const Phrase> phrases);

struct PitchMetrics {
  double pitch_range = 0;
  double unique_pitches = 0;
};

PitchMetrics pitch_metrics(std::span<const Phrase> phrases);

struct PairDetail {
  std::size_t phrase_index = 0;  // i of the pair (P_1, P_i), zero-based
  double sd_probability = 0;
  int pitch_range = 0;
  int unique_pitches = 0;
};

struct MetricsReport {
  std::string name;
  double sd = 0;
  double vendi = 0;
  double pitch_range = 0;
  double unique_pitches = 0;
  std::vector<PairDetail> pairs;

  nlohmann::json to_json() const;
};

MetricsReport evaluate_piece(const PairModel& sd, std::span<const Phrase> phrases, std::string name = "piece");

// Unweighted mean of the four headline metrics; pair rows are not merged.
MetricsReport aggregate(std::span<const MetricsReport> reports, std::string name = "mean");

// Plain-text table with columns "SD  V  PR  UP", one row per report.
std::string metrics_table(std::span<const MetricsReport> reports);

}  // namespace yinyang
