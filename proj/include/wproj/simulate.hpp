#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wproj/rng.hpp"
#include "wproj/types.hpp"

namespace wproj {

/// Covariance of the simulated Gaussians: either compound symmetry
/// (variance on the diagonal, covariance off it) or an explicit matrix.
struct CovarianceSpec {
  double variance = 1.0;
  double covariance = 0.8;
  std::optional<Eigen::MatrixXd> matrix;
};

/// x = mean + factor * z with factor * factor' = covariance.
class GaussianSampler {
 public:
  /// Throws NonPSDCovariance when the factorisation fails.
  GaussianSampler(Eigen::RowVectorXd mean, const CovarianceSpec& cov);

  Index dim() const noexcept { return mean_.size(); }
  /// Appends one draw into `row`.
  void draw(Rng& rng, Eigen::Ref<Eigen::RowVectorXd> row) const;
  Matrix sample(Rng& rng, Index n) const;

 private:
  Eigen::RowVectorXd mean_;
  // Compound symmetry uses the closed-form symmetric square root
  // sqrt(v - c) I + alpha 11'; otherwise `factor_` is a Cholesky factor.
  bool compound_ = true;
  double diag_scale_ = 1.0;
  double alpha_ = 0.0;
  Eigen::MatrixXd factor_;
  mutable Eigen::RowVectorXd z_;
};

struct GaussianScenario {
  Index dim = 10;
  /// Scalar means (each mean vector is m * ones); index 0 is the target.
  std::vector<double> means{10.0, 50.0, 200.0, -50.0};
  CovarianceSpec cov;
  Index n = 10000;
  std::uint64_t seed = 0;
};

/// How mixture component labels are drawn: independently per point, or as
/// exact counts (largest-remainder rounding of n * p) in shuffled order.
enum class LabelSampling { Random, Stratified };

struct MixtureScenario {
  Index dim = 20;
  /// Component means as scalars (component k has mean m_k * ones).
  std::vector<double> component_means{10.0, 50.0, 200.0, -50.0};
  /// Row r gives the component probabilities of measure r; row 0 is the target.
  std::vector<std::vector<double>> coefficients{
      {0.3, 0.6, 0.1, 0.0}, {0.8, 0.1, 0.1, 0.0}, {0.0, 0.2, 0.7, 0.1}, {0.2, 0.0, 0.2, 0.6}};
  CovarianceSpec cov;
  Index n = 10000;
  std::uint64_t seed = 0;
  LabelSampling labels = LabelSampling::Random;
};

struct ScenarioSamples {
  Matrix target;
  std::vector<Matrix> controls;
};

/// Measure r is drawn from its own stream, row by row, so a run with a
/// larger n extends the samples of a smaller one with the same seed
/// (stratified mixture labels excepted).
ScenarioSamples sample_gaussian(const GaussianScenario& scenario);
ScenarioSamples sample_mixture(const MixtureScenario& scenario);

}  // namespace wproj
