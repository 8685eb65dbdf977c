#include "wproj/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "wproj/error.hpp"

namespace wproj {

GaussianSampler::GaussianSampler(Eigen::RowVectorXd mean, const CovarianceSpec& cov) : mean_(std::move(mean)) {
  const Index d = mean_.size();
  if (d < 1) throw Error(ErrorCode::Config, "dimension must be at least 1");
  z_.resize(d);
  if (cov.matrix) {
    const Eigen::MatrixXd& m = *cov.matrix;
    if (m.rows() != d || m.cols() != d) throw Error(ErrorCode::DimensionMismatch, "covariance matrix shape");
    if (!m.isApprox(m.transpose(), 1e-12)) throw Error(ErrorCode::NonPSDCovariance, "covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::NonPSDCovariance, "Cholesky factorisation failed");
    }
    compound_ = false;
    factor_ = llt.matrixL();
    return;
  }
  // Eigenvalues of (v - c) I + c 11': v - c (d - 1 times) and v + (d - 1) c.
  const double small = cov.variance - cov.covariance;
  const double large = cov.variance + static_cast<double>(d - 1) * cov.covariance;
  if (small < 0.0 || large < 0.0 || !std::isfinite(small) || !std::isfinite(large)) {
    throw Error(ErrorCode::NonPSDCovariance, "compound-symmetric covariance has eigenvalues " +
                                                 std::to_string(small) + " and " + std::to_string(large));
  }
  diag_scale_ = std::sqrt(small);
  alpha_ = (std::sqrt(large) - diag_scale_) / static_cast<double>(d);
}

void GaussianSampler::draw(Rng& rng, Eigen::Ref<Eigen::RowVectorXd> row) const {
  const Index d = dim();
  for (Index k = 0; k < d; ++k) z_[k] = rng.normal();
  if (compound_) {
    const double shared = alpha_ * z_.sum();
    for (Index k = 0; k < d; ++k) row[k] = mean_[k] + diag_scale_ * z_[k] + shared;
  } else {
    row = mean_ + (factor_ * z_.transpose()).transpose();
  }
}

Matrix GaussianSampler::sample(Rng& rng, Index n) const {
  Matrix out(n, dim());
  Eigen::RowVectorXd row(dim());
  for (Index i = 0; i < n; ++i) {
    draw(rng, row);
    out.row(i) = row;
  }
  return out;
}

namespace {

GaussianSampler sampler_for(double mean, Index d, const CovarianceSpec& cov) {
  return GaussianSampler(Eigen::RowVectorXd::Constant(d, mean), cov);
}

/// Exact component counts by largest remainder, then a Fisher-Yates shuffle.
std::vector<std::size_t> stratified_labels(const std::vector<double>& coef, Index n, Rng& rng) {
  const std::size_t k = coef.size();
  std::vector<Index> counts(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  Index assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = coef[c] * static_cast<double>(n);
    counts[c] = static_cast<Index>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  // Larger remainder first; ties go to the lower component index.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& lhs, const auto& rhs) { return lhs.first > rhs.first; });
  for (std::size_t q = 0; assigned < n; ++q, ++assigned) ++counts[remainders[q % k].second];
  std::vector<std::size_t> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), static_cast<std::size_t>(counts[c]), c);
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::swap(labels[i - 1], labels[static_cast<std::size_t>(rng.below(i))]);
  }
  return labels;
}

}  // namespace

ScenarioSamples sample_gaussian(const GaussianScenario& scenario) {
  if (scenario.means.size() < 2) throw Error(ErrorCode::Config, "need a target mean and at least one control");
  if (scenario.n < 1) throw Error(ErrorCode::Config, "n must be positive");
  ScenarioSamples out;
  for (std::size_t r = 0; r < scenario.means.size(); ++r) {
    const GaussianSampler sampler = sampler_for(scenario.means[r], scenario.dim, scenario.cov);
    Rng rng = Rng::stream(scenario.seed, r);
    Matrix x = sampler.sample(rng, scenario.n);
    if (r == 0) {
      out.target = std::move(x);
    } else {
      out.controls.push_back(std::move(x));
    }
  }
  return out;
}

ScenarioSamples sample_mixture(const MixtureScenario& scenario) {
  const std::size_t components = scenario.component_means.size();
  if (scenario.coefficients.size() < 2) throw Error(ErrorCode::Config, "need a target mixture and a control");
  if (scenario.n < 1) throw Error(ErrorCode::Config, "n must be positive");
  std::vector<GaussianSampler> samplers;
  for (double m : scenario.component_means) samplers.push_back(sampler_for(m, scenario.dim, scenario.cov));
  ScenarioSamples out;
  Eigen::RowVectorXd row(scenario.dim);
  for (std::size_t r = 0; r < scenario.coefficients.size(); ++r) {
    const auto& coef = scenario.coefficients[r];
    if (coef.size() != components) throw Error(ErrorCode::Config, "mixture row has the wrong length");
    double total = 0.0;
    for (double c : coef) {
      if (c < 0.0) throw Error(ErrorCode::Config, "mixture coefficients must be nonnegative");
      total += c;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::Config, "mixture coefficients must sum to 1");
    Rng rng = Rng::stream(scenario.seed, r);
    std::vector<std::size_t> labels;
    if (scenario.labels == LabelSampling::Stratified) labels = stratified_labels(coef, scenario.n, rng);
    Matrix x(scenario.n, scenario.dim);
    for (Index i = 0; i < scenario.n; ++i) {
      std::size_t k = 0;
      if (scenario.labels == LabelSampling::Stratified) {
        k = labels[static_cast<std::size_t>(i)];
      } else {
        const double u = rng.uniform();
        double cumulative = coef[0];
        while (u >= cumulative && k + 1 < components) cumulative += coef[++k];
        while (coef[k] == 0.0 && k > 0) --k;  // u landed on the boundary of an empty tail
      }
      samplers[k].draw(rng, row);
      x.row(i) = row;
    }
    if (r == 0) {
      out.target = std::move(x);
    } else {
      out.controls.push_back(std::move(x));
    }
  }
  return out;
}

}  // namespace wproj
