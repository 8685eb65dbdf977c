#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ot_checks.hpp"
#include "wproj/error.hpp"
#include "wproj/log.hpp"
#include "wproj/ot.hpp"

namespace wproj {

namespace {

// Scalings beyond this magnitude are folded back into the log potentials.
constexpr double kAbsorbLog = 50.0;
// exp(-230); far below the e^-50 head room of the scalings.
constexpr double kKernelFloor = 1e-100;
constexpr double kAnnealFactor = 0.25;

double median_of(Matrix values) {
  double* begin = values.data();
  double* end = begin + values.size();
  double* mid = begin + values.size() / 2;
  std::nth_element(begin, mid, end);
  double m = *mid;
  if (values.size() % 2 == 0) m = 0.5 * (m + *std::max_element(begin, mid));
  return m;
}

double log_sum_exp(const double* values, Index n, Index stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < n; ++k) mx = std::max(mx, values[k * stride]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (Index k = 0; k < n; ++k) s += std::exp(values[k * stride] - mx);
  return mx + std::log(s);
}

class StabilisedSinkhorn {
 public:
  StabilisedSinkhorn(const Matrix& cost, const Vector& a, const Vector& b)
      : c_(cost), a_(a), b_(b), f_(Vector::Zero(a.size())), g_(Vector::Zero(b.size())) {}

  /// Exact log-domain half steps: f then g. Used when the kernel would
  /// underflow for the current potentials.
  void log_domain_update(double eps) {
    const Index n0 = c_.rows();
    const Index n1 = c_.cols();
    std::vector<double> buf(static_cast<std::size_t>(std::max(n0, n1)));
    for (Index i = 0; i < n0; ++i) {
      for (Index j = 0; j < n1; ++j) buf[j] = (g_[j] - c_(i, j)) / eps;
      f_[i] = eps * std::log(a_[i]) - eps * log_sum_exp(buf.data(), n1, 1);
    }
    for (Index j = 0; j < n1; ++j) {
      for (Index i = 0; i < n0; ++i) buf[i] = (f_[i] - c_(i, j)) / eps;
      g_[j] = eps * std::log(b_[j]) - eps * log_sum_exp(buf.data(), n0, 1);
    }
  }

  void build_kernel(double eps) {
    const Index n0 = c_.rows();
    const Index n1 = c_.cols();
    kernel_.resize(n0, n1);
    const double inv = 1.0 / eps;
    const double floor_exponent = std::log(kKernelFloor);
    for (Index i = 0; i < n0; ++i) {
      auto row = kernel_.row(i).array();
      // Clamping at the floor keeps entries out of the subnormal range, which
      // would slow every matrix-vector product by orders of magnitude. The
      // floor is far below anything that can affect a scaling sum.
      row = ((f_[i] - c_.row(i).array() + g_.transpose().array()) * inv).max(floor_exponent).exp();
    }
    u_ = Vector::Ones(c_.rows());
    v_ = Vector::Ones(c_.cols());
  }

  /// Moves the scalings into the log potentials.
  void fold(double eps) {
    if (u_.size() == 0) return;
    f_.array() += eps * u_.array().log();
    g_.array() += eps * v_.array().log();
    u_.setOnes();
    v_.setOnes();
  }

  void absorb(double eps) {
    ++absorptions_;
    fold(eps);
    build_kernel(eps);
  }

  /// Runs scaling iterations at fixed eps until the row residual drops
  /// below tol (columns are exact after every v update).
  /// Returns false if the kernel degenerated and a log step is needed.
  bool iterate(double eps, double tol, long max_iter, long& used, double& residual) {
    const Index n0 = c_.rows();
    Vector ktu(c_.cols());
    Vector previous_u(n0);
    residual = std::numeric_limits<double>::infinity();
    for (long it = 0; it < max_iter; ++it) {
      // One sweep over the kernel does both half steps: row i yields
      // (K v)_i, hence the new u_i, which is then spread into K' u.
      previous_u = u_;
      ktu.setZero();
      residual = 0.0;
      for (Index i = 0; i < n0; ++i) {
        const double kv = kernel_.row(i).dot(v_.transpose());
        if (!(kv > 0.0) || !std::isfinite(kv)) return false;
        residual = std::max(residual, std::abs(u_[i] * kv - a_[i]));
        u_[i] = a_[i] / kv;
        ktu.noalias() += u_[i] * kernel_.row(i).transpose();
      }
      if (residual <= tol) {
        u_ = previous_u;
        return true;
      }
      if (!(ktu.array() > 0.0).all() || !ktu.allFinite()) return false;
      v_ = b_.cwiseQuotient(ktu);
      ++used;
      const double lu = u_.array().log().abs().maxCoeff();
      const double lv = v_.array().log().abs().maxCoeff();
      if (lu > kAbsorbLog || lv > kAbsorbLog) absorb(eps);
    }
    residual = (u_.cwiseProduct(kernel_ * v_) - a_).cwiseAbs().maxCoeff();
    return true;
  }

  /// Writes the plan diag(u) K diag(v) into the kernel storage and returns it.
  Matrix take_plan() {
    kernel_.array().colwise() *= u_.array();
    kernel_.array().rowwise() *= v_.transpose().array();
    return std::move(kernel_);
  }

 private:
  const Matrix& c_;
  const Vector& a_;
  const Vector& b_;
  Vector f_, g_, u_, v_;
  Matrix kernel_;
  long absorptions_ = 0;

 public:
  long absorptions() const { return absorptions_; }
};

}  // namespace

TransportPlan solve_entropic(const DiscreteMeasure& a, const DiscreteMeasure& b, const EntropicOptions& options) {
  detail::require_same_dim(a, b);
  // Two dense n0 x n1 arrays are live at once.
  detail::require_budget(a, b, options.size_budget / 2);

  // Solve on c~ = |x~ - y~|^2 with each support centred at its own mean.
  // This differs from |x - y|^2 by 2<x~_i, delta> - 2<y~_j, delta> +
  // |delta|^2, which the dual potentials absorb, so the plan is unchanged
  // while the cost range shrinks to the spread of the clouds.
  const Eigen::RowVectorXd mean_a = a.weights().transpose() * a.support();
  const Eigen::RowVectorXd mean_b = b.weights().transpose() * b.support();
  const Matrix xc = a.support().rowwise() - mean_a;
  const Matrix yc = b.support().rowwise() - mean_b;
  const Eigen::RowVectorXd delta = mean_a - mean_b;
  const Vector row_term = 2.0 * (xc * delta.transpose());
  const Vector col_term = -2.0 * (yc * delta.transpose());
  const double shift = delta.squaredNorm();
  Matrix c = -2.0 * xc * yc.transpose();
  c.array().colwise() += xc.rowwise().squaredNorm().array();
  c.array().rowwise() += yc.rowwise().squaredNorm().transpose().array();
  c = c.cwiseMax(0.0);

  double eps = 0.0;
  if (options.epsilon) {
    eps = *options.epsilon;
    if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(ErrorCode::OutOfRange, "epsilon must be positive");
  } else {
    // The default is relative to the original squared distances.
    Matrix raw = c;
    raw.array().colwise() += row_term.array() + shift;
    raw.array().rowwise() += col_term.transpose().array();
    const double mean_cost = raw.mean();
    eps = 0.05 * median_of(std::move(raw));
    if (!(eps > 0.0)) eps = 0.05 * mean_cost;
    if (!(eps > 0.0)) eps = 1.0;  // all costs zero: every coupling is optimal
  }

  std::vector<double> schedule;
  if (options.epsilon_scaling) {
    const double range = c.maxCoeff() - c.minCoeff();
    for (double e = range; e > eps; e *= kAnnealFactor) schedule.push_back(e);
  }
  schedule.push_back(eps);

  StabilisedSinkhorn solver(c, a.weights(), b.weights());
  long used = 0;
  double residual = std::numeric_limits<double>::infinity();
  bool first = true;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double e = schedule[stage];
    const bool last = stage + 1 == schedule.size();
    if (first) {
      // With zero potentials the kernel is exp(-c / e); only a small first
      // epsilon needs the log-domain start to avoid an all-zero row.
      if (c.maxCoeff() > 200.0 * e) solver.log_domain_update(e);
      first = false;
    } else {
      solver.fold(schedule[stage - 1]);
    }
    solver.build_kernel(e);
    // Intermediate stages only need a rough fit before the next anneal step.
    const double stage_tol = last ? options.tol : std::max(options.tol, 1e-3 / static_cast<double>(a.size()));
    const long budget = last ? options.max_iter - used : std::min<long>(options.max_iter - used, 200);
    long stage_used = 0;
    if (!solver.iterate(e, stage_tol, std::max<long>(budget, 0), stage_used, residual)) {
      solver.fold(e);
      solver.log_domain_update(e);
      solver.build_kernel(e);
      if (!solver.iterate(e, stage_tol, std::max<long>(budget - stage_used, 0), stage_used, residual)) {
        throw Error(ErrorCode::Infeasible, "Sinkhorn kernel underflowed after a log-domain reset");
      }
    }
    used += stage_used;
    log_debug("Sinkhorn stage eps=" + std::to_string(e) + ": " + std::to_string(stage_used) +
              " iterations, residual " + std::to_string(residual) + ", " +
              std::to_string(solver.absorptions()) + " absorptions so far");
  }

  TransportPlan plan;
  Matrix coupling = solver.take_plan();
  const Vector rows = coupling.rowwise().sum();
  const Vector cols = coupling.colwise().sum().transpose();
  plan.cost = (coupling.array() * c.array()).sum() + rows.dot(row_term) + cols.dot(col_term) + shift * rows.sum();
  plan.coupling = std::move(coupling);
  plan.method = PlanMethod::Entropic;
  plan.epsilon = eps;
  plan.iterations = used;
  plan.marginal_residual = marginal_residual(plan, a, b);
  plan.converged = plan.marginal_residual <= options.tol;
  if (!plan.converged) {
    log_warning("Sinkhorn stopped after " + std::to_string(used) + " iterations with marginal residual " +
                std::to_string(plan.marginal_residual));
  }
  return plan;
}

}  // namespace wproj
