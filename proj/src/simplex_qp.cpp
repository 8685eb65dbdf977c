#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "wproj/error.hpp"
#include "wproj/projection.hpp"

namespace wproj {

namespace {

using Eigen::MatrixXd;

/// Minimiser of y' G y over {y : sum(y) = 1, y_i = 0 off `face`}.
Vector affine_minimiser(const MatrixXd& g, const std::vector<Index>& face) {
  const auto m = static_cast<Index>(face.size());
  if (m == 1) return Vector::Ones(1);
  MatrixXd kkt = MatrixXd::Zero(m + 1, m + 1);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) kkt(a, b) = g(face[a], face[b]);
    kkt(a, m) = 1.0;
    kkt(m, a) = 1.0;
  }
  Vector rhs = Vector::Zero(m + 1);
  rhs[m] = 1.0;
  // The system is consistent for PSD g; the orthogonal decomposition
  // returns the minimum-norm solution when the face is flat.
  const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  return sol.head(m);
}

std::vector<Index> active_indices(const std::vector<char>& active) {
  std::vector<Index> out;
  for (std::size_t j = 0; j < active.size(); ++j) {
    if (active[j]) out.push_back(static_cast<Index>(j));
  }
  return out;
}

/// Wolfe minor cycles: move toward the face minimiser, dropping vertices
/// whose weight reaches zero, until the minimiser is feasible.
void corrective_phase(const MatrixXd& g, std::vector<char>& active, Vector& lambda) {
  constexpr double kNegligible = 1e-15;
  for (std::size_t guard = 0; guard <= active.size(); ++guard) {
    const std::vector<Index> face = active_indices(active);
    const Vector y = affine_minimiser(g, face);
    bool feasible = true;
    for (Index a = 0; a < y.size(); ++a) feasible = feasible && y[a] >= -kNegligible;
    if (feasible) {
      lambda.setZero();
      double total = 0.0;
      for (Index a = 0; a < y.size(); ++a) total += std::max(y[a], 0.0);
      for (Index a = 0; a < y.size(); ++a) lambda[face[a]] = std::max(y[a], 0.0) / total;
      for (Index a = 0; a < y.size(); ++a) {
        if (lambda[face[a]] == 0.0) active[face[a]] = 0;
      }
      return;
    }
    double theta = 1.0;
    Index blocking = -1;
    for (Index a = 0; a < y.size(); ++a) {
      const double cur = lambda[face[a]];
      if (y[a] < -kNegligible) {
        const double ratio = cur / (cur - y[a]);
        if (ratio < theta) {
          theta = ratio;
          blocking = face[a];
        }
      }
    }
    for (Index a = 0; a < y.size(); ++a) {
      lambda[face[a]] += theta * (y[a] - lambda[face[a]]);
    }
    if (blocking >= 0) lambda[blocking] = 0.0;
    double total = 0.0;
    for (Index a = 0; a < y.size(); ++a) {
      if (lambda[face[a]] <= kNegligible) {
        lambda[face[a]] = 0.0;
        active[face[a]] = 0;
      }
      total += lambda[face[a]];
    }
    lambda /= total;
  }
}

/// Plain Frank-Wolfe line step toward vertex k (exact for a quadratic).
void line_step(const MatrixXd& g, Index k, Vector& lambda, std::vector<char>& active) {
  const Vector grad = g * lambda;
  const double obj = lambda.dot(grad);
  const double curvature = g(k, k) - 2.0 * grad[k] + obj;
  double gamma = 1.0;
  if (curvature > 0.0) gamma = std::clamp((obj - grad[k]) / curvature, 0.0, 1.0);
  lambda *= (1.0 - gamma);
  lambda[k] += gamma;
  active[static_cast<std::size_t>(k)] = 1;
  for (Index j = 0; j < lambda.size(); ++j) {
    if (lambda[j] == 0.0) active[static_cast<std::size_t>(j)] = 0;
  }
}

bool optimal_face_is_flat(const MatrixXd& g, const Vector& lambda, double face_tol, double curvature_tol) {
  const Vector grad = g * lambda;
  const double obj = lambda.dot(grad);
  std::vector<Index> face;
  for (Index j = 0; j < g.rows(); ++j) {
    if (grad[j] <= obj + face_tol) face.push_back(j);
  }
  const auto m = static_cast<Index>(face.size());
  if (m <= 1) return false;
  // Basis of {d : sum d = 0} on the face: e_a - e_0.
  MatrixXd basis = MatrixXd::Zero(m, m - 1);
  for (Index a = 1; a < m; ++a) {
    basis(0, a - 1) = -1.0;
    basis(a, a - 1) = 1.0;
  }
  MatrixXd sub(m, m);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) sub(a, b) = g(face[a], face[b]);
  }
  // Orthonormalise so eigenvalues are curvatures along unit directions.
  const MatrixXd q = basis.householderQr().householderQ() * MatrixXd::Identity(m, m - 1);
  const MatrixXd reduced = q.transpose() * sub * q;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(reduced);
  return eig.eigenvalues().minCoeff() <= curvature_tol;
}

}  // namespace

QpResult solve_simplex_qp(const GramSystem& gram, const QpOptions& options) {
  const MatrixXd& g = gram.matrix;
  const Index count = g.rows();
  if (count == 0 || g.cols() != count) throw Error(ErrorCode::DimensionMismatch, "Gram matrix must be square");
  if (!g.allFinite()) throw Error(ErrorCode::NonFinite, "Gram matrix has NaN or Inf");

  QpResult result;
  result.lambda = Vector::Constant(count, 1.0 / static_cast<double>(count));
  const double trace = std::max(g.trace(), 0.0);
  const double tol = options.relative_tol * trace;
  std::vector<char> active(static_cast<std::size_t>(count), 1);

  for (long it = 0; it < options.max_iter; ++it) {
    result.iterations = it + 1;
    corrective_phase(g, active, result.lambda);
    const Vector grad = g * result.lambda;
    const double obj = result.lambda.dot(grad);
    Index best = 0;
    for (Index j = 1; j < count; ++j) {
      if (grad[j] < grad[best]) best = j;
    }
    result.objective = obj;
    result.kkt_gap = std::max(obj - grad[best], 0.0);
    if (obj - grad[best] <= tol) {
      result.converged = true;
      break;
    }
    if (active[static_cast<std::size_t>(best)]) {
      // Face solve was inexact; fall back to a plain step.
      line_step(g, best, result.lambda, active);
    } else {
      active[static_cast<std::size_t>(best)] = 1;
      Vector before = result.lambda;
      std::vector<char> active_before = active;
      corrective_phase(g, active, result.lambda);
      if (!active[static_cast<std::size_t>(best)]) {
        result.lambda = before;
        active = active_before;
        line_step(g, best, result.lambda, active);
      }
    }
  }
  if (!result.converged) {
    const Vector grad = g * result.lambda;
    result.objective = result.lambda.dot(grad);
    result.kkt_gap = std::max(result.objective - grad.minCoeff(), 0.0);
    result.converged = result.kkt_gap <= tol;
  }
  result.unique = count == 1 || !optimal_face_is_flat(g, result.lambda, std::max(tol, 1e-12 * trace),
                                                      options.uniqueness_rel_tol * trace);
  if (trace == 0.0) result.unique = count == 1;
  return result;
}

}  // namespace wproj
