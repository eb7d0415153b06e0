#include "critr/gee.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "critr/error.hpp"
#include "critr/glm.hpp"

namespace critr {

namespace {

// Coefficients of V⁻¹ = scale (I − shrink J) for a block of size m.
struct BlockInverse {
  double scale;
  double shrink;
};

BlockInverse block_inverse(const WorkingCorrelation& corr, Eigen::Index m) {
  const double rho = corr.kind == CorrelationKind::independence ? 0.0 : corr.rho;
  return {1.0 / (corr.sigma2 * (1.0 - rho)), rho / (1.0 + static_cast<double>(m - 1) * rho)};
}

}  // namespace

CorrelationKind parse_correlation_kind(std::string_view name) {
  if (name == "exchangeable") return CorrelationKind::exchangeable;
  if (name == "independence") return CorrelationKind::independence;
  throw std::invalid_argument("unknown correlation '" + std::string(name) +
                              "' (exchangeable|independence)");
}

const char* to_string(CorrelationKind kind) {
  return kind == CorrelationKind::exchangeable ? "exchangeable" : "independence";
}

ClusteredProblem::ClusteredProblem(const Matrix& Xb, const Matrix& Xpsi, std::span<const int> a,
                                   const Vector& y, const Vector& w, std::span<const int> clusters)
    : beta_size_(Xb.cols()) {
  const Eigen::Index n = Xb.rows();
  if (Xpsi.rows() != n || y.size() != n || w.size() != n ||
      static_cast<Eigen::Index>(a.size()) != n || static_cast<Eigen::Index>(clusters.size()) != n) {
    throw std::invalid_argument("ClusteredProblem: inconsistent row counts");
  }
  std::vector<int> order_of_clusters;
  std::unordered_map<int, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(w[i] > 0.0)) continue;
    if (!std::isfinite(w[i]) || !std::isfinite(y[i])) {
      throw std::invalid_argument("ClusteredProblem: non-finite weight or response at row " +
                                  std::to_string(i + 1));
    }
    auto [it, inserted] = members.try_emplace(clusters[static_cast<std::size_t>(i)]);
    if (inserted) order_of_clusters.push_back(it->first);
    it->second.push_back(i);
  }
  Eigen::Index m = 0;
  for (const auto& [c, rows] : members) m += static_cast<Eigen::Index>(rows.size());
  const Eigen::Index p = Xb.cols() + Xpsi.cols();
  D_.resize(m, p);
  y_.resize(m);
  w_.resize(m);
  offsets_.assign(1, 0);
  Eigen::Index r = 0;
  for (const int c : order_of_clusters) {
    for (const Eigen::Index i : members[c]) {
      D_.row(r).head(Xb.cols()) = Xb.row(i);
      D_.row(r).tail(Xpsi.cols()) = static_cast<double>(a[static_cast<std::size_t>(i)]) * Xpsi.row(i);
      y_[r] = y[i];
      w_[r] = w[i];
      ++r;
    }
    offsets_.push_back(r);
  }
}

Vector GeeFit::theta() const {
  Vector t(beta.size() + psi.size());
  t << beta, psi;
  return t;
}

Vector exchangeable_solve(double rho, double sigma2, const Vector& v) {
  const auto inv = block_inverse({CorrelationKind::exchangeable, rho, sigma2}, v.size());
  return inv.scale * (v - Vector::Constant(v.size(), inv.shrink * v.sum()));
}

NormalEquations normal_equations(const ClusteredProblem& problem, const WorkingCorrelation& corr) {
  const Eigen::Index p = problem.params();
  const Matrix& D = problem.design();
  const Vector& y = problem.response();
  const Vector& w = problem.weights();
  NormalEquations ne{Matrix::Zero(p, p), Vector::Zero(p)};
  const auto& off = problem.offsets();
  for (std::size_t b = 0; b + 1 < off.size(); ++b) {
    const Eigen::Index start = off[b], m = off[b + 1] - off[b];
    const auto Db = D.middleRows(start, m);
    const auto wb = w.segment(start, m);
    const Matrix WD = wb.asDiagonal() * Db;
    const Vector Wy = wb.cwiseProduct(y.segment(start, m));
    const auto inv = block_inverse(corr, m);
    // D'V⁻¹M = scale (D'M − shrink colsum(D)' colsum(M)).
    const Vector dsum = Db.colwise().sum().transpose();
    Matrix blk = Db.transpose() * WD;
    Vector rhs = Db.transpose() * Wy;
    if (inv.shrink != 0.0) {
      blk.noalias() -= inv.shrink * dsum * WD.colwise().sum();
      rhs -= inv.shrink * Wy.sum() * dsum;
    }
    ne.lhs += inv.scale * blk;
    ne.rhs += inv.scale * rhs;
  }
  return ne;
}

Vector gls_step(const ClusteredProblem& problem, const WorkingCorrelation& corr) {
  if (problem.rows() < problem.params()) {
    throw DegenerateSampleError("weighted GEE: " + std::to_string(problem.rows()) +
                                " positive-weight rows for " + std::to_string(problem.params()) +
                                " parameters");
  }
  const auto ne = normal_equations(problem, corr);
  const double rc = reciprocal_condition(ne.lhs);
  if (!(rc > 1e-13)) throw SingularSystemError("weighted GEE normal equations are singular", rc);
  return Eigen::PartialPivLU<Matrix>(ne.lhs).solve(ne.rhs);
}

WorkingCorrelation moment_update(const ClusteredProblem& problem, const Vector& residuals,
                                 CorrelationKind kind) {
  const Eigen::Index m = problem.rows();
  const auto p = static_cast<double>(problem.params());
  if (static_cast<double>(m) <= p) {
    throw DegenerateSampleError("moment update: " + std::to_string(m) +
                                " positive-weight rows for " + std::to_string(problem.params()) +
                                " parameters");
  }
  // Weights are rescaled to mean one so the estimates do not depend on the
  // overall weight scale.
  const Vector w = problem.weights() * (static_cast<double>(m) / problem.weights().sum());
  WorkingCorrelation corr{kind, 0.0, 1.0};
  corr.sigma2 = w.dot(residuals.cwiseProduct(residuals)) / (static_cast<double>(m) - p);
  if (!(corr.sigma2 > 0.0)) corr.sigma2 = 1e-12;
  if (kind == CorrelationKind::independence) return corr;

  double cross = 0.0, pairs = 0.0;
  const auto& off = problem.offsets();
  for (std::size_t b = 0; b + 1 < off.size(); ++b) {
    const Eigen::Index start = off[b], size = off[b + 1] - off[b];
    if (size < 2) continue;
    // Σ_{j≠l} s_j s_l = (Σ s)² − Σ s².
    const Vector sw = w.segment(start, size).cwiseSqrt();
    const Vector se = sw.cwiseProduct(residuals.segment(start, size));
    cross += se.sum() * se.sum() - se.squaredNorm();
    pairs += sw.sum() * sw.sum() - sw.squaredNorm();
  }
  const double denom = pairs - p;
  corr.rho = denom > 0.0 ? std::clamp(cross / corr.sigma2 / denom, 0.0, kMaxRho) : 0.0;
  return corr;
}

Matrix sandwich_covariance(const ClusteredProblem& problem, const WorkingCorrelation& corr,
                           const Vector& theta) {
  const Eigen::Index p = problem.params();
  const Matrix& D = problem.design();
  const Vector e = problem.response() - D * theta;
  const Vector& w = problem.weights();
  Matrix meat = Matrix::Zero(p, p);
  const auto& off = problem.offsets();
  for (std::size_t b = 0; b + 1 < off.size(); ++b) {
    const Eigen::Index start = off[b], m = off[b + 1] - off[b];
    const auto Db = D.middleRows(start, m);
    const Vector We = w.segment(start, m).cwiseProduct(e.segment(start, m));
    const auto inv = block_inverse(corr, m);
    const Vector u = inv.scale * (Db.transpose() * We - inv.shrink * We.sum() * Db.colwise().sum().transpose());
    meat.noalias() += u * u.transpose();
  }
  const auto ne = normal_equations(problem, corr);
  const double rc = reciprocal_condition(ne.lhs);
  if (!(rc > 1e-13)) throw SingularSystemError("sandwich: bread matrix is singular", rc);
  const Matrix inv_a = Eigen::PartialPivLU<Matrix>(ne.lhs).inverse();
  Matrix cov = inv_a * meat * inv_a.transpose();
  return 0.5 * (cov + cov.transpose());
}

GeeFit fit_weighted_gee(const ClusteredProblem& problem, const GeeOptions& options) {
  GeeFit fit;
  fit.n_effective = static_cast<std::size_t>(problem.rows());
  fit.clusters = problem.block_count();
  const Vector& y = problem.response();
  const Matrix& D = problem.design();

  WorkingCorrelation corr{CorrelationKind::independence, 0.0, 1.0};
  Vector theta = gls_step(problem, corr);
  fit.iterations = 1;

  if (options.correlation == CorrelationKind::independence) {
    corr = moment_update(problem, y - D * theta, CorrelationKind::independence);
    fit.converged = true;
  } else if (options.one_step) {
    corr = moment_update(problem, y - D * theta, CorrelationKind::exchangeable);
    theta = gls_step(problem, corr);
    fit.converged = true;
  } else {
    for (int t = 1; t <= options.max_alternations; ++t) {
      fit.iterations = t;
      corr = moment_update(problem, y - D * theta, CorrelationKind::exchangeable);
      const Vector next = gls_step(problem, corr);
      const double change =
          (next - theta).cwiseAbs().maxCoeff() / std::max(1.0, theta.cwiseAbs().maxCoeff());
      theta = next;
      if (change < options.tolerance) {
        fit.converged = true;
        break;
      }
    }
    if (!fit.converged) {
      fit.warning = "weighted GEE did not converge in " + std::to_string(options.max_alternations) +
                    " alternations";
    }
  }

  fit.corr = corr;
  fit.beta = theta.head(problem.beta_size());
  fit.psi = theta.tail(problem.params() - problem.beta_size());
  const auto ne = normal_equations(problem, corr);
  fit.equation_residual = (ne.rhs - ne.lhs * theta).norm();
  fit.equation_scale = ne.rhs.norm();
  if (options.sandwich) fit.sandwich_cov = sandwich_covariance(problem, corr, theta);
  return fit;
}

GeeFit fit_weighted_gee(const Matrix& Xb, const Matrix& Xpsi, std::span<const int> a, const Vector& y,
                        const Vector& w, std::span<const int> clusters, const GeeOptions& options) {
  return fit_weighted_gee(ClusteredProblem(Xb, Xpsi, a, y, w, clusters), options);
}

}  // namespace critr
