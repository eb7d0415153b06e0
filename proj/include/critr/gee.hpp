#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "critr/types.hpp"

namespace critr {

enum class CorrelationKind { independence, exchangeable };

CorrelationKind parse_correlation_kind(std::string_view name);
const char* to_string(CorrelationKind kind);

// V_i = sigma2 [(1 - rho) I + rho J]; independence has rho = 0.
struct WorkingCorrelation {
  CorrelationKind kind = CorrelationKind::independence;
  double rho = 0.0;
  double sigma2 = 1.0;
};

inline constexpr double kMaxRho = 0.99;

// Weighted AFT regression data with rows of non-positive weight removed and
// the remaining rows grouped contiguously by cluster (first-appearance order
// of clusters, original row order within a cluster).
class ClusteredProblem {
 public:
  // D = [Xb | a .* Xpsi]; y is log time.
  ClusteredProblem(const Matrix& Xb, const Matrix& Xpsi, std::span<const int> a, const Vector& y,
                   const Vector& w, std::span<const int> clusters);

  [[nodiscard]] Eigen::Index rows() const noexcept { return D_.rows(); }
  [[nodiscard]] Eigen::Index params() const noexcept { return D_.cols(); }
  [[nodiscard]] Eigen::Index beta_size() const noexcept { return beta_size_; }
  [[nodiscard]] const Matrix& design() const noexcept { return D_; }
  [[nodiscard]] const Vector& response() const noexcept { return y_; }
  [[nodiscard]] const Vector& weights() const noexcept { return w_; }
  // Block b spans rows [offsets[b], offsets[b+1]).
  [[nodiscard]] const std::vector<Eigen::Index>& offsets() const noexcept { return offsets_; }
  [[nodiscard]] std::size_t block_count() const noexcept { return offsets_.size() - 1; }

 private:
  Matrix D_;
  Vector y_;
  Vector w_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index beta_size_ = 0;
};

// Σ D'V⁻¹W D and Σ D'V⁻¹W y accumulated cluster by cluster.
struct NormalEquations {
  Matrix lhs;
  Vector rhs;
};
NormalEquations normal_equations(const ClusteredProblem& problem, const WorkingCorrelation& corr);

// One weighted generalized least squares solve for θ = (β, ψ). Throws
// SingularSystemError when the system is numerically singular.
Vector gls_step(const ClusteredProblem& problem, const WorkingCorrelation& corr);

// Method-of-moments update; `residuals` follow the problem's (compacted) row order.
// Throws DegenerateSampleError when there are no more rows than parameters.
WorkingCorrelation moment_update(const ClusteredProblem& problem, const Vector& residuals,
                                 CorrelationKind kind);

// V⁻¹ v for one exchangeable block of size v.size().
Vector exchangeable_solve(double rho, double sigma2, const Vector& v);

struct GeeOptions {
  CorrelationKind correlation = CorrelationKind::exchangeable;
  int max_alternations = 25;
  double tolerance = 1e-6;
  bool one_step = false;
  bool sandwich = false;
};

struct GeeFit {
  Vector beta;
  Vector psi;
  WorkingCorrelation corr;  // the structure used in the final solve
  int iterations = 0;
  bool converged = false;
  std::size_t n_effective = 0;
  std::size_t clusters = 0;
  double equation_residual = 0.0;  // ‖Σ D'V⁻¹W(y − Dθ)‖ at the returned θ
  double equation_scale = 0.0;     // ‖Σ D'V⁻¹W y‖
  std::optional<Matrix> sandwich_cov;
  std::optional<std::string> warning;

  [[nodiscard]] Vector theta() const;
};

GeeFit fit_weighted_gee(const ClusteredProblem& problem, const GeeOptions& options = {});
GeeFit fit_weighted_gee(const Matrix& Xb, const Matrix& Xpsi, std::span<const int> a, const Vector& y,
                        const Vector& w, std::span<const int> clusters, const GeeOptions& options = {});

// A⁻¹ B A⁻ᵀ with A = Σ D'V⁻¹WD and B = Σ (D'V⁻¹W e)(D'V⁻¹W e)'.
Matrix sandwich_covariance(const ClusteredProblem& problem, const WorkingCorrelation& corr,
                           const Vector& theta);

}  // namespace critr
