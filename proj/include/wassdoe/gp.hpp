#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wassdoe/wasserstein.hpp"

namespace wassdoe {

enum class KrigingMode { simple, universal };

const char* to_string(KrigingMode mode);
KrigingMode kriging_mode_from_string(const std::string& name);

/// Gaussian correlation parameters theta_1..theta_d (Euclidean coordinates)
/// and theta_{d+1} (squared W_{2,2} of the measures).
struct KernelConfig {
  std::vector<double> theta;

  std::size_t d() const { return theta.size() - 1; }
  /// Throws ConfigError unless every theta is positive and finite.
  void validate() const;
};

/// l Chebyshev knots 1/2 - cos((2j-1) pi / 2l) / 2, j = 1..l, increasing.
std::vector<double> chebyshev_knots(std::size_t l);

/// Lagrange polynomial b_j for the given knots.
double lagrange_basis(std::span<const double> knots, std::size_t j, double t);

std::vector<std::function<double(double)>> lagrange_family(std::vector<double> knots);

/// Mean structure: nothing (simple Kriging) or g(x) = (1, x_1..x_d) plus
/// integrals of l Lagrange basis functions against the input measure
/// (universal Kriging).
struct BasisConfig {
  KrigingMode mode = KrigingMode::universal;
  std::size_t l = 10;

  std::vector<double> knots() const { return chebyshev_knots(l); }
  /// Number of regression columns s + l (0 in simple mode).
  std::size_t columns(std::size_t d) const { return mode == KrigingMode::simple ? 0 : d + 1 + l; }
};

/// exp(-sum theta_i (x_i - y_i)^2 - theta_{d+1} W_22(mu, nu)^2).
double correlation(const MixedPoint& a, const MixedPoint& b, const KernelConfig& kernel);

struct RegressionMatrices {
  Eigen::MatrixXd G;  // n x (d+1)
  Eigen::MatrixXd J;  // n x l
  Eigen::MatrixXd U() const;
};

RegressionMatrices build_regression(std::span<const MixedPoint> inputs, const BasisConfig& basis);
Eigen::VectorXd regression_row(const MixedPoint& at, const BasisConfig& basis);

struct FitOptions {
  std::size_t starts = 10;  // Nelder-Mead starts
  std::size_t prescan = 0;  // random screening points; 0 means 20 (d + 1)
  double log_theta_lo = -8.0;
  double log_theta_hi = 8.0;
  std::size_t max_evaluations = 300;  // per start
  std::uint64_t seed = 0;
  double nugget = 1e-8;
  double rank_tolerance = 1e-10;  // relative singular-value cutoff for U
  std::optional<std::vector<double>> fixed_theta;
};

/// Linear stage of the model at fixed theta: factorization of R and the GLS
/// fit of the regression coefficients.
struct LinearStage {
  Eigen::LLT<Eigen::MatrixXd> chol;
  Eigen::MatrixXd U_white;  // L^{-1} U
  Eigen::MatrixXd left;     // retained left singular vectors of L^{-1} U
  Eigen::VectorXd singular;
  Eigen::MatrixXd right;
  Eigen::VectorXd psi;
  Eigen::VectorXd alpha;  // R^{-1} (y - U psi)
  double q2 = 0.0;
  double sigma2 = 0.0;
  double log_det = 0.0;
  double reciprocal_condition = 0.0;

  std::size_t rank() const { return static_cast<std::size_t>(singular.size()); }
};

/// Profile negative log-likelihood n log sigma^2(theta) + log det R(theta)
/// over a fixed training set, with distance tables computed once.
class ProfileLikelihood {
 public:
  ProfileLikelihood(std::span<const MixedPoint> inputs, const Eigen::VectorXd& y, const BasisConfig& basis,
                    double nugget, double rank_tolerance);

  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  Eigen::MatrixXd correlation_matrix(std::span<const double> theta) const;
  /// Throws NumericalError when R is not positive definite or its condition
  /// number exceeds 1e12.
  LinearStage linear_stage(std::span<const double> theta, const Eigen::VectorXd* y_override = nullptr) const;
  /// Objective at theta = exp(log_theta); +infinity where linear_stage fails.
  double operator()(std::span<const double> log_theta) const;

  const Eigen::MatrixXd& U() const { return U_; }

 private:
  std::size_t n_, d_;
  std::vector<Eigen::MatrixXd> sq_diff_;  // per Euclidean coordinate
  Eigen::MatrixXd w2sq_;
  Eigen::MatrixXd U_;
  Eigen::VectorXd y_;
  double nugget_;
  double rank_tolerance_;
};

/// One Nelder-Mead start: the best objective after every iteration.
struct OptimizerTrace {
  std::vector<double> best_objective;
};

class GpModel {
 public:
  /// Fits theta by multi-start Nelder-Mead on the profile likelihood over the
  /// log-theta box (or uses options.fixed_theta), then psi and sigma^2 by GLS.
  static GpModel fit(std::vector<MixedPoint> inputs, Eigen::VectorXd y, BasisConfig basis, FitOptions options = {});

  /// Rebuilds a model from stored parameters; only the factorization of R is
  /// recomputed.
  static GpModel from_parts(std::vector<MixedPoint> inputs, Eigen::VectorXd y, BasisConfig basis,
                            KernelConfig kernel, Eigen::VectorXd psi, double sigma2, double nugget);

  double predict(const MixedPoint& at) const;
  /// 100(1 - kappa)% interval from the t distribution with n - s - l degrees
  /// of freedom.
  std::pair<double, double> predict_interval(const MixedPoint& at, double kappa) const;
  /// Squared leave-one-out errors with theta fixed.
  std::vector<double> loo_errors() const;
  double loo_mspe() const;

  const std::vector<MixedPoint>& inputs() const { return inputs_; }
  const Eigen::VectorXd& y() const { return y_; }
  const BasisConfig& basis() const { return basis_; }
  const KernelConfig& kernel() const { return kernel_; }
  const Eigen::VectorXd& psi() const { return psi_; }
  double sigma2() const { return sigma2_; }
  double q2() const { return q2_; }
  double nugget() const { return nugget_; }
  double profile_objective() const { return profile_objective_; }
  std::size_t d() const { return kernel_.d(); }
  std::size_t degrees_of_freedom() const { return inputs_.size() - basis_.columns(d()); }
  const std::vector<OptimizerTrace>& optimizer_traces() const { return traces_; }

 private:
  GpModel() = default;
  void factorize();
  Eigen::VectorXd correlation_vector(const MixedPoint& at) const;
  void check_point(const MixedPoint& at) const;

  std::vector<MixedPoint> inputs_;
  Eigen::VectorXd y_;
  BasisConfig basis_;
  KernelConfig kernel_;
  Eigen::VectorXd psi_;
  double sigma2_ = 0.0;
  double q2_ = 0.0;
  double nugget_ = 1e-8;
  double rank_tolerance_ = 1e-10;
  double profile_objective_ = 0.0;
  Eigen::MatrixXd U_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd U_white_;
  Eigen::MatrixXd left_;
  Eigen::VectorXd singular_;
  Eigen::MatrixXd right_;
  std::vector<OptimizerTrace> traces_;
};

}  // namespace wassdoe
