#include "wassdoe/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "wassdoe/errors.hpp"
#include "wassdoe/measure.hpp"
#include "wassdoe/rng.hpp"

namespace wassdoe {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxCondition = 1e12;
constexpr double kSigma2Floor = 1e-300;

bool same_point(const MixedPoint& a, const MixedPoint& b) { return a.x == b.x && a.mu == b.mu; }

/// Nelder-Mead with the standard coefficients on a box (points are clamped
/// before evaluation).
template <class F>
std::pair<std::vector<double>, double> nelder_mead(F&& f, std::vector<double> start, double step, double lo, double hi,
                                                   std::size_t max_evals, OptimizerTrace& trace) {
  const std::size_t dim = start.size();
  auto clamp = [&](std::vector<double> v) {
    for (auto& x : v) x = std::clamp(x, lo, hi);
    return v;
  };
  std::vector<std::vector<double>> simplex{clamp(start)};
  for (std::size_t k = 0; k < dim; ++k) {
    auto v = simplex.front();
    v[k] += (v[k] + step <= hi) ? step : -step;
    simplex.push_back(clamp(v));
  }
  std::vector<double> values(simplex.size());
  std::size_t evals = 0;
  auto eval = [&](const std::vector<double>& v) {
    ++evals;
    return f(v);
  };
  for (std::size_t k = 0; k < simplex.size(); ++k) values[k] = eval(simplex[k]);

  std::vector<std::size_t> order(simplex.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    trace.best_objective.push_back(values[best]);
    if (std::isfinite(values[worst]) && std::abs(values[worst] - values[best]) <= 1e-10 * (1.0 + std::abs(values[best]))) {
      double spread = 0.0;
      for (std::size_t k = 0; k < dim; ++k) spread = std::max(spread, std::abs(simplex[worst][k] - simplex[best][k]));
      if (spread < 1e-6) break;
    }

    std::vector<double> centroid(dim, 0.0);
    for (std::size_t idx : order)
      if (idx != worst)
        for (std::size_t k = 0; k < dim; ++k) centroid[k] += simplex[idx][k] / static_cast<double>(dim);
    auto along = [&](double coef) {
      std::vector<double> v(dim);
      for (std::size_t k = 0; k < dim; ++k) v[k] = centroid[k] + coef * (simplex[worst][k] - centroid[k]);
      return clamp(v);
    };

    const auto reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const auto expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const auto contracted = along(outside ? -0.5 : 0.5);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t idx : order) {
      if (idx == best) continue;
      for (std::size_t k = 0; k < dim; ++k) simplex[idx][k] = simplex[best][k] + 0.5 * (simplex[idx][k] - simplex[best][k]);
      values[idx] = eval(simplex[idx]);
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  return {simplex[static_cast<std::size_t>(it - values.begin())], *it};
}

std::vector<double> exp_all(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::exp(x); });
  return out;
}

void validate_training(const std::vector<MixedPoint>& inputs, const Eigen::VectorXd& y) {
  if (inputs.empty()) throw ValidationError("GP fit needs training data");
  if (static_cast<std::size_t>(y.size()) != inputs.size())
    throw ValidationError("GP fit: response length does not match the number of inputs");
  for (Eigen::Index k = 0; k < y.size(); ++k)
    if (!std::isfinite(y[k])) throw ValidationError("GP fit: non-finite response");
  const std::size_t d = inputs.front().dim();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].dim() != d) throw ValidationError("GP fit: inputs differ in dimension");
    if (!(inputs[i].mu.support() == inputs.front().mu.support()))
      throw ValidationError("GP fit: input measures must share a support");
    for (std::size_t j = 0; j < i; ++j)
      if (same_point(inputs[i], inputs[j])) throw ValidationError("GP fit: duplicated training input");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(KrigingMode mode) { return mode == KrigingMode::simple ? "simple" : "universal"; }

KrigingMode kriging_mode_from_string(const std::string& name) {
  if (name == "simple" || name == "SK" || name == "sk") return KrigingMode::simple;
  if (name == "universal" || name == "UK" || name == "uk") return KrigingMode::universal;
  throw ConfigError("unknown Kriging mode '" + name + "'");
}

void KernelConfig::validate() const {
  if (theta.size() < 2) throw ConfigError("kernel needs theta_1..theta_d and theta_{d+1}");
  for (double t : theta)
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("correlation parameters must be positive");
}

std::vector<double> chebyshev_knots(std::size_t l) {
  if (l == 0) throw ConfigError("basis needs at least one knot");
  std::vector<double> a(l);
  for (std::size_t j = 1; j <= l; ++j)
    a[j - 1] = 0.5 - std::cos((2.0 * static_cast<double>(j) - 1.0) * std::numbers::pi / (2.0 * static_cast<double>(l))) / 2.0;
  return a;
}

double lagrange_basis(std::span<const double> knots, std::size_t j, double t) {
  double v = 1.0;
  for (std::size_t k = 0; k < knots.size(); ++k)
    if (k != j) v *= (t - knots[k]) / (knots[j] - knots[k]);
  return v;
}

std::vector<std::function<double(double)>> lagrange_family(std::vector<double> knots) {
  std::vector<std::function<double(double)>> family;
  for (std::size_t j = 0; j < knots.size(); ++j)
    family.emplace_back([knots, j](double t) { return lagrange_basis(knots, j, t); });
  return family;
}

double correlation(const MixedPoint& a, const MixedPoint& b, const KernelConfig& kernel) {
  kernel.validate();
  if (a.dim() != kernel.d() || b.dim() != kernel.d()) throw DomainError("correlation: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += kernel.theta[i] * (a.x[i] - b.x[i]) * (a.x[i] - b.x[i]);
  const double w = w_pp(a.mu, b.mu, 2.0);
  return std::exp(-s - kernel.theta.back() * w * w);
}

Eigen::MatrixXd RegressionMatrices::U() const {
  Eigen::MatrixXd u(G.rows(), G.cols() + J.cols());
  u << G, J;
  return u;
}

Eigen::VectorXd regression_row(const MixedPoint& at, const BasisConfig& basis) {
  if (basis.mode == KrigingMode::simple) return Eigen::VectorXd(0);
  const auto family = lagrange_family(basis.knots());
  const auto integrals = integrate_basis(at.mu, family);
  Eigen::VectorXd row(at.dim() + 1 + basis.l);
  row[0] = 1.0;
  for (std::size_t i = 0; i < at.dim(); ++i) row[static_cast<Eigen::Index>(i + 1)] = at.x[i];
  for (std::size_t j = 0; j < basis.l; ++j) row[static_cast<Eigen::Index>(at.dim() + 1 + j)] = integrals[j];
  return row;
}

RegressionMatrices build_regression(std::span<const MixedPoint> inputs, const BasisConfig& basis) {
  RegressionMatrices out;
  if (basis.mode == KrigingMode::simple || inputs.empty()) {
    out.G.resize(static_cast<Eigen::Index>(inputs.size()), 0);
    out.J.resize(static_cast<Eigen::Index>(inputs.size()), 0);
    return out;
  }
  const auto d = static_cast<Eigen::Index>(inputs.front().dim());
  const auto n = static_cast<Eigen::Index>(inputs.size());
  out.G.resize(n, d + 1);
  out.J.resize(n, static_cast<Eigen::Index>(basis.l));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = regression_row(inputs[static_cast<std::size_t>(i)], basis);
    out.G.row(i) = row.head(d + 1).transpose();
    out.J.row(i) = row.tail(static_cast<Eigen::Index>(basis.l)).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profile likelihood

ProfileLikelihood::ProfileLikelihood(std::span<const MixedPoint> inputs, const Eigen::VectorXd& y,
                                     const BasisConfig& basis, double nugget, double rank_tolerance)
    : n_(inputs.size()), d_(inputs.empty() ? 0 : inputs.front().dim()), y_(y), nugget_(nugget),
      rank_tolerance_(rank_tolerance) {
  const auto n = static_cast<Eigen::Index>(n_);
  sq_diff_.assign(d_, Eigen::MatrixXd::Zero(n, n));
  std::vector<DiscretizedMeasure> measures;
  measures.reserve(n_);
  for (const auto& p : inputs) measures.push_back(p.mu);
  const auto w = DistanceCache::global().measures(measures, WassersteinOrder(2, 2));
  w2sq_ = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      w2sq_(ii, jj) = (*w)(i, j) * (*w)(i, j);
      for (std::size_t k = 0; k < d_; ++k) {
        const double diff = inputs[i].x[k] - inputs[j].x[k];
        sq_diff_[k](ii, jj) = diff * diff;
      }
    }
  U_ = build_regression(inputs, basis).U();
}

Eigen::MatrixXd ProfileLikelihood::correlation_matrix(std::span<const double> theta) const {
  Eigen::MatrixXd expo = -theta[d_] * w2sq_;
  for (std::size_t k = 0; k < d_; ++k) expo -= theta[k] * sq_diff_[k];
  Eigen::MatrixXd r = expo.array().exp().matrix();
  r.diagonal().array() += nugget_;
  return r;
}

LinearStage ProfileLikelihood::linear_stage(std::span<const double> theta, const Eigen::VectorXd* y_override) const {
  const Eigen::VectorXd& y = y_override ? *y_override : y_;
  LinearStage st;
  const Eigen::MatrixXd r = correlation_matrix(theta);
  st.chol.compute(r);
  if (st.chol.info() != Eigen::Success) throw NumericalError("correlation matrix is not positive definite");
  st.reciprocal_condition = st.chol.rcond();
  if (!(st.reciprocal_condition * kMaxCondition >= 1.0))
    throw NumericalError("correlation matrix is ill-conditioned (condition > 1e12)");
  const auto& lower = st.chol.matrixL();
  st.log_det = 2.0 * st.chol.matrixLLT().diagonal().array().log().sum();

  const Eigen::VectorXd y_white = lower.solve(y);
  Eigen::VectorXd resid_white = y_white;
  if (U_.cols() > 0) {
    st.U_white = lower.solve(U_);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(st.U_white, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < s.size() && s[rank] > rank_tolerance_ * s[0]) ++rank;
    st.left = svd.matrixU().leftCols(rank);
    st.right = svd.matrixV().leftCols(rank);
    st.singular = s.head(rank);
    const Eigen::VectorXd coef = st.left.transpose() * y_white;
    st.psi = st.right * coef.cwiseQuotient(st.singular);
    resid_white -= st.left * coef;
  } else {
    st.psi.resize(0);
    st.singular.resize(0);
  }
  st.q2 = resid_white.squaredNorm();
  st.sigma2 = st.q2 / static_cast<double>(n_);
  st.alpha = lower.transpose().solve(resid_white);
  return st;
}

double ProfileLikelihood::operator()(std::span<const double> log_theta) const {
  try {
    const auto theta = exp_all(log_theta);
    const auto st = linear_stage(theta);
    return static_cast<double>(n_) * std::log(std::max(st.sigma2, kSigma2Floor)) + st.log_det;
  } catch (const NumericalError&) {
    return kInf;
  }
}

// ---------------------------------------------------------------------------
// GpModel

GpModel GpModel::fit(std::vector<MixedPoint> inputs, Eigen::VectorXd y, BasisConfig basis, FitOptions options) {
  validate_training(inputs, y);
  const std::size_t n = inputs.size(), d = inputs.front().dim();
  if (basis.mode == KrigingMode::universal && n <= basis.columns(d))
    throw ValidationError("universal Kriging needs n > s + l = " + std::to_string(basis.columns(d)) + " runs");
  if (!(options.nugget >= 0.0)) throw ConfigError("nugget must be nonnegative");

  const ProfileLikelihood objective(inputs, y, basis, options.nugget, options.rank_tolerance);
  GpModel model;
  model.inputs_ = std::move(inputs);
  model.y_ = std::move(y);
  model.basis_ = basis;
  model.nugget_ = options.nugget;
  model.rank_tolerance_ = options.rank_tolerance;

  if (options.fixed_theta) {
    model.kernel_.theta = *options.fixed_theta;
    model.kernel_.validate();
    if (model.kernel_.d() != d) throw ConfigError("fixed theta has the wrong length");
  } else {
    const std::size_t dim = d + 1;
    const double lo = options.log_theta_lo, hi = options.log_theta_hi;
    if (!(lo < hi)) throw ConfigError("empty log-theta search box");
    Rng rng(options.seed);
    const std::size_t screening = options.prescan > 0 ? options.prescan : 20 * dim;
    std::vector<std::pair<double, std::vector<double>>> screened;
    screened.emplace_back(objective(std::vector<double>(dim, 0.0)), std::vector<double>(dim, 0.0));
    for (std::size_t k = 0; k < screening; ++k) {
      std::vector<double> v(dim);
      for (auto& x : v) x = rng.uniform(lo, hi);
      screened.emplace_back(objective(v), v);
    }
    std::stable_sort(screened.begin(), screened.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<double> best = screened.front().second;
    double best_value = screened.front().first;
    const std::size_t starts = std::min(std::max<std::size_t>(options.starts, 1), screened.size());
    for (std::size_t s = 0; s < starts; ++s) {
      OptimizerTrace trace;
      auto [point, value] = nelder_mead([&](const std::vector<double>& v) { return objective(v); },
                                        screened[s].second, 1.0, lo, hi, options.max_evaluations, trace);
      model.traces_.push_back(std::move(trace));
      if (value < best_value) {
        best_value = value;
        best = point;
      }
    }
    if (!std::isfinite(best_value)) throw NumericalError("profile likelihood is not finite anywhere in the search box");
    model.kernel_.theta = exp_all(best);
  }

  const auto st = objective.linear_stage(model.kernel_.theta);
  model.psi_ = st.psi;
  model.sigma2_ = st.sigma2;
  model.q2_ = st.q2;
  model.profile_objective_ = static_cast<double>(n) * std::log(std::max(st.sigma2, kSigma2Floor)) + st.log_det;
  model.U_ = objective.U();
  model.chol_ = st.chol;
  model.alpha_ = st.alpha;
  model.U_white_ = st.U_white;
  model.left_ = st.left;
  model.singular_ = st.singular;
  model.right_ = st.right;
  return model;
}

GpModel GpModel::from_parts(std::vector<MixedPoint> inputs, Eigen::VectorXd y, BasisConfig basis, KernelConfig kernel,
                            Eigen::VectorXd psi, double sigma2, double nugget) {
  validate_training(inputs, y);
  kernel.validate();
  if (kernel.d() != inputs.front().dim()) throw ValidationError("model theta does not match input dimension");
  if (static_cast<std::size_t>(psi.size()) != basis.columns(kernel.d()))
    throw ValidationError("model psi has the wrong length");
  GpModel model;
  model.inputs_ = std::move(inputs);
  model.y_ = std::move(y);
  model.basis_ = basis;
  model.kernel_ = std::move(kernel);
  model.psi_ = std::move(psi);
  model.sigma2_ = sigma2;
  model.nugget_ = nugget;
  model.factorize();
  return model;
}

void GpModel::factorize() {
  const ProfileLikelihood objective(inputs_, y_, basis_, nugget_, rank_tolerance_);
  auto st = objective.linear_stage(kernel_.theta);
  U_ = objective.U();
  chol_ = st.chol;
  U_white_ = st.U_white;
  left_ = st.left;
  singular_ = st.singular;
  right_ = st.right;
  // Residual from the stored coefficients, not the refit ones.
  const Eigen::VectorXd resid = U_.cols() > 0 ? Eigen::VectorXd(y_ - U_ * psi_) : y_;
  const Eigen::VectorXd resid_white = chol_.matrixL().solve(resid);
  alpha_ = chol_.matrixU().solve(resid_white);
  q2_ = resid_white.squaredNorm();
  profile_objective_ =
      static_cast<double>(inputs_.size()) * std::log(std::max(sigma2_, kSigma2Floor)) + st.log_det;
}

void GpModel::check_point(const MixedPoint& at) const {
  if (at.dim() != d()) throw DomainError("prediction point has the wrong dimension");
  if (!(at.mu.support() == inputs_.front().mu.support()))
    throw DomainError("prediction measure support differs from the training data");
}

Eigen::VectorXd GpModel::correlation_vector(const MixedPoint& at) const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(inputs_.size()));
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    // The nugget acts at zero distance, so training inputs are interpolated.
    r[static_cast<Eigen::Index>(k)] =
        correlation(at, inputs_[k], kernel_) + (same_point(at, inputs_[k]) ? nugget_ : 0.0);
  }
  return r;
}

double GpModel::predict(const MixedPoint& at) const {
  check_point(at);
  const Eigen::VectorXd r = correlation_vector(at);
  double mean = 0.0;
  if (psi_.size() > 0) mean = regression_row(at, basis_).dot(psi_);
  return mean + r.dot(alpha_);
}

std::pair<double, double> GpModel::predict_interval(const MixedPoint& at, double kappa) const {
  if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("interval level kappa must lie in (0, 1)");
  const std::size_t cols = basis_.columns(d());
  if (inputs_.size() <= cols) throw DomainError("prediction interval needs positive degrees of freedom");
  const auto dof = static_cast<double>(inputs_.size() - cols);
  const double center = predict(at);

  const Eigen::VectorXd r = correlation_vector(at);
  const Eigen::VectorXd w = chol_.matrixL().solve(r);
  double bracket = 1.0 + nugget_ - w.squaredNorm();
  if (U_.cols() > 0) {
    const Eigen::VectorXd v = regression_row(at, basis_) - U_white_.transpose() * w;
    const Eigen::VectorXd z = (right_.transpose() * v).cwiseQuotient(singular_);
    bracket += z.squaredNorm();
  }
  const double eta = std::sqrt(std::max(0.0, q2_ / dof * bracket));
  const boost::math::students_t dist(dof);
  const double half = eta * boost::math::quantile(boost::math::complement(dist, kappa / 2.0));
  return {center - half, center + half};
}

std::vector<double> GpModel::loo_errors() const {
  // Projected precision B = L^{-T} (I - A A') L^{-1}; the held-out residual
  // of run k is (B y)_k / B_kk = alpha_k / B_kk.
  const auto n = static_cast<Eigen::Index>(inputs_.size());
  Eigen::MatrixXd m = chol_.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  if (left_.cols() > 0) m -= left_ * (left_.transpose() * m);
  std::vector<double> out(inputs_.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    const double bkk = m.col(k).squaredNorm();
    const double e = alpha_[k] / bkk;
    out[static_cast<std::size_t>(k)] = e * e;
  }
  return out;
}

double GpModel::loo_mspe() const {
  const auto e = loo_errors();
  return std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
}

}  // namespace wassdoe
