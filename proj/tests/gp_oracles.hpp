#pragma once

// Brute-force references for the Gaussian-process code, shared by the unit
// tests and the acceptance runner.

#include <cmath>
#include <cstdint>
#include <vector>

#include "oracles.hpp"
#include "wassdoe/gp.hpp"

namespace oracle {

/// Leave-one-out by brute force: drop run k, refit the linear stage with
/// theta held at the full-data value, predict at the dropped run.
inline std::vector<double> loo_by_refit(const wassdoe::GpModel& model) {
  using namespace wassdoe;
  std::vector<double> out;
  const auto& pts = model.inputs();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    std::vector<MixedPoint> sub;
    Eigen::VectorXd ysub(static_cast<Eigen::Index>(pts.size() - 1));
    for (std::size_t i = 0, j = 0; i < pts.size(); ++i) {
      if (i == k) continue;
      sub.push_back(pts[i]);
      ysub[static_cast<Eigen::Index>(j++)] = model.y()[static_cast<Eigen::Index>(i)];
    }
    FitOptions o;
    o.fixed_theta = model.kernel().theta;
    o.nugget = model.nugget();
    const auto refit = GpModel::fit(sub, ysub, model.basis(), o);
    const double e = refit.predict(pts[k]) - model.y()[static_cast<Eigen::Index>(k)];
    out.push_back(e * e);
  }
  return out;
}

/// Largest |predict - y| / (1 + |y|) over the training runs.
inline double interpolation_error(const wassdoe::GpModel& model) {
  double worst = 0.0;
  for (std::size_t k = 0; k < model.inputs().size(); ++k) {
    const double yk = model.y()[static_cast<Eigen::Index>(k)];
    worst = std::max(worst, std::abs(model.predict(model.inputs()[k]) - yk) / (1.0 + std::abs(yk)));
  }
  return worst;
}

/// Empirical coverage of 1 - kappa intervals: per replicate, a zero-mean GP
/// with known theta is sampled on 60 random points, a universal model with
/// that theta is fitted on the first 30 and the last 30 are checked.
inline double interval_coverage(const wassdoe::KernelConfig& truth, std::size_t replicates, double kappa,
                                std::uint64_t seed) {
  using namespace wassdoe;
  std::size_t covered = 0, total = 0;
  for (std::uint64_t rep = 0; rep < replicates; ++rep) {
    Rng rng(seed + rep);
    std::vector<MixedPoint> pts;
    for (int k = 0; k < 60; ++k) {
      std::vector<double> x(truth.d());
      for (auto& v : x) v = rng.uniform();
      pts.emplace_back(x, random_measure(rng, 11, 3.0));
    }
    Eigen::MatrixXd r(60, 60);
    for (Eigen::Index i = 0; i < 60; ++i)
      for (Eigen::Index j = 0; j < 60; ++j)
        r(i, j) = correlation(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)], truth);
    r.diagonal().array() += 1e-8;
    const Eigen::LLT<Eigen::MatrixXd> llt(r);
    Eigen::VectorXd z(60);
    for (Eigen::Index i = 0; i < 60; ++i) z[i] = rng.normal();
    const Eigen::VectorXd y = llt.matrixL() * z;

    const std::vector<MixedPoint> train(pts.begin(), pts.begin() + 30);
    FitOptions o;
    o.fixed_theta = truth.theta;
    const auto model = GpModel::fit(train, y.head(30), {}, o);
    for (std::size_t k = 30; k < 60; ++k) {
      const auto [lo, hi] = model.predict_interval(pts[k], kappa);
      const double v = y[static_cast<Eigen::Index>(k)];
      covered += (v >= lo && v <= hi) ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace oracle
