#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gp_oracles.hpp"
#include "wassdoe/errors.hpp"
#include "wassdoe/gp.hpp"

using namespace wassdoe;

namespace {

std::vector<MixedPoint> random_points(Rng& rng, std::size_t n, std::size_t d, std::size_t m = 11, double tau = 3.0) {
  std::vector<MixedPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.uniform();
    pts.emplace_back(x, oracle::random_measure(rng, m, tau));
  }
  return pts;
}

double smooth_response(const MixedPoint& p) {
  return std::sin(3.0 * p.x[0]) + p.mu.mean() * p.mu.mean() + 0.3 * p.x[0] * p.mu.mean();
}

Eigen::VectorXd responses(const std::vector<MixedPoint>& pts, double (*f)(const MixedPoint&)) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) y[static_cast<Eigen::Index>(i)] = f(pts[i]);
  return y;
}

FitOptions quick_options(std::uint64_t seed) {
  FitOptions o;
  o.seed = seed;
  o.starts = 3;
  o.max_evaluations = 150;
  return o;
}

void check_interpolation(const GpModel& model) { CHECK(oracle::interpolation_error(model) < 1e-6); }

}  // namespace

TEST_CASE("correlation examples") {
  const MixedPoint a({0.2}, DiscretizedMeasure::uniform(11, 3.0));
  CHECK(correlation(a, a, {{1.0, 1.0}}) == doctest::Approx(1.0).epsilon(1e-15));

  const MixedPoint left({0.0}, DiscretizedMeasure({1.0}, 1.0, {0.0, 0.0}));
  const MixedPoint right({1.0}, DiscretizedMeasure({1.0}, 1.0, {0.0, 0.0}));
  CHECK(correlation(left, right, {{1.0, 1.0}}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

  Rng rng(4);
  const auto pts = random_points(rng, 40, 2);
  const KernelConfig k{{1.5, 0.3, 7.0}};
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const double c = correlation(pts[i], pts[i + 1], k);
    CHECK(c == correlation(pts[i + 1], pts[i], k));
    CHECK(c > 0.0);
    CHECK(c <= 1.0);
    const double w = w_pp(pts[i].mu, pts[i + 1].mu, 2.0);
    const double expo = 1.5 * std::pow(pts[i].x[0] - pts[i + 1].x[0], 2) +
                        0.3 * std::pow(pts[i].x[1] - pts[i + 1].x[1], 2) + 7.0 * w * w;
    CHECK(c == doctest::Approx(std::exp(-expo)).epsilon(1e-13));
  }

  CHECK_THROWS_AS(correlation(a, a, {{1.0, 0.0}}), ConfigError);
  CHECK_THROWS_AS(correlation(a, a, {{1.0, -2.0}}), ConfigError);
  CHECK_THROWS_AS(correlation(a, a, {{1.0, 1.0, 1.0}}), DomainError);
}

TEST_CASE("correlation with unit Euclidean and unit measure separation") {
  const DiscretizedMeasure at0({1.0, 0.0}, 2.0, {0.0, 2.0});
  const DiscretizedMeasure at1({0.0, 1.0}, 2.0, {0.0, 2.0});
  // Uniform on [0,1] versus uniform on [1,2]: quantile gap is 1 everywhere.
  REQUIRE(w_pp(at0, at1, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  const MixedPoint a({0.0}, at0), b({1.0}, at1);
  CHECK(correlation(a, b, {{1.0, 1.0}}) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(correlation(a, b, {{1.0, 1.0}}) == doctest::Approx(0.135335).epsilon(1e-6));
}

TEST_CASE("Chebyshev knots and Lagrange basis") {
  const auto a = chebyshev_knots(10);
  REQUIRE(a.size() == 10);
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(a[j] > 0.0);
    CHECK(a[j] < 1.0);
    if (j > 0) CHECK(a[j] > a[j - 1]);
    CHECK(a[j] == doctest::Approx(0.5 - std::cos((2.0 * j + 1.0) * M_PI / 20.0) / 2.0).epsilon(1e-15));
    for (std::size_t k = 0; k < a.size(); ++k)
      CHECK(lagrange_basis(a, k, a[j]) == doctest::Approx(j == k ? 1.0 : 0.0).epsilon(1e-12));
  }
  for (double t : {0.0, 0.13, 0.5, 0.77, 1.0}) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += lagrange_basis(a, k, t);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(chebyshev_knots(0), ConfigError);
}

TEST_CASE("regression matrices") {
  Rng rng(8);
  const auto pts = random_points(rng, 25, 1);
  const BasisConfig basis;
  const auto reg = build_regression(pts, basis);
  REQUIRE(reg.G.rows() == 25);
  REQUIRE(reg.G.cols() == 2);
  REQUIRE(reg.J.cols() == 10);
  for (Eigen::Index i = 0; i < reg.J.rows(); ++i) {
    CHECK(reg.J.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(reg.G(i, 0) == 1.0);
    CHECK(reg.G(i, 1) == pts[static_cast<std::size_t>(i)].x[0]);
  }
  CHECK(reg.U().cols() == 12);

  const MixedPoint p03({0.3}, DiscretizedMeasure::uniform(11, 3.0));
  const auto row = regression_row(p03, basis);
  CHECK(row[0] == 1.0);
  CHECK(row[1] == 0.3);

  // Monte-Carlo oracle for one J row.
  const auto knots = basis.knots();
  Rng draw(77);
  const auto xs = sample(pts[3].mu, draw, 1000000);
  for (std::size_t j = 0; j < knots.size(); ++j) {
    double s = 0.0;
    for (double x : xs) s += lagrange_basis(knots, j, x);
    CHECK(reg.J(3, static_cast<Eigen::Index>(j)) == doctest::Approx(s / 1e6).epsilon(0).scale(1).epsilon(2e-2));
  }

  // A measure concentrated on the cell around knot a_j gives nearly e_j.
  for (std::size_t m : {201, 801}) {
    const std::size_t cells = m - 1;
    for (std::size_t j : {0, 4, 9}) {
      std::vector<double> inc(cells, 0.0);
      inc[std::min(cells - 1, static_cast<std::size_t>(knots[j] * static_cast<double>(cells)))] = 1.0;
      const MixedPoint at({0.5}, DiscretizedMeasure(inc, static_cast<double>(cells)));
      const auto r = regression_row(at, basis);
      for (std::size_t k = 0; k < knots.size(); ++k)
        CHECK(std::abs(r[static_cast<Eigen::Index>(2 + k)] - (k == j ? 1.0 : 0.0)) < 100.0 / static_cast<double>(m));
    }
  }

  const auto sk = build_regression(pts, {KrigingMode::simple, 10});
  CHECK(sk.U().cols() == 0);
  CHECK(regression_row(p03, {KrigingMode::simple, 10}).size() == 0);
}

TEST_CASE("profile likelihood limits") {
  Rng rng(3);
  const auto pts = random_points(rng, 15, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(15);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.normal();

  // Tiny theta: R is nearly all ones; huge theta: R -> I, sigma^2 -> mean(y^2).
  const ProfileLikelihood sk(pts, y, {KrigingMode::simple, 10}, 1e-8, 1e-10);
  const std::vector<double> big(2, std::exp(8.0) * 1e3);
  const auto st = sk.linear_stage(big);
  CHECK(st.sigma2 == doctest::Approx(y.squaredNorm() / 15.0).epsilon(1e-6));

  // Exact linear data in the universal mean space gives a zero residual.
  const auto pts2 = random_points(rng, 20, 1);
  Eigen::VectorXd lin(20);
  for (std::size_t i = 0; i < 20; ++i) lin[static_cast<Eigen::Index>(i)] = 2.0 - 1.5 * pts2[i].x[0] + 0.7 * pts2[i].mu.mean();
  const ProfileLikelihood uk(pts2, lin, {}, 1e-8, 1e-10);
  const auto st2 = uk.linear_stage(std::vector<double>{1.0, 1.0});
  CHECK(st2.q2 < 1e-16);
  CHECK(st2.sigma2 >= 0.0);
  CHECK((lin - uk.U() * st2.psi).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(st2.rank() < 12);  // intercept and the Lagrange partition of unity coincide
}

TEST_CASE("fit certificate against random theta") {
  for (std::uint64_t seed : {1u, 2u}) {
    Rng rng(100 + seed);
    const auto pts = random_points(rng, 20, 1);
    const Eigen::VectorXd y = responses(pts, smooth_response);
    FitOptions o;
    o.seed = seed;
    const auto model = GpModel::fit(pts, y, {}, o);
    check_interpolation(model);
    CHECK(model.sigma2() >= 0.0);
    CHECK(model.q2() >= 0.0);
    const ProfileLikelihood objective(pts, y, {}, o.nugget, o.rank_tolerance);
    std::vector<double> log_theta(2);
    for (std::size_t k = 0; k < 2; ++k) log_theta[k] = std::log(model.kernel().theta[k]);
    CHECK(objective(log_theta) == doctest::Approx(model.profile_objective()).epsilon(1e-12));
    Rng probe(seed * 31);
    for (int t = 0; t < 100; ++t) {
      const std::vector<double> lt{probe.uniform(-8.0, 8.0), probe.uniform(-8.0, 8.0)};
      CHECK(model.profile_objective() <= objective(lt) + 1e-9);
    }
    for (const auto& trace : model.optimizer_traces()) {
      REQUIRE(!trace.best_objective.empty());
      for (std::size_t k = 1; k < trace.best_objective.size(); ++k)
        CHECK(trace.best_objective[k] <= trace.best_objective[k - 1]);
    }
  }
}

TEST_CASE("prediction: interpolation, constants, equivariance") {
  Rng rng(21);
  const auto pts = random_points(rng, 24, 2);
  Eigen::VectorXd y(24);
  for (std::size_t i = 0; i < 24; ++i)
    y[static_cast<Eigen::Index>(i)] = std::pow(pts[i].x[0] + pts[i].mu.mean(), 2) - std::log1p(pts[i].x[1]);
  const auto uk = GpModel::fit(pts, y, {}, quick_options(5));
  check_interpolation(uk);
  const auto sk = GpModel::fit(pts, y, {KrigingMode::simple, 10}, quick_options(5));
  check_interpolation(sk);

  const auto probes = random_points(rng, 20, 2);
  FitOptions fixed;
  fixed.fixed_theta = uk.kernel().theta;
  const auto shifted = GpModel::fit(pts, (y.array() + 3.25).matrix(), {}, fixed);
  for (const auto& p : probes) CHECK(shifted.predict(p) - uk.predict(p) == doctest::Approx(3.25).epsilon(1e-10));

  const auto constant = GpModel::fit(pts, Eigen::VectorXd::Constant(24, -1.75), {}, fixed);
  for (const auto& p : probes) CHECK(std::abs(constant.predict(p) + 1.75) < 1e-8);

  // Data in the mean space has zero LOO error.
  Eigen::VectorXd lin(24);
  for (std::size_t i = 0; i < 24; ++i)
    lin[static_cast<Eigen::Index>(i)] = 1.0 + pts[i].x[0] - 2.0 * pts[i].x[1] + 0.5 * pts[i].mu.mean();
  const auto exact = GpModel::fit(pts, lin, {}, fixed);
  CHECK(exact.loo_mspe() < 1e-14);

  CHECK_THROWS_AS(uk.predict(MixedPoint({0.5}, DiscretizedMeasure::uniform(11, 3.0))), DomainError);
  CHECK_THROWS_AS(uk.predict(MixedPoint({0.5, 0.5}, DiscretizedMeasure::uniform(11, 3.0, {0.0, 2.0}))), DomainError);
}

TEST_CASE("leave-one-out matches drop-one refits") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Rng rng(seed);
    const auto pts = random_points(rng, 22, 1);
    const Eigen::VectorXd y = responses(pts, smooth_response);
    for (auto mode : {KrigingMode::universal, KrigingMode::simple}) {
      const auto model = GpModel::fit(pts, y, {mode, 10}, quick_options(seed));
      const auto fast = model.loo_errors();
      const auto slow = oracle::loo_by_refit(model);
      REQUIRE(fast.size() == slow.size());
      for (std::size_t k = 0; k < fast.size(); ++k) CHECK(std::abs(fast[k] - slow[k]) < 1e-8);
      CHECK(model.loo_mspe() == doctest::Approx(std::accumulate(slow.begin(), slow.end(), 0.0) / 22.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("prediction intervals") {
  Rng rng(41);
  const auto pts = random_points(rng, 20, 1);
  const Eigen::VectorXd y = responses(pts, smooth_response);
  const auto model = GpModel::fit(pts, y, {}, quick_options(2));
  CHECK(model.degrees_of_freedom() == 8);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto [lo, hi] = model.predict_interval(pts[k], 0.1);
    CHECK(hi - lo < 1e-6 * (1.0 + std::abs(y[static_cast<Eigen::Index>(k)])));
  }
  for (const auto& p : random_points(rng, 10, 1)) {
    const auto [lo, hi] = model.predict_interval(p, 0.1);
    const double c = model.predict(p);
    CHECK(hi > lo);
    CHECK((hi - c) == doctest::Approx(c - lo).epsilon(1e-9));
    const auto [lo2, hi2] = model.predict_interval(p, 0.5);
    CHECK(hi2 - lo2 < hi - lo);
  }
  CHECK_THROWS_AS(model.predict_interval(pts[0], 0.0), DomainError);
  CHECK_THROWS_AS(model.predict_interval(pts[0], 1.0), DomainError);
}

TEST_CASE("prediction interval coverage on a sampled GP") {
  const double coverage = oracle::interval_coverage({{4.0, 30.0}}, 200, 0.1, 5000);
  MESSAGE("coverage " << coverage);
  CHECK(coverage >= 0.80);
  CHECK(coverage <= 0.97);
}

TEST_CASE("fit errors") {
  Rng rng(61);
  const auto pts = random_points(rng, 12, 1);
  const Eigen::VectorXd y = responses(pts, smooth_response);
  CHECK_THROWS_AS(GpModel::fit(pts, y, {}, quick_options(1)), ValidationError);  // n <= s + l
  CHECK_NOTHROW(GpModel::fit(pts, y, {KrigingMode::universal, 3}, quick_options(1)));

  auto dup = random_points(rng, 15, 1);
  dup[7] = dup[2];
  CHECK_THROWS_AS(GpModel::fit(dup, Eigen::VectorXd::Zero(15), {KrigingMode::simple, 10}), ValidationError);

  auto mixed = random_points(rng, 15, 1);
  mixed[4] = MixedPoint({0.1, 0.2}, mixed[4].mu);
  CHECK_THROWS_AS(GpModel::fit(mixed, Eigen::VectorXd::Zero(15), {KrigingMode::simple, 10}), ValidationError);
  CHECK_THROWS_AS(GpModel::fit(pts, Eigen::VectorXd::Zero(5), {KrigingMode::simple, 10}), ValidationError);

  // Without a nugget, an enormous length scale makes R numerically singular.
  auto close = random_points(rng, 15, 1);
  FitOptions o;
  o.nugget = 0.0;
  o.fixed_theta = std::vector<double>{1e-9, 1e-9};
  CHECK_THROWS_AS(GpModel::fit(close, responses(close, smooth_response), {KrigingMode::simple, 10}, o), NumericalError);

  CHECK(kriging_mode_from_string("UK") == KrigingMode::universal);
  CHECK(std::string(to_string(KrigingMode::simple)) == "simple");
  CHECK_THROWS_AS(kriging_mode_from_string("ordinary"), ConfigError);
}

TEST_CASE("from_parts reproduces the fitted model") {
  Rng rng(71);
  const auto pts = random_points(rng, 20, 1);
  const Eigen::VectorXd y = responses(pts, smooth_response);
  const auto model = GpModel::fit(pts, y, {}, quick_options(9));
  const auto copy = GpModel::from_parts(model.inputs(), model.y(), model.basis(), model.kernel(), model.psi(),
                                        model.sigma2(), model.nugget());
  for (const auto& p : random_points(rng, 10, 1)) {
    CHECK(copy.predict(p) == doctest::Approx(model.predict(p)).epsilon(1e-10));
    CHECK(copy.predict_interval(p, 0.1).second == doctest::Approx(model.predict_interval(p, 0.1).second).epsilon(1e-9));
  }
  CHECK(copy.profile_objective() == doctest::Approx(model.profile_objective()).epsilon(1e-10));
}
