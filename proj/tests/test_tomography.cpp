#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "noonprobe/tomography.hpp"
#include "oracles.hpp"

using namespace noonprobe;

namespace {

std::vector<double> tomo_grid(int n = 20) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = 0.002 + 0.048 * i / double(n - 1);
  return g;
}

CoincidenceDataset exact_dataset(const TwoPhotonState& state, const ChannelModel& ch,
                                 double scale, int n = 20) {
  CoincidenceDataset data;
  data.true_rate = scale;
  for (double b : tomo_grid(n)) {
    const OutcomeProbs p = outcome_probabilities(state, ch(b));
    CoincidencePoint pt;
    pt.field_T = b;
    pt.t_int_s = 1.0;
    pt.n_hh = scale * p.hh;
    pt.n_hv = scale * p.hv;
    pt.n_vv = scale * p.vv;
    data.points.push_back(pt);
  }
  return data;
}

}  // namespace

TEST_CASE("count simulation") {
  const ChannelModel ch;
  const TwoPhotonState state = make_noon_state(0.22, knob_for_fidelity(0.90));
  SUBCASE("deterministic for a fixed seed") {
    const CoincidenceDataset a = simulate_counts(state, ch, tomo_grid(), 1e4, 1.0, 42);
    const CoincidenceDataset b = simulate_counts(state, ch, tomo_grid(), 1e4, 1.0, 42, false, 2);
    REQUIRE(a.points.size() == b.points.size());
    for (size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i].n_hh == b.points[i].n_hh);
      CHECK(a.points[i].n_hv == b.points[i].n_hv);
      CHECK(a.points[i].n_vv == b.points[i].n_vv);
    }
    const CoincidenceDataset c = simulate_counts(state, ch, tomo_grid(), 1e4, 1.0, 43);
    bool any_differ = false;
    for (size_t i = 0; i < a.points.size(); ++i)
      any_differ = any_differ || a.points[i].n_hh != c.points[i].n_hh;
    CHECK(any_differ);
  }
  SUBCASE("empirical rates approach probabilities at large counts") {
    const double scale = 4.0e4;  // lambda >= 1e4 for every outcome probed below
    const CoincidenceDataset d = simulate_counts(state, ch, {0.010, 0.030}, scale, 1.0, 7);
    for (const CoincidencePoint& pt : d.points) {
      const OutcomeProbs p = outcome_probabilities(state, ch(pt.field_T));
      for (auto [n, prob] : {std::pair{pt.n_hh, p.hh}, {pt.n_hv, p.hv}, {pt.n_vv, p.vv}}) {
        const double lambda = scale * prob;
        if (lambda < 1e4) continue;
        CHECK(std::abs(n - lambda) <= 3.0 * std::sqrt(lambda));
      }
    }
  }
  SUBCASE("replica mean matches the Poisson mean to 1%") {
    const double lambda = 1.0e4;
    double acc = 0.0;
    const int reps = 1000;
    for (int r = 0; r < reps; ++r) {
      Rng rng = Rng::substream(1234, r);
      acc += static_cast<double>(rng.poisson(lambda));
    }
    CHECK(acc / reps == doctest::Approx(lambda).epsilon(0.01));
  }
}

TEST_CASE("noiseless data recovers the pure state exactly") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, 1.0);
  const CoincidenceDataset data = exact_dataset(truth, ch, 1000.0);
  ReconstructOptions opt;
  opt.threads = 2;
  const TomographyResult fit = reconstruct(data, ch, opt);
  CHECK(fit.chi2 < 1e-6);
  CHECK(state_fidelity(fit.rho_hat, truth) > 0.9999);
  CHECK(fit.rate_hat == doctest::Approx(1000.0).epsilon(1e-4));
  // physicality of the estimate
  CHECK((fit.rho_hat.rho - fit.rho_hat.rho.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(fit.rho_hat.rho.trace().real() == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(fit.rho_hat.rho);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("Poisson round trip at 1e5 counts") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, 1.0);
  const CoincidenceDataset data =
      simulate_counts(truth, ch, tomo_grid(), 3.0e5, 1.0, 2024, false, 2);
  ReconstructOptions opt;
  opt.threads = 2;
  const TomographyResult fit = reconstruct(data, ch, opt);
  CHECK(state_fidelity(fit.rho_hat, truth) >= 0.99);
  const StateMetrics truth_metrics = state_metrics(truth, 0.22);
  CHECK(std::abs(fit.metrics.purity - truth_metrics.purity) <= 0.02);
  CHECK(std::abs(fit.metrics.noon_fidelity - truth_metrics.noon_fidelity) <= 0.02);
  CHECK(std::abs(fit.metrics.distinguishability - truth_metrics.distinguishability) <=
        0.02);
  CHECK(std::abs(fit.fitted_phi - 0.22) <= 0.02);
}

TEST_CASE("mixed-state round trip is statistically sound") {
  // The interior of the state space has weakly identified directions (the
  // singlet sector trades off against the fitted rate), so Uhlmann fidelity
  // to a mixed truth fluctuates at the percent level even for an optimal
  // fit.  What must hold: the fit reaches the statistical chi2 scale and the
  // visible metrics land close to the truth.
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, knob_for_fidelity(0.90));
  const CoincidenceDataset data =
      simulate_counts(truth, ch, tomo_grid(), 3.0e5, 1.0, 2024, false, 2);
  ReconstructOptions opt;
  opt.threads = 2;
  const TomographyResult fit = reconstruct(data, ch, opt);
  const auto model = detail::build_tomo_model(data, ch, 2);
  CHECK(fit.chi2 <= model.chi2(truth.in_basis(PolBasis::Circ).rho));
  CHECK(fit.chi2 > 15.0);   // ~44 degrees of freedom
  CHECK(fit.chi2 < 100.0);
  CHECK(state_fidelity(fit.rho_hat, truth) >= 0.85);
  CHECK(std::abs(fit.metrics.noon_fidelity - 0.90) <= 0.06);
}

TEST_CASE("chi-squared only sees the product of rate and integration time") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.3, 0.9);
  CoincidenceDataset data = simulate_counts(truth, ch, tomo_grid(12), 1e4, 2.0, 5);
  CoincidenceDataset scaled = data;
  for (CoincidencePoint& p : scaled.points) p.t_int_s /= 8.0;
  const auto model_a = detail::build_tomo_model(data, ch, 1);
  const auto model_b = detail::build_tomo_model(scaled, ch, 1);
  const Eigen::Matrix4cd rho = make_noon_state(0.25, 0.8).rho;
  double rate_a = 0.0, rate_b = 0.0;
  const double chi_a = model_a.chi2(rho, &rate_a);
  const double chi_b = model_b.chi2(rho, &rate_b);
  CHECK(chi_a == doctest::Approx(chi_b).epsilon(1e-12));
  CHECK(rate_b == doctest::Approx(8.0 * rate_a).epsilon(1e-12));
}

TEST_CASE("reconstruction is basis covariant") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, 0.9);
  const TwoPhotonState truth_hv = truth.in_basis(PolBasis::HV);
  const CoincidenceDataset a = simulate_counts(truth, ch, tomo_grid(12), 1e4, 1.0, 31);
  const CoincidenceDataset b = simulate_counts(truth_hv, ch, tomo_grid(12), 1e4, 1.0, 31);
  for (size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].n_hh == b.points[i].n_hh);
    CHECK(a.points[i].n_hv == b.points[i].n_hv);
    CHECK(a.points[i].n_vv == b.points[i].n_vv);
  }
  ReconstructOptions opt;
  opt.threads = 2;
  const TomographyResult fa = reconstruct(a, ch, opt);
  const TomographyResult fb = reconstruct(b, ch, opt);
  CHECK((fa.rho_hat.rho - fb.rho_hat.rho).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("reconstruction rejects undersized datasets") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.2, 1.0);
  const CoincidenceDataset data = simulate_counts(truth, ch, tomo_grid(6), 1e4, 1.0, 3);
  CHECK_THROWS_AS(reconstruct(data, ch), std::invalid_argument);
}

TEST_CASE("dataset validation") {
  CoincidenceDataset data;
  CoincidencePoint p;
  p.field_T = 0.01;
  p.n_hh = -3;
  data.points.push_back(p);
  CHECK_THROWS_AS(data.validate(), std::invalid_argument);
  data.points[0].n_hh = 3;
  data.points[0].t_int_s = 0.0;
  CHECK_THROWS_AS(data.validate(), std::invalid_argument);
  data.points[0].t_int_s = 1.0;
  data.points.push_back(data.points[0]);  // duplicate field
  CHECK_THROWS_AS(data.validate(), std::invalid_argument);
}

TEST_CASE("FI band collapses at delta zero and brackets the estimate") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, knob_for_fidelity(0.90));
  const CoincidenceDataset data =
      simulate_counts(truth, ch, tomo_grid(), 1e5, 1.0, 808, false, 2);
  ReconstructOptions opt;
  opt.threads = 2;
  const TomographyResult fit = reconstruct(data, ch, opt);
  const double fi_hat =
      fisher_information(pair_prob_fn(TwoPhotonState{fit.rho_hat}, ch), 0.037).total;

  FiBandOptions zero;
  zero.delta = 0.0;
  zero.threads = 2;
  const auto band0 = fi_error_band(fit, data, ch, 0.037, zero);
  CHECK(band0[1] - band0[0] <= 1e-4 * fi_hat);

  FiBandOptions one;
  one.threads = 2;
  const auto band1 = fi_error_band(fit, data, ch, 0.037, one);
  CHECK(band1[0] <= fi_hat);
  CHECK(band1[1] >= fi_hat);
  CHECK(band1[1] - band1[0] > band0[1] - band0[0]);
}

TEST_CASE("delta = 1 reproduces the 1-sigma band of a linear toy model") {
  // One-parameter family: counts n(x) = N (1 + a x) at many "points", all
  // Gaussian-ish for large N.  chi2(x) = sum (n0 - n(x))^2 / n0 with data at
  // x0 = 0, so chi2 = x^2 / sigma_x^2 with sigma_x^2 = 1 / (N a^2 M)-ish.
  // The value function v(x) = v0 + g x then has the exact 1-sigma band
  // [v(-sigma), v(+sigma)].
  const double big_n = 1e4, slope = 0.2;
  const int points = 25;
  auto cost = [&](const Eigen::VectorXd& x) {
    double acc = 0.0;
    for (int k = 0; k < points; ++k) {
      const double model = big_n * (1.0 + slope * x(0));
      acc += (big_n - model) * (big_n - model) / big_n;
    }
    return acc;
  };
  auto value = [&](const Eigen::VectorXd& x) { return 3.0 + 0.7 * x(0); };
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  NmOptions nm{1e-13, 1e-12, 4000, 2};
  const double hi = detail::constrained_extremum(value, cost, 1.0, 1.0, x0, true, nm,
                                                 4, 5, 0.05);
  const double lo = detail::constrained_extremum(value, cost, 1.0, 1.0, x0, false, nm,
                                                 4, 6, 0.05);
  const double sigma_x = 1.0 / (slope * std::sqrt(big_n * points));
  CHECK(hi == doctest::Approx(3.0 + 0.7 * sigma_x).epsilon(0.10));
  CHECK(lo == doctest::Approx(3.0 - 0.7 * sigma_x).epsilon(0.10));
}

TEST_CASE("band width shrinks as counts grow") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, knob_for_fidelity(0.90));
  ReconstructOptions ropt;
  ropt.threads = 2;
  FiBandOptions bopt;
  bopt.threads = 2;
  int wins = 0;
  const int seeds = 3;
  for (int s = 0; s < seeds; ++s) {
    const CoincidenceDataset small =
        simulate_counts(truth, ch, tomo_grid(12), 2e4, 1.0, 100 + s, false, 2);
    const CoincidenceDataset large =
        simulate_counts(truth, ch, tomo_grid(12), 8e4, 1.0, 200 + s, false, 2);
    const TomographyResult fs = reconstruct(small, ch, ropt);
    const TomographyResult fl = reconstruct(large, ch, ropt);
    const auto bs = fi_error_band(fs, small, ch, 0.037, bopt);
    const auto bl = fi_error_band(fl, large, ch, 0.037, bopt);
    if (bl[1] - bl[0] < bs[1] - bs[0]) ++wins;
  }
  CHECK(wins >= 2);  // 4x the counts should halve the band, allow one fluke
}

TEST_CASE("fidelity is one for identical states and symmetric") {
  const TwoPhotonState a = make_noon_state(0.3, 0.8);
  const TwoPhotonState b = make_noon_state(1.0, 0.95);
  CHECK(state_fidelity(a, a) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(state_fidelity(a, b) == doctest::Approx(state_fidelity(b, a)).epsilon(1e-10));
  CHECK(state_fidelity(a, b) < 1.0);
  CHECK(state_fidelity(a, b) >= 0.0);
}

TEST_CASE("joint singles fit uses the extra columns") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, 1.0);
  const CoincidenceDataset data =
      simulate_counts(truth, ch, tomo_grid(12), 5e4, 1.0, 61, true, 2);
  REQUIRE(data.points.front().has_singles);
  ReconstructOptions opt;
  opt.threads = 2;
  opt.use_singles = true;
  const TomographyResult fit = reconstruct(data, ch, opt);
  CHECK(state_fidelity(fit.rho_hat, truth) >= 0.99);
  // five residuals per point instead of three
  CHECK(fit.residuals.size() == 5 * data.points.size());
  // default fit ignores the singles columns
  ReconstructOptions plain;
  plain.threads = 2;
  const TomographyResult fit2 = reconstruct(data, ch, plain);
  CHECK(fit2.residuals.size() == 3 * data.points.size());
  // requesting singles without the columns is an input error
  const CoincidenceDataset bare = simulate_counts(truth, ch, tomo_grid(12), 5e4, 1.0, 61);
  CHECK_THROWS_AS(reconstruct(bare, ch, opt), std::invalid_argument);
}

TEST_CASE("reconstruction is bitwise deterministic across thread counts") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, 1.0);
  const CoincidenceDataset data = simulate_counts(truth, ch, tomo_grid(12), 2e4, 1.0, 77);
  ReconstructOptions a;
  a.threads = 1;
  ReconstructOptions b;
  b.threads = 4;
  const TomographyResult fa = reconstruct(data, ch, a);
  const TomographyResult fb = reconstruct(data, ch, b);
  CHECK(fa.chi2 == fb.chi2);
  CHECK((fa.rho_hat.rho - fb.rho_hat.rho).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fa.rate_hat == fb.rate_hat);
}

TEST_CASE("degenerate datasets raise the identifiability warning") {
  // eight points crammed into 40 uT of field leave the fringe unresolved
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, 1.0);
  std::vector<double> grid;
  for (int i = 0; i < 8; ++i) grid.push_back(0.010 + 5e-6 * i);
  const CoincidenceDataset data = simulate_counts(truth, ch, grid, 1e4, 1.0, 5);
  ReconstructOptions opt;
  opt.threads = 2;
  const TomographyResult fit = reconstruct(data, ch, opt);
  CHECK(fit.identifiability_warning);
}

TEST_CASE("fidelity estimate bias falls as counts grow") {
  const ChannelModel ch;
  const TwoPhotonState truth = make_noon_state(0.22, 1.0);
  ReconstructOptions opt;
  opt.threads = 2;
  std::vector<double> median_bias;
  for (double rate : {3e3, 3e4, 3e5}) {
    std::vector<double> biases;
    for (int s = 0; s < 7; ++s) {
      const CoincidenceDataset data =
          simulate_counts(truth, ch, tomo_grid(12), rate, 1.0, 400 + s, false, 2);
      const TomographyResult fit = reconstruct(data, ch, opt);
      biases.push_back(1.0 - state_fidelity(fit.rho_hat, truth));
    }
    std::sort(biases.begin(), biases.end());
    median_bias.push_back(biases[biases.size() / 2]);
  }
  CHECK(median_bias[1] < median_bias[0]);
  CHECK(median_bias[2] < median_bias[1]);
}
