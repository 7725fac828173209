#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>

#include "noonprobe/atomic_model.hpp"
#include "oracles.hpp"

using namespace noonprobe;

TEST_CASE("hamiltonians are exactly hermitian") {
  for (const IsotopeConstants* iso : cell_species())
    for (Manifold m : {Manifold::Ground5S12, Manifold::Excited5P12})
      for (double b : {0.0, 0.017, 0.1}) {
        const Eigen::MatrixXd h = detail::manifold_hamiltonian_Hz(*iso, m, b);
        CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
      }
}

TEST_CASE("zero field clusters into hyperfine manifolds") {
  const LevelDiagram d = diagonalize_levels(rb85(), Manifold::Ground5S12, 0.0);
  REQUIRE(d.dim() == 12);
  // two clusters, degeneracies 5 (F=2) and 7 (F=3), split by ~3.0357 GHz
  const double e_f2 = hyperfine_shift_Hz(rb85().ahfs_ground_Hz, 2.5, 2.0);
  const double e_f3 = hyperfine_shift_Hz(rb85().ahfs_ground_Hz, 2.5, 3.0);
  int n_low = 0, n_high = 0;
  for (int k = 0; k < d.dim(); ++k) {
    if (std::abs(d.energy_Hz(k) - e_f2) < 1.0) ++n_low;
    if (std::abs(d.energy_Hz(k) - e_f3) < 1.0) ++n_high;
  }
  CHECK(n_low == 5);
  CHECK(n_high == 7);
  CHECK(e_f3 - e_f2 == doctest::Approx(3.0357324390e9).epsilon(1e-9));

  // the same analytic form holds for every manifold at zero field
  for (const IsotopeConstants* iso : cell_species())
    for (Manifold m : {Manifold::Ground5S12, Manifold::Excited5P12}) {
      const double a = m == Manifold::Ground5S12 ? iso->ahfs_ground_Hz
                                                 : iso->ahfs_excited_Hz;
      const LevelDiagram lev = diagonalize_levels(*iso, m, 0.0);
      for (int k = 0; k < lev.dim(); ++k) {
        const double lo = hyperfine_shift_Hz(a, iso->nuclear_spin, iso->nuclear_spin - 0.5);
        const double hi = hyperfine_shift_Hz(a, iso->nuclear_spin, iso->nuclear_spin + 0.5);
        const double resid =
            std::min(std::abs(lev.energy_Hz(k) - lo), std::abs(lev.energy_Hz(k) - hi));
        CHECK(resid <= 1e-9 * std::abs(a));
      }
    }
}

TEST_CASE("eigenvectors form an orthonormal set") {
  const LevelDiagram d = diagonalize_levels(rb87(), Manifold::Ground5S12, 0.043);
  const Eigen::MatrixXd gram = d.states.transpose() * d.states;
  CHECK((gram - Eigen::MatrixXd::Identity(d.dim(), d.dim())).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("ground energies match Breit-Rabi for both isotopes") {
  for (const IsotopeConstants* iso : cell_species()) {
    for (int k = 0; k <= 50; ++k) {
      const double b = 0.1 * k / 50.0;
      const LevelDiagram d = diagonalize_levels(*iso, Manifold::Ground5S12, b);
      const std::vector<double> ref = oracles::breit_rabi(*iso, b);
      const double scale = iso->ahfs_ground_Hz;
      for (int i = 0; i < d.dim(); ++i)
        CHECK(std::abs(d.energy_Hz(i) - ref[i]) <= 1e-9 * scale);
    }
  }
}

TEST_CASE("nearest 85Rb line sits about 1.5 GHz from the probe") {
  const double nu = probe_frequency_Hz();
  double nearest = 1e18;
  for (const TransitionLine& l : transition_table(rb85(), 0.0))
    if (l.sigma_plus > 1e-6 || l.sigma_minus > 1e-6)
      nearest = std::min(nearest, std::abs(l.frequency_Hz - nu));
  CHECK(nearest == doctest::Approx(1.5e9).epsilon(0.05));
}

TEST_CASE("transition table: zero-field 87Rb structure and strengths") {
  const auto lines = transition_table(rb87(), 0.0);
  // collapse to distinct frequencies
  std::vector<std::pair<double, double>> groups;  // freq, sigma+ strength
  for (const TransitionLine& l : lines) {
    bool merged = false;
    for (auto& g : groups)
      if (std::abs(g.first - l.frequency_Hz) < 1e6) {
        g.second += l.sigma_plus;
        merged = true;
      }
    if (!merged) groups.push_back({l.frequency_Hz, l.sigma_plus});
  }
  REQUIRE(groups.size() == 4);
  std::sort(groups.begin(), groups.end());
  // F=1 and F=2 groups split by the ground interval, F'=1,2 by the excited one
  CHECK(groups[3].first - groups[1].first ==
        doctest::Approx(2.0 * rb87().ahfs_ground_Hz).epsilon(1e-9));
  CHECK(groups[1].first - groups[0].first ==
        doctest::Approx(2.0 * rb87().ahfs_excited_Hz).epsilon(1e-9));
  // hyperfine strength factors: (2F+1) S_FF' / sum = {1,5,5,5}/16 per polarization
  const double total = 1.0 / 3.0;
  CHECK(groups[2].second == doctest::Approx(total / 16.0).epsilon(1e-9));   // F=1->F'=1
  CHECK(groups[3].second == doctest::Approx(5.0 * total / 16.0).epsilon(1e-9));
  CHECK(groups[0].second == doctest::Approx(5.0 * total / 16.0).epsilon(1e-9));
  CHECK(groups[1].second == doctest::Approx(5.0 * total / 16.0).epsilon(1e-9));
}

TEST_CASE("strength sum rule is field independent") {
  for (const IsotopeConstants* iso : cell_species())
    for (double b : {0.0, 0.05}) {
      double sp = 0.0, sm = 0.0;
      for (const TransitionLine& l : transition_table(*iso, b)) {
        sp += l.sigma_plus;
        sm += l.sigma_minus;
      }
      CHECK(sp == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
      CHECK(sm == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    }
}

TEST_CASE("strengths match a brute-force dipole-operator evaluation") {
  const IsotopeConstants& iso = rb85();
  const double b = 0.05;
  const LevelDiagram g = diagonalize_levels(iso, Manifold::Ground5S12, b);
  const LevelDiagram e = diagonalize_levels(iso, Manifold::Excited5P12, b);
  const int ni = spin_dim(iso.nuclear_spin);
  // explicit sigma+- operator matrices in the |mJ, mI> product basis;
  // |<1/2,+-1/2|d_+-1|1/2,-+1/2>|^2 = 2/3 d^2 from the 1/2x1 Clebsch-Gordan table
  Eigen::MatrixXd d_plus = Eigen::MatrixXd::Zero(2 * ni, 2 * ni);
  Eigen::MatrixXd d_minus = Eigen::MatrixXd::Zero(2 * ni, 2 * ni);
  for (int mi = 0; mi < ni; ++mi) {
    d_plus(ni + mi, mi) = std::sqrt(2.0 / 3.0);
    d_minus(mi, ni + mi) = std::sqrt(2.0 / 3.0);
  }
  const auto lines = transition_table(iso, b);
  const double pop = 1.0 / g.dim();
  for (int ig = 0; ig < g.dim(); ++ig)
    for (int ie = 0; ie < e.dim(); ++ie) {
      const double amp_p = e.states.col(ie).dot(d_plus * g.states.col(ig));
      const double amp_m = e.states.col(ie).dot(d_minus * g.states.col(ig));
      const double sp = pop * amp_p * amp_p;
      const double sm = pop * amp_m * amp_m;
      if (sp < 1e-14 && sm < 1e-14) continue;
      const double freq = iso.d1_frequency_Hz + e.energy_Hz(ie) - g.energy_Hz(ig);
      bool found = false;
      for (const TransitionLine& l : lines)
        if (std::abs(l.frequency_Hz - freq) < 1.0 &&
            std::abs(l.sigma_plus - sp) <= 1e-12 &&
            std::abs(l.sigma_minus - sm) <= 1e-12)
          found = true;
      CHECK(found);
    }
}

TEST_CASE("vapor density behaves like the published formula") {
  // strictly increasing
  double prev = 0.0;
  for (double t = 20.0; t <= 90.0; t += 2.5) {
    const double n = vapor_density(t);
    CHECK(n > prev);
    prev = n;
  }
  // independent evaluation at 70 C: P = 10^(2.881+4.312-4040/T) torr
  const double t_K = 70.0 + 273.15;
  const double p_pa = std::pow(10.0, 2.881 + 4.312 - 4040.0 / t_K) * 101325.0 / 760.0;
  CHECK(vapor_density(70.0) == doctest::Approx(p_pa / (kBoltzmann * t_K)).epsilon(1e-12));
  CHECK(vapor_density(83.0) / vapor_density(22.0) > 50.0);
  CHECK_THROWS_AS(vapor_density(-5.0), std::invalid_argument);
  CHECK_THROWS_AS(vapor_density(200.0), std::invalid_argument);
}

TEST_CASE("complex index limits") {
  CellConfig cfg;
  const double nu = probe_frequency_Hz();
  SUBCASE("empty cell gives unit index") {
    CellConfig empty = cfg;
    empty.rb85_abundance = 0.0;
    const IndexPair n = complex_index(rb85(), empty, nu, 0.02);
    CHECK(std::abs(n.n_plus - 1.0) == 0.0);
    CHECK(std::abs(n.n_minus - 1.0) == 0.0);
  }
  SUBCASE("zero field gives circular symmetry") {
    for (const IsotopeConstants* iso : cell_species()) {
      const IndexPair n = complex_index(*iso, cfg, nu + 3.0e8, 0.0);
      CHECK(std::abs(n.n_plus - n.n_minus) <= 1e-15);
    }
  }
  SUBCASE("passive medium everywhere") {
    for (double det : {-2e9, 0.0, 1.5e9})
      for (double b : {0.0, 0.024, 0.058})
        for (const IsotopeConstants* iso : cell_species()) {
          const IndexPair n = complex_index(*iso, cfg, nu + det, b);
          CHECK(n.n_plus.imag() >= 0.0);
          CHECK(n.n_minus.imag() >= 0.0);
        }
  }
}

TEST_CASE("85Rb dominates the phase and rotates opposite to 87Rb") {
  CellConfig cfg;
  const TransferCoefficients t = cell_transmission(cfg, probe_frequency_Hz(), 0.010);
  const double ph85 = std::arg(t.t85_plus);
  const double ph87 = std::arg(t.t87_plus);
  CHECK(std::abs(ph85 / ph87) > 30.0);
  CHECK(std::abs(ph85 / ph87) < 300.0);
  const double rot85 = 0.5 * std::arg(t.t85_minus / t.t85_plus);
  const double rot87 = 0.5 * std::arg(t.t87_minus / t.t87_plus);
  CHECK(rot85 * rot87 < 0.0);
}

TEST_CASE("cell transmission contract") {
  CellConfig cfg;
  const double nu = probe_frequency_Hz();
  SUBCASE("near unity far detuned at room temperature") {
    CellConfig cold = cfg;
    cold.temperature_C = 22.0;
    const TransferCoefficients t = cell_transmission(cold, nu, 0.0);
    CHECK(std::norm(t.t_plus) > 0.99);
    CHECK(std::norm(t.t_minus) > 0.99);
    // and even on resonance the cold cell dips are shallow
    const CellResponse cell(cold, 0.0);
    double tmin = 2.0;
    for (double d = -5e9; d <= 6.5e9; d += 20e6) {
      const TransferCoefficients td = cell.transmission(rb85().d1_frequency_Hz + d);
      tmin = std::min(tmin, 0.5 * (std::norm(td.t_plus) + std::norm(td.t_minus)));
    }
    CHECK(tmin > 0.5);
  }
  SUBCASE("no rotation at zero field") {
    const TransferCoefficients t = cell_transmission(cfg, nu, 0.0);
    CHECK(t.faraday_angle() == 0.0);
    CHECK(std::abs(t.t_plus - t.t_minus) <= 1e-13);
  }
  SUBCASE("Simpson refinement: 51 vs 201 slices") {
    CellConfig c51 = cfg, c201 = cfg;
    c51.slices = 51;
    c201.slices = 201;
    for (double b : {0.012, 0.024}) {
      const TransferCoefficients a = cell_transmission(c51, nu, b);
      const TransferCoefficients r = cell_transmission(c201, nu, b);
      CHECK(std::abs(a.t_plus - r.t_plus) <= 1e-8 * std::abs(r.t_plus));
      CHECK(std::abs(a.t_minus - r.t_minus) <= 1e-8 * std::abs(r.t_minus));
    }
    // the strongest-rotation end of the scan converges a factor few slower
    for (double b : {0.037, 0.049}) {
      const TransferCoefficients a = cell_transmission(c51, nu, b);
      const TransferCoefficients r = cell_transmission(c201, nu, b);
      CHECK(std::abs(a.t_minus - r.t_minus) <= 5e-8 * std::abs(r.t_minus));
    }
  }
  SUBCASE("per-isotope factorization and passivity on a scan") {
    for (double b : {0.0, 0.012, 0.031, 0.058})
      for (double det : {-1e9, 0.0, 2e9}) {
        const TransferCoefficients t = cell_transmission(cfg, nu + det, b);
        CHECK(std::abs(t.t_plus - t.t85_plus * t.t87_plus) <=
              1e-12 * std::abs(t.t_plus));
        CHECK(std::abs(t.t_minus - t.t85_minus * t.t87_minus) <=
              1e-12 * std::abs(t.t_minus));
        for (cplx v : {t.t_plus, t.t_minus, t.t85_plus, t.t85_minus, t.t87_plus,
                       t.t87_minus})
          CHECK(std::abs(v) <= 1.0 + 1e-12);
      }
  }
  SUBCASE("reversing the field swaps the circular polarizations") {
    const TransferCoefficients a = cell_transmission(cfg, nu, 0.03);
    const TransferCoefficients b = cell_transmission(cfg, nu, -0.03);
    CHECK(std::abs(a.t_plus - b.t_minus) <= 1e-14);
    CHECK(std::abs(a.t_minus - b.t_plus) <= 1e-14);
  }
  SUBCASE("config validation") {
    CellConfig bad = cfg;
    bad.slices = 4;
    CHECK_THROWS_AS(cell_transmission(bad, nu, 0.0), std::invalid_argument);
    bad = cfg;
    bad.field_drop = 1.0;
    CHECK_THROWS_AS(cell_transmission(bad, nu, 0.0), std::invalid_argument);
  }
}

TEST_CASE("shipped constants file matches the embedded table") {
  const std::string path = std::string(NOONPROBE_SOURCE_DIR) + "/data/rb_constants.txt";
  std::ifstream in(path);
  REQUIRE(in.good());
  std::map<std::string, double> file_values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    const size_t hash = line.find('#');
    REQUIRE(eq != std::string::npos);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1, hash - eq - 1);
    key.erase(key.find_last_not_of(' ') + 1);
    file_values[key] = std::stod(value);
  }
  const auto table = constants_table();
  CHECK(file_values.size() == table.size());
  for (const ConstantRecord& rec : table) {
    REQUIRE(file_values.count(rec.key) == 1);
    CHECK(file_values[rec.key] == rec.value);  // exact: file uses round-trip floats
  }
}

TEST_CASE("isotope table invariants") {
  CHECK(rb85().nuclear_spin == 2.5);
  CHECK(rb87().nuclear_spin == 1.5);
  double total_abundance = 0.0;
  for (const IsotopeConstants* iso : cell_species()) {
    total_abundance += iso->abundance;
    CHECK(iso->d1_frequency_Hz > 0.0);
    CHECK(iso->natural_width_Hz > 0.0);
    CHECK(iso->mass_kg > 0.0);
    CHECK(iso->ahfs_ground_Hz > 0.0);
    CHECK(iso->ground_dim() == 2 * (2 * iso->nuclear_spin + 1));
  }
  CHECK(total_abundance == doctest::Approx(1.0).epsilon(1e-12));
}
