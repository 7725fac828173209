#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "noonprobe/io.hpp"

using namespace noonprobe;

TEST_CASE("config round-trips losslessly through text") {
  RunConfig cfg;
  cfg.cell.temperature_C = 53.25;
  cfg.cell.slices = 81;
  cfg.probe_detuning_Hz = -125.5e6;
  cfg.scan_b_max_T = 0.0585;
  cfg.scan_points = 77;
  cfg.noon_phi = 1.23456789;
  cfg.noon_fidelity = 0.925;
  cfg.fisher.step_T = 2e-6;
  cfg.fisher.include_noclick = true;
  cfg.efficiency.eta_path = 0.9871;
  cfg.advantage_field_T = 0.0412;
  cfg.advantage_optimize_phi = false;
  cfg.pair_rate = 54321.0;
  cfg.spectra_temperatures_C = {20.5, 81.0};
  cfg.spectra_fields_T = {0.001, 0.0335};
  cfg.seed = 987654321;
  cfg.threads = 3;
  cfg.lossless = true;
  cfg.out_dir = "runs/x1";
  const RunConfig back = config_from_text(config_to_text(cfg));
  CHECK(config_to_text(back) == config_to_text(cfg));
  CHECK(back.cell.temperature_C == cfg.cell.temperature_C);
  CHECK(back.probe_detuning_Hz == cfg.probe_detuning_Hz);
  CHECK(back.fisher.step_T == cfg.fisher.step_T);
  CHECK(back.spectra_fields_T == cfg.spectra_fields_T);
  CHECK(back.seed == cfg.seed);
  CHECK(back.out_dir == cfg.out_dir);
}

TEST_CASE("units convert at the file boundary") {
  const RunConfig cfg = config_from_text(
      "[cell]\nlength_mm = 75\ntemperature_C = 70\n[scan]\nb_max_mT = 50\n"
      "[probe]\ndetuning_MHz = 12.5\n[fisher]\nstep_uT = 10\n");
  CHECK(cfg.cell.length_m == doctest::Approx(0.075).epsilon(1e-15));
  CHECK(cfg.scan_b_max_T == doctest::Approx(0.050).epsilon(1e-15));
  CHECK(cfg.probe_detuning_Hz == doctest::Approx(12.5e6).epsilon(1e-15));
  CHECK(cfg.fisher.step_T == doctest::Approx(10e-6).epsilon(1e-15));
}

TEST_CASE("config parser reports the offending line") {
  try {
    config_from_text("[cell]\nlength_mm = 75\nnonsense line\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }
  try {
    config_from_text("[cell]\ntemperature_C = warm\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(config_from_text("[nope]\nkey = 1\n"), ParseError);
}

TEST_CASE("dataset CSV round trip") {
  CoincidenceDataset data;
  for (int i = 0; i < 5; ++i) {
    CoincidencePoint p;
    p.field_T = 0.001 * (i + 1);
    p.t_int_s = 0.5;
    p.n_hh = 100 + i;
    p.n_hv = 50 + i;
    p.n_vv = 75 + i;
    data.points.push_back(p);
  }
  const CoincidenceDataset back = dataset_from_csv(dataset_to_csv(data));
  REQUIRE(back.points.size() == data.points.size());
  for (size_t i = 0; i < data.points.size(); ++i) {
    CHECK(back.points[i].field_T == doctest::Approx(data.points[i].field_T).epsilon(1e-12));
    CHECK(back.points[i].n_hh == data.points[i].n_hh);
    CHECK(back.points[i].has_singles == false);
  }
  SUBCASE("with singles columns") {
    for (CoincidencePoint& p : data.points) {
      p.has_singles = true;
      p.n_h = 11;
      p.n_v = 13;
    }
    const CoincidenceDataset s = dataset_from_csv(dataset_to_csv(data));
    CHECK(s.points.front().has_singles);
    CHECK(s.points.front().n_v == 13);
  }
}

TEST_CASE("malformed dataset CSV fails with a line number") {
  const std::string good = "B_mT,t_int_s,N_HH,N_HV,N_VV\n1,1,10,10,10\n";
  CHECK(dataset_from_csv(good).points.size() == 1);
  try {
    dataset_from_csv("B_mT,t_int_s,N_HH,N_HV,N_VV\n1,1,10,10,10\n2,1,ten,10,10\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }
  try {
    dataset_from_csv("B_mT,t_int_s,N_HH\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
  }
  try {
    dataset_from_csv("B_mT,t_int_s,N_HH,N_HV,N_VV\n1,1,10,10\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(dataset_from_csv("B_mT,t_int_s,N_HH,N_HV,N_VV\n1,0,10,10,10\n"),
                  ParseError);
  CHECK_THROWS_AS(dataset_from_csv("B_mT,t_int_s,N_HH,N_HV,N_VV\n1,1,-4,10,10\n"),
                  ParseError);
}

TEST_CASE("state JSON round trip") {
  const TwoPhotonState s = make_noon_state(0.37, 0.88);
  const TwoPhotonState back = state_from_json(state_to_json(s));
  CHECK(back.basis == s.basis);
  CHECK((back.rho - s.rho).cwiseAbs().maxCoeff() == 0.0);
  const TwoPhotonState hv = s.in_basis(PolBasis::HV);
  const TwoPhotonState back_hv = state_from_json(state_to_json(hv));
  CHECK(back_hv.basis == PolBasis::HV);
}

TEST_CASE("atomic writes land complete files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "noonprobe_io_test";
  fs::remove_all(dir);
  const fs::path file = dir / "nested" / "out.csv";
  write_file_atomic(file, "a,b\n1,2\n");
  CHECK(read_file(file) == "a,b\n1,2\n");
  CHECK(!fs::exists(file.string() + ".tmp"));
  fs::remove_all(dir);
}
