// Command-line front end: reproducible spectra, fringe, Fisher/SQL,
// advantage and tomography runs with CSV/JSON/SVG outputs.
//
// Exit codes: 0 success, 1 numerical or optimizer failure, 2 input error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "noonprobe/io.hpp"
#include "noonprobe/svg.hpp"

namespace fs = std::filesystem;
using namespace noonprobe;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<double> temp_C;
  std::optional<double> bmax_mT;
  std::optional<int> grid;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  bool pure_rb85 = false;
  bool lossless = false;
  bool include_noclick = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "configuration file (TOML-style)");
  cmd->add_option("--temp", f.temp_C, "cell temperature, deg C");
  cmd->add_option("--bmax", f.bmax_mT, "scan maximum field, mT");
  cmd->add_option("--grid", f.grid, "number of scan points");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--threads", f.threads, "worker threads for grid evaluation");
  cmd->add_flag("--pure-rb85", f.pure_rb85, "remove the 87Rb admixture from the channel");
  cmd->add_flag("--lossless", f.lossless, "keep only the phases of the cell channel");
  cmd->add_flag("--include-noclick", f.include_noclick,
                "count the no-detection event as a Fisher outcome");
}

RunConfig effective_config(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) cfg = load_config(f.config_path);
  if (f.temp_C) cfg.cell.temperature_C = *f.temp_C;
  if (f.bmax_mT) cfg.scan_b_max_T = *f.bmax_mT * 1e-3;
  if (f.grid) cfg.scan_points = *f.grid;
  if (f.seed) cfg.seed = *f.seed;
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  if (f.threads) cfg.threads = *f.threads;
  if (f.pure_rb85) cfg.pure_rb85 = true;
  if (f.lossless) cfg.lossless = true;
  if (f.include_noclick) cfg.fisher.include_noclick = true;
  cfg.validate();
  return cfg;
}

void echo_config(const RunConfig& cfg) {
  write_file_atomic(fs::path(cfg.out_dir) / "config_echo.toml", config_to_text(cfg));
}

std::string tag_number(double v) {
  std::string s = format_double(v);
  for (char& c : s)
    if (c == '.' || c == '-') c = c == '.' ? 'p' : 'm';
  return s;
}

int cmd_spectra(const RunConfig& cfg) {
  echo_config(cfg);
  const double ref = rb85().d1_frequency_Hz;
  for (double temp : cfg.spectra_temperatures_C) {
    CellConfig cell = cfg.cell;
    cell.temperature_C = temp;
    if (cfg.pure_rb85) cell.rb87_abundance = 0.0;
    SvgPlot plot("Transmission spectra, " + format_double(temp) + " C",
                 "detuning from 85Rb D1 centroid (MHz)", "transmission");
    for (double field : cfg.spectra_fields_T) {
      const CellResponse cell_response(cell, field);
      std::vector<double> det(cfg.spectra_points), trans(cfg.spectra_points);
      std::vector<double> tp(cfg.spectra_points), tm(cfg.spectra_points);
      parallel_for(cfg.spectra_points, cfg.threads, [&](std::size_t i) {
        const double d = cfg.spectra_min_Hz +
                         (cfg.spectra_max_Hz - cfg.spectra_min_Hz) * i /
                             double(cfg.spectra_points - 1);
        const TransferCoefficients t = cell_response.transmission(ref + d);
        det[i] = d / 1e6;
        tp[i] = std::norm(t.t_plus);
        tm[i] = std::norm(t.t_minus);
        trans[i] = 0.5 * (tp[i] + tm[i]);
      });
      std::ostringstream csv;
      csv << "detuning_MHz,transmission,trans_sigma_plus,trans_sigma_minus\n";
      for (int i = 0; i < cfg.spectra_points; ++i)
        csv << format_double(det[i]) << ',' << format_double(trans[i]) << ','
            << format_double(tp[i]) << ',' << format_double(tm[i]) << '\n';
      const std::string name = "spectrum_T" + tag_number(temp) + "C_B" +
                               tag_number(field * 1e3) + "mT.csv";
      write_file_atomic(fs::path(cfg.out_dir) / name, csv.str());
      plot.add_series("B = " + format_double(field * 1e3) + " mT", det, trans);
    }
    write_file_atomic(fs::path(cfg.out_dir) / ("spectra_T" + tag_number(temp) + "C.svg"),
                      plot.render());
  }
  return 0;
}

int cmd_fringes(const RunConfig& cfg) {
  echo_config(cfg);
  const ChannelModel channel = cfg.channel();
  const std::vector<double> grid = cfg.field_grid();
  // per-point channels computed in parallel, then assembled in order
  std::vector<TransferCoefficients> ts(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) { ts[i] = channel(grid[i]); });
  size_t cursor = 0;
  const FringeTable table = fringe_scan(
      cfg.noon_state(), [&](double) { return ts[cursor++]; }, grid, cfg.pair_rate, true);
  write_file_atomic(fs::path(cfg.out_dir) / "fringes.csv", fringe_table_to_csv(table));
  SvgPlot plot("Coincidence and singles fringes", "B (mT)", "probability");
  std::vector<double> x, hh, hv, vv, pv;
  for (const FringePoint& p : table.points) {
    x.push_back(p.field_T * 1e3);
    hh.push_back(p.pairs.hh);
    hv.push_back(p.pairs.hv);
    vv.push_back(p.pairs.vv);
    pv.push_back(p.p_v);
  }
  plot.add_series("P_HH", x, hh);
  plot.add_series("P_HV", x, hv);
  plot.add_series("P_VV", x, vv);
  plot.add_series("P_V singles", x, pv);
  write_file_atomic(fs::path(cfg.out_dir) / "fringes.svg", plot.render());
  return 0;
}

int cmd_fisher(const RunConfig& cfg) {
  echo_config(cfg);
  const ChannelModel channel = cfg.channel();
  const FisherCurve curve = fisher_curve(cfg.noon_state(), channel, cfg.field_grid(),
                                         cfg.fisher, cfg.threads);
  write_file_atomic(fs::path(cfg.out_dir) / "fisher.csv", fisher_curve_to_csv(curve));
  SvgPlot plot("NOON-state Fisher information", "B (mT)", "FI (1/T^2)");
  std::vector<double> x, fi, fhh, fhv, fvv;
  for (const FisherPoint& p : curve.points) {
    x.push_back(p.field_T * 1e3);
    fi.push_back(p.fi_total);
    fhh.push_back(p.fi_outcome[0]);
    fhv.push_back(p.fi_outcome[1]);
    fvv.push_back(p.fi_outcome[2]);
  }
  plot.add_series("FI total", x, fi);
  plot.add_series("FI HH", x, fhh);
  plot.add_series("FI HV", x, fhv);
  plot.add_series("FI VV", x, fvv);
  write_file_atomic(fs::path(cfg.out_dir) / "fisher.svg", plot.render());
  return 0;
}

int cmd_sql(const RunConfig& cfg) {
  echo_config(cfg);
  const ChannelModel channel = cfg.channel();
  const std::vector<double> grid = cfg.field_grid();
  SqlOptions opt;
  opt.fisher = cfg.fisher;
  opt.seed = cfg.seed;
  std::vector<SqlResult> photon(grid.size()), scatter(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
    photon[i] = sql_optimize(channel, grid[i], SqlObjective::FiPerPhoton, opt);
    scatter[i] = sql_optimize(channel, grid[i], SqlObjective::FiPerScatter, opt);
  });
  bool all_converged = true;
  std::ostringstream csv;
  csv << "B_mT,FI_sql,S_sql,FI_over_S_sql,input_theta,input_phi,analyzer_theta,analyzer_phi\n";
  json trace = json::array();
  for (size_t i = 0; i < grid.size(); ++i) {
    all_converged = all_converged && photon[i].converged && scatter[i].converged;
    csv << format_double(grid[i] * 1e3) << ',' << format_double(photon[i].fisher) << ','
        << format_double(photon[i].scattering) << ','
        << format_double(scatter[i].fi_per_scatter) << ','
        << format_double(photon[i].input_angles[0]) << ','
        << format_double(photon[i].input_angles[1]) << ','
        << format_double(photon[i].analyzer_angles[0]) << ','
        << format_double(photon[i].analyzer_angles[1]) << '\n';
    trace.push_back({{"per_photon", sql_to_json(photon[i])},
                     {"per_scatter", sql_to_json(scatter[i])}});
  }
  write_file_atomic(fs::path(cfg.out_dir) / "sql.csv", csv.str());
  write_file_atomic(fs::path(cfg.out_dir) / "sql.json", trace.dump(2) + "\n");
  SvgPlot plot("Standard quantum limit", "B (mT)", "FI (1/T^2)");
  std::vector<double> x, fi;
  for (size_t i = 0; i < grid.size(); ++i) {
    x.push_back(grid[i] * 1e3);
    fi.push_back(photon[i].fisher);
  }
  plot.add_series("FI SQL", x, fi);
  write_file_atomic(fs::path(cfg.out_dir) / "sql.svg", plot.render());
  if (!all_converged) throw std::runtime_error("SQL optimizer failed to converge");
  return 0;
}

int cmd_advantage(const RunConfig& cfg) {
  echo_config(cfg);
  const ChannelModel channel = cfg.channel();
  const double field = cfg.advantage_field_T;
  double phi = cfg.noon_phi;
  if (cfg.advantage_optimize_phi)
    phi = optimize_noon_phase(channel, field, knob_for_fidelity(cfg.noon_fidelity),
                              cfg.fisher);
  SqlOptions opt;
  opt.fisher = cfg.fisher;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  const TwoPhotonState noon = make_noon_state(phi, knob_for_fidelity(cfg.noon_fidelity));
  const AdvantageReport rep =
      advantage_ratios(channel, field, noon, opt, cfg.efficiency);
  json j = advantage_to_json(rep);
  j["noon_phi_rad"] = phi;
  j["noon_fidelity"] = cfg.noon_fidelity;
  j["phi_optimized"] = cfg.advantage_optimize_phi;
  j["settings"] = {{"temperature_C", cfg.cell.temperature_C},
                   {"lossless", cfg.lossless},
                   {"pure_rb85", cfg.pure_rb85},
                   {"include_noclick", cfg.fisher.include_noclick},
                   {"fisher_step_uT", cfg.fisher.step_T * 1e6}};
  write_file_atomic(fs::path(cfg.out_dir) / "advantage.json", j.dump(2) + "\n");
  std::printf("per-photon advantage          : %.4f\n", rep.per_photon);
  std::printf("per-scatter advantage         : %.4f\n", rep.per_scatter);
  std::printf("per-scatter advantage (no 87) : %.4f\n", rep.per_scatter_pure85);
  std::printf("eta-adjusted per-photon       : %.4f\n", rep.adj_per_photon);
  return 0;
}

int cmd_tomo(const RunConfig& cfg, const std::string& dataset_path, bool simulate,
             int tomo_points) {
  echo_config(cfg);
  const ChannelModel channel = cfg.channel();
  CoincidenceDataset data;
  std::optional<TwoPhotonState> truth;
  if (simulate) {
    if (tomo_points < 8) throw std::invalid_argument("tomo needs >= 8 points");
    std::vector<double> grid(tomo_points);
    for (int i = 0; i < tomo_points; ++i)
      grid[i] = cfg.scan_b_min_T + 0.002 +
                (cfg.scan_b_max_T - cfg.scan_b_min_T - 0.002) * i / double(tomo_points - 1);
    truth = cfg.noon_state();
    data = simulate_counts(*truth, channel, grid, cfg.pair_rate, cfg.t_int_s, cfg.seed,
                           false, cfg.threads);
    data.cell = cfg.cell;
    data.temperature_C = cfg.cell.temperature_C;
    write_file_atomic(fs::path(cfg.out_dir) / "dataset.csv", dataset_to_csv(data));
    write_file_atomic(fs::path(cfg.out_dir) / "true_state.json",
                      state_to_json(*truth).dump(2) + "\n");
  } else {
    try {
      data = dataset_from_csv(read_file(dataset_path));
    } catch (const ParseError& e) {
      throw ParseError(dataset_path + ":" + std::to_string(e.line) + ": " + e.what(),
                       e.line);
    }
    data.cell = cfg.cell;
    data.temperature_C = cfg.cell.temperature_C;
  }
  ReconstructOptions ropt;
  ropt.seed = cfg.seed;
  ropt.threads = cfg.threads;
  const TomographyResult fit = reconstruct(data, channel, ropt);
  FiBandOptions bopt;
  bopt.fisher = cfg.fisher;
  bopt.threads = cfg.threads;
  bopt.seed = cfg.seed + 17;
  const std::array<double, 2> band =
      fi_error_band(fit, data, channel, cfg.advantage_field_T, bopt);
  json j = tomography_to_json(fit, &band, cfg.advantage_field_T);
  if (truth) {
    j["fidelity_to_truth"] = state_fidelity(fit.rho_hat, *truth);
    std::printf("round-trip fidelity = %.6f\n", state_fidelity(fit.rho_hat, *truth));
  }
  write_file_atomic(fs::path(cfg.out_dir) / "tomo_result.json", j.dump(2) + "\n");
  std::printf("chi2 = %.6g, fitted rate = %.6g /s, purity = %.4f, noon fidelity = %.4f\n",
              fit.chi2, fit.rate_hat, fit.metrics.purity, fit.metrics.noon_fidelity);
  if (!fit.converged) throw std::runtime_error("tomography optimizer did not converge");
  if (fit.identifiability_warning)
    std::fprintf(stderr, "warning: restarts reach equal chi2 at different states; "
                         "the dataset may not identify the state\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NOON-state Faraday probing of a rubidium vapor cell"};
  app.require_subcommand(1);

  CommonFlags spectra_flags, fringes_flags, fisher_flags, sql_flags, advantage_flags,
      tomo_flags;
  auto* spectra = app.add_subcommand("spectra", "transmission spectra vs detuning");
  add_common(spectra, spectra_flags);
  auto* fringes = app.add_subcommand("fringes", "coincidence and singles fringes vs B");
  add_common(fringes, fringes_flags);
  auto* fisher = app.add_subcommand("fisher", "NOON Fisher-information curve");
  add_common(fisher, fisher_flags);
  auto* sql = app.add_subcommand("sql", "standard-quantum-limit curve");
  add_common(sql, sql_flags);
  auto* advantage = app.add_subcommand("advantage", "NOON/SQL advantage report");
  add_common(advantage, advantage_flags);
  double advantage_field_mT = -1.0;
  advantage->add_option("--field", advantage_field_mT, "evaluation field, mT");
  auto* tomo = app.add_subcommand("tomo", "state tomography from coincidence counts");
  add_common(tomo, tomo_flags);
  std::string dataset_path;
  bool simulate = false;
  int tomo_points = 20;
  tomo->add_option("dataset", dataset_path, "coincidence dataset CSV");
  tomo->add_flag("--simulate", simulate, "simulate the dataset before fitting");
  tomo->add_option("--points", tomo_points, "simulated dataset size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (spectra->parsed()) return cmd_spectra(effective_config(spectra_flags));
    if (fringes->parsed()) return cmd_fringes(effective_config(fringes_flags));
    if (fisher->parsed()) return cmd_fisher(effective_config(fisher_flags));
    if (sql->parsed()) return cmd_sql(effective_config(sql_flags));
    if (advantage->parsed()) {
      RunConfig cfg = effective_config(advantage_flags);
      if (advantage_field_mT > 0.0) cfg.advantage_field_T = advantage_field_mT * 1e-3;
      return cmd_advantage(cfg);
    }
    if (tomo->parsed()) {
      if (!simulate && dataset_path.empty())
        throw std::invalid_argument("tomo needs a dataset path or --simulate");
      return cmd_tomo(effective_config(tomo_flags), dataset_path, simulate, tomo_points);
    }
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s (line %d)\n", e.what(), e.line);
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 1;
  }
  return 0;
}
