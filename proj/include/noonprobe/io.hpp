#pragma once

// Run configuration, the TOML-style config file, CSV and JSON serialization.
// Files speak mT, degrees C and MHz; everything internal is SI.  All writers
// are deterministic (fixed key order, fixed float formatting) and go through
// an atomic temp-then-rename so interrupted runs never leave partial files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "noonprobe/metrology.hpp"
#include "noonprobe/polarimetry.hpp"
#include "noonprobe/tomography.hpp"

namespace noonprobe {

struct ParseError : std::runtime_error {
  int line;
  ParseError(const std::string& what, int line_no)
      : std::runtime_error(what), line(line_no) {}
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// run configuration

struct RunConfig {
  CellConfig cell;
  double probe_detuning_Hz = 0.0;  // offset from the 87Rb F=2 -> F'=1 line

  double scan_b_min_T = 0.0;
  double scan_b_max_T = 0.050;
  int scan_points = 201;

  double noon_phi = 0.22;
  double noon_fidelity = 0.90;

  FisherOptions fisher;
  EfficiencyModel efficiency;

  double advantage_field_T = 0.037;
  bool advantage_optimize_phi = true;

  double pair_rate = 1.0e5;  // pairs/s for simulation and rate columns
  double t_int_s = 1.0;

  std::vector<double> spectra_temperatures_C{22.0, 53.0, 83.0};
  std::vector<double> spectra_fields_T{0.0, 0.012, 0.024, 0.037, 0.049, 0.058};
  double spectra_min_Hz = -5.0e9;  // relative to the 85Rb D1 centroid
  double spectra_max_Hz = 6.5e9;
  int spectra_points = 1151;

  std::uint64_t seed = 1;
  int threads = 1;
  bool lossless = false;
  bool pure_rb85 = false;
  std::string out_dir = "out";

  double probe_frequency() const { return probe_frequency_Hz() + probe_detuning_Hz; }

  ChannelModel channel() const {
    return ChannelModel{cell, probe_frequency(), lossless, pure_rb85};
  }

  std::vector<double> field_grid() const {
    if (scan_points < 2 || !(scan_b_max_T > scan_b_min_T))
      throw std::invalid_argument("scan grid must be increasing with >= 2 points");
    std::vector<double> g(scan_points);
    for (int i = 0; i < scan_points; ++i)
      g[i] = scan_b_min_T +
             (scan_b_max_T - scan_b_min_T) * i / double(scan_points - 1);
    return g;
  }

  TwoPhotonState noon_state() const {
    return make_noon_state(noon_phi, knob_for_fidelity(noon_fidelity));
  }

  void validate() const {
    cell.validate();
    efficiency.validate();
    if (noon_fidelity < 1.0 / 3.0 || noon_fidelity > 1.0)
      throw std::invalid_argument("noon_fidelity must lie in [1/3, 1]");
    if (!(fisher.step_T > 0.0)) throw std::invalid_argument("fisher step must be > 0");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (scan_points < 2) throw std::invalid_argument("scan needs >= 2 points");
  }
};

namespace detail {

struct ConfigLine {
  std::string section, key, value;
  int line_no = 0;
};

inline std::vector<ConfigLine> parse_config_lines(const std::string& text) {
  std::vector<ConfigLine> out;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const size_t a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    const size_t b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("unterminated section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected 'key = value'", line_no);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError("empty key or value", line_no);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    out.push_back({section, key, value, line_no});
  }
  return out;
}

inline double config_number(const ConfigLine& l) {
  try {
    size_t used = 0;
    const double v = std::stod(l.value, &used);
    if (used != l.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ParseError("expected a number for '" + l.key + "'", l.line_no);
  }
}

inline bool config_bool(const ConfigLine& l) {
  if (l.value == "true") return true;
  if (l.value == "false") return false;
  throw ParseError("expected true/false for '" + l.key + "'", l.line_no);
}

inline std::vector<double> config_list(const ConfigLine& l) {
  std::vector<double> out;
  std::istringstream ss(l.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw ParseError("expected a comma-separated number list for '" + l.key + "'",
                       l.line_no);
    }
  }
  if (out.empty()) throw ParseError("empty list for '" + l.key + "'", l.line_no);
  return out;
}

}  // namespace detail

inline RunConfig config_from_text(const std::string& text) {
  RunConfig cfg;
  for (const detail::ConfigLine& l : detail::parse_config_lines(text)) {
    const std::string id = l.section + "." + l.key;
    if (id == "cell.length_mm") cfg.cell.length_m = detail::config_number(l) * 1e-3;
    else if (id == "cell.temperature_C") cfg.cell.temperature_C = detail::config_number(l);
    else if (id == "cell.rb85_abundance") cfg.cell.rb85_abundance = detail::config_number(l);
    else if (id == "cell.rb87_abundance") cfg.cell.rb87_abundance = detail::config_number(l);
    else if (id == "cell.field_drop") cfg.cell.field_drop = detail::config_number(l);
    else if (id == "cell.slices") cfg.cell.slices = static_cast<int>(detail::config_number(l));
    else if (id == "probe.detuning_MHz") cfg.probe_detuning_Hz = detail::config_number(l) * 1e6;
    else if (id == "scan.b_min_mT") cfg.scan_b_min_T = detail::config_number(l) * 1e-3;
    else if (id == "scan.b_max_mT") cfg.scan_b_max_T = detail::config_number(l) * 1e-3;
    else if (id == "scan.points") cfg.scan_points = static_cast<int>(detail::config_number(l));
    else if (id == "state.noon_phi_rad") cfg.noon_phi = detail::config_number(l);
    else if (id == "state.noon_fidelity") cfg.noon_fidelity = detail::config_number(l);
    else if (id == "fisher.step_uT") cfg.fisher.step_T = detail::config_number(l) * 1e-6;
    else if (id == "fisher.include_noclick") cfg.fisher.include_noclick = detail::config_bool(l);
    else if (id == "efficiency.eta_det") cfg.efficiency.eta_det = detail::config_number(l);
    else if (id == "efficiency.eta_path") cfg.efficiency.eta_path = detail::config_number(l);
    else if (id == "advantage.field_mT") cfg.advantage_field_T = detail::config_number(l) * 1e-3;
    else if (id == "advantage.optimize_phi") cfg.advantage_optimize_phi = detail::config_bool(l);
    else if (id == "tomo.pair_rate_per_s") cfg.pair_rate = detail::config_number(l);
    else if (id == "tomo.t_int_s") cfg.t_int_s = detail::config_number(l);
    else if (id == "spectra.temperatures_C") cfg.spectra_temperatures_C = detail::config_list(l);
    else if (id == "spectra.fields_mT") {
      cfg.spectra_fields_T.clear();
      for (double mt : detail::config_list(l)) cfg.spectra_fields_T.push_back(mt * 1e-3);
    } else if (id == "spectra.detuning_min_MHz") cfg.spectra_min_Hz = detail::config_number(l) * 1e6;
    else if (id == "spectra.detuning_max_MHz") cfg.spectra_max_Hz = detail::config_number(l) * 1e6;
    else if (id == "spectra.points") cfg.spectra_points = static_cast<int>(detail::config_number(l));
    else if (id == "run.seed") cfg.seed = static_cast<std::uint64_t>(detail::config_number(l));
    else if (id == "run.threads") cfg.threads = static_cast<int>(detail::config_number(l));
    else if (id == "run.lossless") cfg.lossless = detail::config_bool(l);
    else if (id == "run.pure_rb85") cfg.pure_rb85 = detail::config_bool(l);
    else if (id == "run.out_dir") cfg.out_dir = l.value;
    else throw ParseError("unknown configuration key '" + id + "'", l.line_no);
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  return config_from_text(read_file(path));
}

inline std::string config_to_text(const RunConfig& c) {
  std::ostringstream o;
  auto num = [](double v) { return format_double(v); };
  o << "[cell]\n";
  o << "length_mm = " << num(c.cell.length_m * 1e3) << "\n";
  o << "temperature_C = " << num(c.cell.temperature_C) << "\n";
  o << "rb85_abundance = " << num(c.cell.rb85_abundance) << "\n";
  o << "rb87_abundance = " << num(c.cell.rb87_abundance) << "\n";
  o << "field_drop = " << num(c.cell.field_drop) << "\n";
  o << "slices = " << c.cell.slices << "\n";
  o << "\n[probe]\n";
  o << "detuning_MHz = " << num(c.probe_detuning_Hz / 1e6) << "\n";
  o << "\n[scan]\n";
  o << "b_min_mT = " << num(c.scan_b_min_T * 1e3) << "\n";
  o << "b_max_mT = " << num(c.scan_b_max_T * 1e3) << "\n";
  o << "points = " << c.scan_points << "\n";
  o << "\n[state]\n";
  o << "noon_phi_rad = " << num(c.noon_phi) << "\n";
  o << "noon_fidelity = " << num(c.noon_fidelity) << "\n";
  o << "\n[fisher]\n";
  o << "step_uT = " << num(c.fisher.step_T * 1e6) << "\n";
  o << "include_noclick = " << (c.fisher.include_noclick ? "true" : "false") << "\n";
  o << "\n[efficiency]\n";
  o << "eta_det = " << num(c.efficiency.eta_det) << "\n";
  o << "eta_path = " << num(c.efficiency.eta_path) << "\n";
  o << "\n[advantage]\n";
  o << "field_mT = " << num(c.advantage_field_T * 1e3) << "\n";
  o << "optimize_phi = " << (c.advantage_optimize_phi ? "true" : "false") << "\n";
  o << "\n[tomo]\n";
  o << "pair_rate_per_s = " << num(c.pair_rate) << "\n";
  o << "t_int_s = " << num(c.t_int_s) << "\n";
  o << "\n[spectra]\n";
  o << "temperatures_C = ";
  for (size_t i = 0; i < c.spectra_temperatures_C.size(); ++i)
    o << (i ? "," : "") << num(c.spectra_temperatures_C[i]);
  o << "\nfields_mT = ";
  for (size_t i = 0; i < c.spectra_fields_T.size(); ++i)
    o << (i ? "," : "") << num(c.spectra_fields_T[i] * 1e3);
  o << "\ndetuning_min_MHz = " << num(c.spectra_min_Hz / 1e6) << "\n";
  o << "detuning_max_MHz = " << num(c.spectra_max_Hz / 1e6) << "\n";
  o << "points = " << c.spectra_points << "\n";
  o << "\n[run]\n";
  o << "seed = " << c.seed << "\n";
  o << "threads = " << c.threads << "\n";
  o << "lossless = " << (c.lossless ? "true" : "false") << "\n";
  o << "pure_rb85 = " << (c.pure_rb85 ? "true" : "false") << "\n";
  o << "out_dir = \"" << c.out_dir << "\"\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// CSV

inline std::string fringe_table_to_csv(const FringeTable& table) {
  std::ostringstream o;
  o << "B_mT,P_HH,P_HV,P_VV,P_H,P_V,R_HH,R_HV,R_VV\n";
  for (const FringePoint& p : table.points) {
    o << format_double(p.field_T * 1e3) << ',' << format_double(p.pairs.hh) << ','
      << format_double(p.pairs.hv) << ',' << format_double(p.pairs.vv) << ','
      << format_double(p.p_h) << ',' << format_double(p.p_v) << ','
      << format_double(p.rate_hh) << ',' << format_double(p.rate_hv) << ','
      << format_double(p.rate_vv) << '\n';
  }
  return o.str();
}

inline std::string fisher_curve_to_csv(const FisherCurve& curve) {
  std::ostringstream o;
  o << "B_mT,P_HH,P_HV,P_VV,FI_total,FI_HH,FI_HV,FI_VV,S,FI_over_S\n";
  for (const FisherPoint& p : curve.points) {
    o << format_double(p.field_T * 1e3) << ',' << format_double(p.probs.hh) << ','
      << format_double(p.probs.hv) << ',' << format_double(p.probs.vv) << ','
      << format_double(p.fi_total) << ',' << format_double(p.fi_outcome[0]) << ','
      << format_double(p.fi_outcome[1]) << ',' << format_double(p.fi_outcome[2]) << ','
      << format_double(p.scattering) << ',' << format_double(p.fi_per_scatter) << '\n';
  }
  return o.str();
}

inline std::string dataset_to_csv(const CoincidenceDataset& data) {
  std::ostringstream o;
  const bool singles = !data.points.empty() && data.points.front().has_singles;
  o << "B_mT,t_int_s,N_HH,N_HV,N_VV";
  if (singles) o << ",N_H,N_V";
  o << '\n';
  for (const CoincidencePoint& p : data.points) {
    o << format_double(p.field_T * 1e3) << ',' << format_double(p.t_int_s) << ','
      << format_double(p.n_hh) << ',' << format_double(p.n_hv) << ','
      << format_double(p.n_vv);
    if (singles) o << ',' << format_double(p.n_h) << ',' << format_double(p.n_v);
    o << '\n';
  }
  return o.str();
}

inline CoincidenceDataset dataset_from_csv(const std::string& text) {
  CoincidenceDataset data;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool singles = false;
  if (!std::getline(in, line)) throw ParseError("empty dataset file", 1);
  ++line_no;
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  if (line == "B_mT,t_int_s,N_HH,N_HV,N_VV,N_H,N_V") singles = true;
  else if (line != "B_mT,t_int_s,N_HH,N_HV,N_VV")
    throw ParseError("bad header, expected 'B_mT,t_int_s,N_HH,N_HV,N_VV[,N_H,N_V]'", 1);
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    std::vector<double> vals;
    std::istringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        size_t used = 0;
        vals.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument("");
      } catch (...) {
        throw ParseError("field " + std::to_string(vals.size() + 1) + " is not a number",
                         line_no);
      }
    }
    const size_t want = singles ? 7 : 5;
    if (vals.size() != want)
      throw ParseError("expected " + std::to_string(want) + " fields, got " +
                           std::to_string(vals.size()),
                       line_no);
    CoincidencePoint p;
    p.field_T = vals[0] * 1e-3;
    p.t_int_s = vals[1];
    p.n_hh = vals[2];
    p.n_hv = vals[3];
    p.n_vv = vals[4];
    if (singles) {
      p.has_singles = true;
      p.n_h = vals[5];
      p.n_v = vals[6];
    }
    if (p.n_hh < 0 || p.n_hv < 0 || p.n_vv < 0)
      throw ParseError("negative counts", line_no);
    if (!(p.t_int_s > 0)) throw ParseError("non-positive integration time", line_no);
    data.points.push_back(p);
  }
  if (data.points.empty()) throw ParseError("dataset has no rows", line_no);
  return data;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json matrix_to_json(const Eigen::Matrix4cd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      rows.push_back({m(i, j).real(), m(i, j).imag()});
  return rows;
}

inline Eigen::Matrix4cd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 16)
    throw std::runtime_error("state matrix must have 16 complex entries");
  Eigen::Matrix4cd m;
  for (int k = 0; k < 16; ++k)
    m(k / 4, k % 4) = cplx(j[k][0].get<double>(), j[k][1].get<double>());
  return m;
}

inline nlohmann::json state_to_json(const TwoPhotonState& s) {
  return {{"basis", s.basis == PolBasis::HV ? "HV" : "CIRC"},
          {"rho", matrix_to_json(s.rho)}};
}

inline TwoPhotonState state_from_json(const nlohmann::json& j) {
  TwoPhotonState s;
  const std::string basis = j.at("basis").get<std::string>();
  if (basis == "HV") s.basis = PolBasis::HV;
  else if (basis == "CIRC") s.basis = PolBasis::Circ;
  else throw std::runtime_error("unknown basis tag '" + basis + "'");
  s.rho = matrix_from_json(j.at("rho"));
  return s;
}

inline nlohmann::json sql_to_json(const SqlResult& r) {
  return {{"B_mT", r.field_T * 1e3},
          {"objective", r.objective == SqlObjective::FiPerPhoton ? "fi_per_photon"
                                                                 : "fi_per_scatter"},
          {"objective_value", r.objective_value},
          {"fisher", r.fisher},
          {"scattering", r.scattering},
          {"fi_per_scatter", r.fi_per_scatter},
          {"input_angles_rad", {r.input_angles[0], r.input_angles[1]}},
          {"analyzer_angles_rad", {r.analyzer_angles[0], r.analyzer_angles[1]}},
          {"restart_values", r.restart_values},
          {"converged", r.converged}};
}

inline nlohmann::json advantage_to_json(const AdvantageReport& r) {
  return {{"B_mT", r.field_T * 1e3},
          {"fi_noon", r.fi_noon},
          {"scatter_noon", r.scatter_noon},
          {"fi_noon_pure85", r.fi_noon_pure85},
          {"scatter_noon_pure85", r.scatter_noon_pure85},
          {"per_photon", r.per_photon},
          {"per_scatter", r.per_scatter},
          {"per_scatter_pure85", r.per_scatter_pure85},
          {"eta_det", r.efficiency.eta_det},
          {"eta_path", r.efficiency.eta_path},
          {"eta_ex", r.efficiency.eta_ex()},
          {"adjusted_per_photon", r.adj_per_photon},
          {"adjusted_per_scatter", r.adj_per_scatter},
          {"adjusted_per_scatter_pure85", r.adj_per_scatter_pure85},
          {"sql_per_photon", sql_to_json(r.sql_photon)},
          {"sql_per_scatter", sql_to_json(r.sql_scatter)},
          {"sql_per_scatter_pure85", sql_to_json(r.sql_scatter_pure85)}};
}

inline nlohmann::json tomography_to_json(const TomographyResult& r,
                                         const std::array<double, 2>* fi_band = nullptr,
                                         double fi_band_field_T = 0.0) {
  nlohmann::json j{{"state", state_to_json(r.rho_hat)},
                   {"chi2", r.chi2},
                   {"rate_per_s", r.rate_hat},
                   {"purity", r.metrics.purity},
                   {"noon_fidelity", r.metrics.noon_fidelity},
                   {"noon_phi_rad", r.fitted_phi},
                   {"distinguishability", r.metrics.distinguishability},
                   {"residuals", r.residuals},
                   {"restart_chi2", r.restart_chi2},
                   {"converged", r.converged},
                   {"identifiability_warning", r.identifiability_warning}};
  if (fi_band) {
    j["fi_band"] = {{"B_mT", fi_band_field_T * 1e3},
                    {"fi_min", (*fi_band)[0]},
                    {"fi_max", (*fi_band)[1]}};
  }
  return j;
}

}  // namespace noonprobe
