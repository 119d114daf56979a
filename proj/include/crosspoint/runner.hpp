#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "io.hpp"
#include "suites.hpp"

namespace crosspoint {

enum class OutputFormat { csv, json };

inline OutputFormat format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw InvalidArgument("unknown output format '" + s + "' (expected csv or json)");
}

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config_error = 1;
inline constexpr int numerical_error = 2;
inline constexpr int violation = 3;
}  // namespace exit_code

struct RunOutput {
  int status = exit_code::ok;
  json results;
  std::map<std::string, std::string> files;  // file name -> contents
  std::string message;
};

namespace runner {

struct Context {
  json config;
  std::string hash;
  std::uint64_t seed = 0;
  EstimatorConfig est;
  OutputFormat format = OutputFormat::json;
  RunOutput out;
  bool violation = false;

  std::string csv_preamble() const { return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n"; }
  void csv(const std::string& name, const std::string& body) {
    if (format == OutputFormat::csv) out.files[name] = csv_preamble() + body;
  }
};

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline const json& need(const json& cfg, const char* key) {
  if (!cfg.contains(key)) throw InvalidArgument(std::string("config: missing '") + key + "'");
  return cfg.at(key);
}

inline ConditionalInput input_of(const Context& c) { return conditional_from_json(need(c.config, "input")); }

inline ChannelPath path_of(const Context& c, Eigen::Index n) { return path_from_json(c.config.value("path", json{{"kind", "snr"}, {"snr_max", 100.0}}), n); }

inline GainScanGrid grid_of(const Context& c) { return grid_from_json(need(c.config, "grid")); }

inline GaussianInput gaussian_of(const Context& c, const ConditionalInput& cond, bool diagonal_default) {
  const json def = {{"matched", diagonal_default ? "diagonal" : "full"}};
  return gaussian_from_json(c.config.value("gaussian", def), overall_covariance(cond));
}

inline void note_verdicts(Context& c, const std::vector<CrossingReport>& reps) {
  for (const auto& r : reps)
    if (r.verdict == Verdict::violation) c.violation = true;
}

inline std::string overall_verdict(const std::vector<CrossingReport>& reps) {
  Verdict v = Verdict::consistent;
  for (const auto& r : reps) {
    if (r.verdict == Verdict::violation) v = Verdict::violation;
    else if (r.verdict == Verdict::inconclusive && v == Verdict::consistent) v = Verdict::inconclusive;
  }
  return to_string(v);
}

inline std::string matrix_header(const std::string& prefix, Eigen::Index n) {
  std::string h;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) h += "," + prefix + std::to_string(i + 1) + std::to_string(j + 1);
  return h;
}

inline std::string matrix_row(const MatrixXd& m) {
  std::string r;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i; j < m.cols(); ++j) r += "," + num(m(i, j));
  return r;
}

// ---- commands ----

inline void mmse_scan(Context& c) {
  const auto cond = input_of(c);
  const auto path = path_of(c, cond.dim());
  const auto grid = grid_of(c);
  const auto gauss = gaussian_of(c, cond, false);
  const auto qs = q_series(cond, gauss, path, grid.t_values, c.est);
  json pts = json::array();
  std::string body = "t" + matrix_header("e", cond.dim()) + matrix_header("err", cond.dim()) + matrix_header("q", cond.dim()) + "\n";
  for (const auto& q : qs) {
    pts.push_back({{"t", q.t}, {"mmse", to_json(q.mmse)}, {"gaussian_mmse", to_json(q.gaussian_mmse)}, {"q", to_json(q.value)}});
    body += num(q.t) + matrix_row(q.mmse.matrix.matrix()) + matrix_row(q.mmse.std_err) + matrix_row(q.value.matrix()) + "\n";
  }
  c.out.results = {{"points", pts}, {"gaussian_cov", to_json(gauss.covariance)}};
  c.csv("mmse.csv", body);
}

inline void crossing(Context& c) {
  const auto cond = input_of(c);
  const auto grid = grid_of(c);
  const std::string series = c.config.value("series", "diagonal");
  if (series == "weighted") {
    if (cond.conditioned()) throw InvalidArgument("crossing: the weighted series takes an unconditioned input");
    const auto x = cond.branches().front().input;
    const SymMatrix a = sym_from_json(need(c.config, "A"));
    const double sigma2 = need(c.config, "sigma2").get<double>();
    const auto rep = scan_weighted(x, sigma2, a, grid, c.est, c.config.value("gamma_limit", 1e3));
    note_verdicts(c, {rep});
    c.out.results = {{"verdict", to_string(rep.verdict)}, {"series", json::array({to_json(rep)})}};
    c.csv("q_weighted.csv", series_csv(rep));
    return;
  }
  if (series != "diagonal") throw InvalidArgument("crossing: 'series' must be 'diagonal' or 'weighted'");
  const auto path = path_of(c, cond.dim());
  const auto lambda = gaussian_of(c, cond, true);
  if (!lambda.covariance.is_diagonal()) throw InvalidArgument("crossing: the comparison Gaussian must be diagonal (use eig-crossing otherwise)");
  const auto reps = scan_diagonals(cond, lambda, path, grid, c.est);
  const auto d = d_functions(cond, lambda, path, grid, c.est);
  note_verdicts(c, reps);
  json js = json::array(), jd = json::array();
  for (const auto& r : reps) {
    js.push_back(to_json(r));
    c.csv("diag_" + std::to_string(r.index + 1) + ".csv", series_csv(r));
  }
  for (const auto& r : d.per_coordinate) jd.push_back(to_json(r));
  c.csv("d_sum.csv", series_csv(d.total));
  c.out.results = {{"verdict", overall_verdict(reps)},
                   {"lambda", to_json(lambda.covariance.diag())},
                   {"series", js},
                   {"d_functions", {{"per_coordinate", jd}, {"total", to_json(d.total)}, {"zero_at_origin", d.zero_at_origin}}}};
}

inline void eig_crossing(Context& c) {
  const auto cond = input_of(c);
  const auto path = path_of(c, cond.dim());
  const auto grid = grid_of(c);
  const auto g = gaussian_of(c, cond, false);
  auto scan = scan_bq_eigenvalues(cond, g, path, grid, c.est);
  const double t_lim = limit_parameter(path);
  const auto q_lim = q_matrix(cond, g, path, t_lim, c.est);
  const VectorXd ev = q_lim.value.eigenvalues();
  const double gmin = path.gains(t_lim).minCoeff();
  for (std::size_t i = 0; i < scan.q_reports.size(); ++i)
    scan.q_reports[i].items = check_items(scan.q_reports[i], t_lim, ev(static_cast<Eigen::Index>(i)), q_lim.mmse.spectral_err(), 1.0 / (gmin * gmin));
  note_verdicts(c, scan.q_reports);
  note_verdicts(c, scan.bq_reports);
  if (scan.violations > 0) c.violation = true;
  json jq = json::array(), jb = json::array();
  for (const auto& r : scan.q_reports) {
    jq.push_back(to_json(r));
    c.csv("eig_" + std::to_string(r.index + 1) + ".csv", series_csv(r));
  }
  for (const auto& r : scan.bq_reports) {
    jb.push_back(to_json(r));
    c.csv("bq_eig_" + std::to_string(r.index + 1) + ".csv", series_csv(r));
  }
  std::vector<CrossingReport> all = scan.q_reports;
  all.insert(all.end(), scan.bq_reports.begin(), scan.bq_reports.end());
  c.out.results = {{"verdict", overall_verdict(all)},
                   {"gaussian_cov", to_json(g.covariance)},
                   {"eigenvalues", jq},
                   {"bq_eigenvalues", jb},
                   {"sign_relation", {{"holds", scan.relation_holds}, {"violations", scan.violations}}}};
}

inline void mi(Context& c) {
  const auto cond = input_of(c);
  const auto path = path_of(c, cond.dim());
  const double t = need(c.config, "t").get<double>();
  const MatrixXd h = path.h(t);
  IntegrationOptions opt;
  opt.max_intervals = c.config.value("max_intervals", opt.max_intervals);
  std::vector<std::pair<std::string, MiEstimate>> est;
  bool closed = true;
  for (const auto& b : cond.branches()) closed = closed && b.input.is_single_gaussian();
  if (closed) {
    EstimatorConfig cf = c.est;
    cf.method = Method::automatic;
    est.emplace_back("closed_form", mutual_information(cond, h, cf));
  }
  est.emplace_back("direct", mi_direct(cond, h, c.est.with_stream(0x646972)));
  est.emplace_back("immse_integral", mi_immse(cond, path, t, c.est.with_stream(0x696d6d), opt));
  json j = json::object();
  std::string body = "method,value,err\n";
  for (const auto& [name, e] : est) {
    j[name] = to_json(e);
    body += name + "," + num(e.value) + "," + num(e.std_err) + "\n";
  }
  bool agree = true;
  double tol = 0.0;
  for (std::size_t a = 0; a < est.size(); ++a)
    for (std::size_t b = a + 1; b < est.size(); ++b) {
      const double tl = 3.0 * std::hypot(est[a].second.std_err, est[b].second.std_err) + 1e-9;
      tol = std::max(tol, tl);
      if (std::abs(est[a].second.value - est[b].second.value) > tl) agree = false;
    }
  c.out.results = {{"t", t}, {"estimates", j}, {"agree", agree}, {"tolerance", tol}};
  c.csv("mi.csv", body);
}

inline void epi(Context& c) {
  const auto cond = input_of(c);
  if (cond.conditioned()) throw InvalidArgument("epi: the input must be unconditioned");
  const Eigen::Index n = cond.dim();
  EpiSpec spec{cond.branches().front().input, c.config.contains("noise_cov") ? sym_from_json(c.config.at("noise_cov")) : SymMatrix::identity(n), grid_of(c), 0.0};
  const auto r = epi_check(spec, c.est, c.config.value("limit_snr", 1e3));
  std::string body = "snr,delta,err,ok\n";
  for (const auto& p : r.points) body += num(p.snr) + "," + num(p.delta) + "," + num(p.err) + "," + (p.ok ? "1" : "0") + "\n";
  c.out.results = to_json(r);
  c.csv("epi.csv", body);
}

inline void match(Context& c) {
  const auto cond = input_of(c);
  const auto path = path_of(c, cond.dim());
  const double t_e = need(c.config, "t").get<double>();
  const std::string kind = c.config.value("matcher", "general");
  MatchResult m;
  bool independent = false;
  if (kind == "general") {
    m = match_general(cond, path, t_e, c.est);
  } else if (kind == "independent") {
    IntegrationOptions opt;
    opt.max_intervals = c.config.value("max_intervals", opt.max_intervals);
    m = match_independent(cond, path, t_e, c.est, opt);
    independent = true;
  } else if (kind == "extension") {
    m = match_extension(cond, path, t_e, gaussian_of(c, cond, false), c.est);
  } else if (kind == "minimal") {
    m = minimal_match(cond, path, t_e, c.est);
  } else {
    throw InvalidArgument("match: unknown matcher '" + kind + "'");
  }
  const auto checks = verify_match(m, cond, path, t_e, c.est.with_stream(0x766d), independent);
  c.out.results = {{"matcher", kind}, {"t", t_e}, {"match", to_json(m)}, {"checks", to_json(checks)}};
  std::string body = "row,col,value\n";
  for (Eigen::Index i = 0; i < m.sigma_star.dim(); ++i)
    for (Eigen::Index j = 0; j < m.sigma_star.dim(); ++j) body += std::to_string(i + 1) + "," + std::to_string(j + 1) + "," + num(m.sigma_star(i, j)) + "\n";
  c.csv("sigma_star.csv", body);
}

inline std::vector<DiagonalChannel> users_of(const Context& c) {
  std::vector<DiagonalChannel> u;
  for (const auto& g : need(c.config, "users")) u.push_back(DiagonalChannel(vector_from_json(g)));
  if (u.empty()) throw InvalidArgument("config: 'users' must not be empty");
  return u;
}

inline BcInstance bc_instance(const Context& c) {
  const json& k = need(c.config, "constraint");
  if (k.contains("per_antenna")) return BcInstance::per_antenna(users_of(c), vector_from_json(k.at("per_antenna")));
  if (k.contains("covariance")) return BcInstance::covariance(users_of(c), sym_from_json(k.at("covariance")));
  throw InvalidArgument("config: constraint must give 'per_antenna' or 'covariance'");
}

inline void bc_region(Context& c) {
  const std::size_t points = c.config.value("points", std::size_t{200});
  std::vector<RatePoint> cloud;
  std::size_t m = 0;
  Eigen::Index n = 0;
  bool per_antenna = false;
  if (c.config.contains("compound")) {
    CompoundBcInstance inst;
    for (const auto& grp : c.config.at("compound")) {
      std::vector<DiagonalChannel> g;
      for (const auto& h : grp) g.push_back(DiagonalChannel(vector_from_json(h)));
      inst.groups.push_back(std::move(g));
    }
    inst.cov = sym_from_json(need(need(c.config, "constraint"), "covariance"));
    inst.validate();
    m = inst.size();
    n = inst.dim();
    for (std::size_t p = 0; p < points; ++p) {
      CounterRng rng(c.est.key(), p);
      cloud.push_back(region_compound(inst, suites::random_splits(inst.cov, static_cast<int>(m), rng)));
    }
  } else {
    const auto inst = bc_instance(c);
    m = inst.size();
    n = inst.dim();
    per_antenna = inst.constraint == ConstraintKind::per_antenna;
    for (std::size_t p = 0; p < points; ++p) {
      CounterRng rng(c.est.key(), p);
      if (per_antenna) {
        std::vector<VectorXd> lambdas;
        VectorXd rest = inst.power;
        for (std::size_t j = 0; j + 1 < m; ++j) {
          VectorXd l(n);
          for (Eigen::Index i = 0; i < n; ++i) l(i) = rest(i) * rng.uniform();
          rest -= l;
          lambdas.push_back(l);
        }
        cloud.push_back(region_per_antenna(inst, lambdas));
      } else {
        cloud.push_back(region_covariance(inst, suites::random_splits(inst.cov, static_cast<int>(m), rng)));
      }
    }
  }
  std::string body;
  for (std::size_t j = 0; j < m; ++j) body += (j ? ",R" : "R") + std::to_string(j + 1);
  for (std::size_t j = 0; j < m; ++j) {
    const std::string p = "S" + std::to_string(j + 1) + "_";
    if (per_antenna) {
      for (Eigen::Index i = 0; i < n; ++i) body += "," + p + std::to_string(i + 1);
    } else {
      body += matrix_header(p, n);
    }
  }
  body += "\n";
  json pts = json::array();
  for (const auto& rp : cloud) {
    pts.push_back(to_json(rp));
    for (std::size_t j = 0; j < m; ++j) body += (j ? "," : "") + num(rp.rates(static_cast<Eigen::Index>(j)));
    for (const auto& s : rp.splits) {
      if (per_antenna) {
        for (Eigen::Index i = 0; i < n; ++i) body += "," + num(s(i, i));
      } else {
        body += matrix_row(s.matrix());
      }
    }
    body += "\n";
  }
  c.out.results = {{"users", m}, {"points", pts}};
  c.csv("region.csv", body);
}

inline void bc_witness(Context& c) {
  const auto inst = bc_instance(c);
  const auto cond = input_of(c);
  const auto chain = two_user_chain(cond);
  const auto w = converse_witness(chain, inst, c.est, c.config.value("subgrid", 20));
  c.out.results = to_json(w);
  std::string body = "kind,R1,R2,err1,err2\n";
  body += "achievable," + num(w.achievable.rates(0)) + "," + num(w.achievable.rates(1)) + "," + num(w.achievable.errors(0)) + "," + num(w.achievable.errors(1)) + "\n";
  body += "bound," + num(w.bound.rates(0)) + "," + num(w.bound.rates(1)) + ",0,0\n";
  c.csv("witness.csv", body);
}

inline void fisher_cmd(Context& c) {
  const auto cond = input_of(c);
  if (cond.conditioned()) throw InvalidArgument("fisher: the input must be unconditioned");
  const auto& x = cond.branches().front().input;
  const auto path = path_of(c, x.dim());
  const auto grid = grid_of(c);
  const auto g = gaussian_of(c, cond, false);
  json pts = json::array();
  const Eigen::Index n = x.dim();
  std::string body = "t" + matrix_header("J", n) + matrix_header("Jerr", n) + matrix_header("Jscore", n) + matrix_header("Jscore_err", n) + "\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k];
    const auto f = fisher(x, g, path, t, c.est.with_stream(stream_for(t)));
    const auto js = fisher_score_estimate(x, path.h(t), c.est.with_stream(derive_key(stream_for(t), 0x73)));
    pts.push_back({{"fisher", to_json(f)}, {"score_estimate", to_json(js)}});
    body += num(t) + matrix_row(f.J.matrix()) + matrix_row(f.J_err) + matrix_row(js.matrix.matrix()) + matrix_row(js.std_err) + "\n";
  }
  c.out.results = {{"points", pts}};
  c.csv("fisher.csv", body);
}

inline void corpus(Context& c) {
  SuiteOptions o;
  o.seed = c.seed;
  o.threads = c.est.threads;
  o.scale = c.config.value("scale", 1.0);
  if (!(o.scale > 0.0)) throw InvalidArgument("corpus: scale must be positive");
  const auto res = suites::run_suites(o);
  json arr = json::array();
  std::string body = "id,name,pass,violation,instances,failed,digest\n";
  bool all = true;
  for (const auto& r : res) {
    arr.push_back(suites::to_json(r));
    body += std::to_string(r.id) + ",\"" + r.name + "\"," + (r.pass ? "1" : "0") + "," + (r.violation ? "1" : "0") + "," + std::to_string(r.instances) + "," +
            std::to_string(r.failed) + "," + hex64(r.digest) + "\n";
    all = all && r.pass;
    if (r.violation) c.violation = true;
  }
  if (!all) c.violation = true;
  c.out.results = {{"suites", arr}, {"all_pass", all}};
  c.csv("corpus.csv", body);
}

}  // namespace runner

// Runs one scenario in memory. Never throws: errors become exit statuses.
inline RunOutput run_scenario(const json& config, unsigned threads, OutputFormat format) {
  runner::Context c;
  c.format = format;
  try {
    if (!config.is_object()) throw InvalidArgument("config must be a JSON object");
    c.config = config;
    c.hash = config_hash(config);
    const std::string cmd = runner::need(config, "command").get<std::string>();
    if (!config.contains("seed")) throw InvalidArgument("config: 'seed' is mandatory");
    c.est = estimator_from_json(config);
    c.est.threads = threads;
    c.seed = c.est.seed;
    if (cmd == "mmse-scan") runner::mmse_scan(c);
    else if (cmd == "crossing") runner::crossing(c);
    else if (cmd == "eig-crossing") runner::eig_crossing(c);
    else if (cmd == "mi") runner::mi(c);
    else if (cmd == "epi") runner::epi(c);
    else if (cmd == "match") runner::match(c);
    else if (cmd == "bc-region") runner::bc_region(c);
    else if (cmd == "bc-witness") runner::bc_witness(c);
    else if (cmd == "fisher") runner::fisher_cmd(c);
    else if (cmd == "corpus") runner::corpus(c);
    else throw InvalidArgument("unknown command '" + cmd + "'");
  } catch (const NumericalError& e) {
    c.out.status = exit_code::numerical_error;
    c.out.message = e.what();
  } catch (const InvalidArgument& e) {
    c.out.status = exit_code::config_error;
    c.out.message = e.what();
  } catch (const json::exception& e) {
    c.out.status = exit_code::config_error;
    c.out.message = std::string("config: ") + e.what();
  }
  if (c.out.status != exit_code::ok) {
    c.out.files.clear();
    c.out.results = json();
    return std::move(c.out);
  }
  if (c.violation) c.out.status = exit_code::violation;
  json doc = {{"config_hash", c.hash}, {"seed", c.seed}, {"results", c.out.results}};
  c.out.files["results.json"] = doc.dump(2) + "\n";
  return std::move(c.out);
}

inline void write_outputs(const RunOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : out.files) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw InvalidArgument("cannot write " + (dir / name).string());
    f << body;
  }
}

}  // namespace crosspoint
