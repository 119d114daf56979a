#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bc_capacity.hpp"
#include "crossing_analysis.hpp"
#include "gaussian_matcher.hpp"
#include "immse_integrals.hpp"

namespace crosspoint {

using nlohmann::json;

// ---- hashing ----

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

// FNV-1a of the canonical dump (keys sorted, no whitespace).
inline std::string config_hash(const json& cfg) { return hex64(fnv1a(cfg.dump())); }

// Order-sensitive digest over the bit patterns of a stream of doubles.
class Digest {
 public:
  void add(double v) { h_ = fnv1a(&v, sizeof v, h_); }
  void add(const VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) add(v(i));
  }
  void add(const MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) add(m(i, j));
  }
  void add(const SymMatrix& m) { add(m.matrix()); }
  void add(const std::string& s) { h_ = fnv1a(s.data(), s.size(), h_); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

// ---- matrices ----

inline json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

inline json to_json(const SymMatrix& m) { return to_json(m.matrix()); }

inline VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw InvalidArgument("expected a numeric array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidArgument("expected a nonempty matrix (array of rows)");
  const std::size_t r = j.size(), c = j[0].size();
  MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < r; ++i) {
    if (j[i].size() != c) throw InvalidArgument("matrix rows differ in length");
    for (std::size_t k = 0; k < c; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

inline SymMatrix sym_from_json(const json& j) {
  const MatrixXd m = matrix_from_json(j);
  if (m.rows() != m.cols()) throw InvalidArgument("expected a square matrix");
  if (!m.isApprox(m.transpose(), 1e-12) && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("matrix is not symmetric");
  return SymMatrix(m);
}

// ---- inputs ----

inline json to_json(const MixtureInput& x) {
  json comps = json::array();
  for (const auto& c : x.components()) comps.push_back({{"w", c.weight}, {"mean", to_json(c.mean)}, {"cov", to_json(c.cov)}});
  return {{"dim", x.dim()}, {"components", comps}};
}

inline json to_json(const ConditionalInput& c) {
  json br = json::array();
  for (const auto& b : c.branches()) br.push_back({{"q", b.q}, {"input", to_json(b.input)}});
  return {{"u", br}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("invalid JSON in " + path + ": " + e.what());
  }
}

inline ConditionalInput conditional_from_json(const json& j);

inline MixtureInput mixture_from_json(const json& j) {
  if (j.contains("file")) return mixture_from_json(read_json_file(j.at("file").get<std::string>()));
  const std::string kind = j.value("kind", "mixture");
  if (j.contains("u")) throw InvalidArgument("a conditional family is not allowed here");
  if (kind == "bpsk") return bpsk();
  if (kind == "qpsk") return qpsk_parallel(j.value("n", 2));
  if (kind == "gaussian") {
    const SymMatrix cov = sym_from_json(j.at("cov"));
    return j.contains("mean") ? MixtureInput::gaussian(cov, vector_from_json(j.at("mean"))) : MixtureInput::gaussian(cov);
  }
  if (kind == "random_mixture") return seeded_random_mixture(j.at("n").get<int>(), j.at("k").get<int>(), j.at("seed").get<std::uint64_t>());
  if (kind == "constellation") return seeded_constellation(j.at("n").get<int>(), j.at("k").get<int>(), j.at("seed").get<std::uint64_t>());
  if (kind == "mixture") {
    std::vector<MixtureComponent> comps;
    for (const auto& c : j.at("components")) {
      const VectorXd mean = vector_from_json(c.at("mean"));
      const SymMatrix cov = c.contains("cov") ? sym_from_json(c.at("cov")) : SymMatrix::zero(mean.size());
      const double w = c.contains("w") ? c.at("w").get<double>() : c.at("weight").get<double>();
      comps.push_back({w, mean, cov});
    }
    MixtureInput x(std::move(comps));
    if (j.contains("dim") && j.at("dim").get<Eigen::Index>() != x.dim()) throw InvalidArgument("mixture: 'dim' does not match the component means");
    return x;
  }
  if (kind == "transform") return linear_transform(mixture_from_json(j.at("input")), matrix_from_json(j.at("matrix")));
  throw InvalidArgument("unknown input kind '" + kind + "'");
}

inline ConditionalInput conditional_from_json(const json& j) {
  if (j.contains("file")) return conditional_from_json(read_json_file(j.at("file").get<std::string>()));
  if (!j.contains("u")) return ConditionalInput::degenerate(mixture_from_json(j));
  std::vector<ConditionalBranch> br;
  for (const auto& b : j.at("u")) br.push_back({b.at("q").get<double>(), mixture_from_json(b.at("input"))});
  return ConditionalInput(std::move(br));
}

// Comparison Gaussian: explicit "cov" or "diag", or Σ_x / diag(Σ_x) of the
// input via "matched": "full" | "diagonal", optionally scaled.
inline GaussianInput gaussian_from_json(const json& j, const SymMatrix& input_cov) {
  if (j.contains("cov")) return GaussianInput(sym_from_json(j.at("cov")));
  if (j.contains("diag")) return GaussianInput::diagonal(vector_from_json(j.at("diag")));
  const std::string m = j.value("matched", "diagonal");
  const double s = j.value("scale", 1.0);
  if (m == "full") return GaussianInput(input_cov * s);
  if (m == "diagonal") return GaussianInput::diagonal(input_cov.diag() * s);
  throw InvalidArgument("gaussian: 'matched' must be 'full' or 'diagonal'");
}

// ---- path and grid ----

inline ChannelPath path_from_json(const json& j, Eigen::Index n) {
  const std::string kind = j.value("kind", "snr");
  if (kind == "snr") return snr_path(j.value("snr_max", 10.0), n);
  if (kind == "piecewise") {
    std::vector<DiagonalChannel> anchors;
    for (const auto& a : j.at("anchors")) anchors.push_back(DiagonalChannel(vector_from_json(a)));
    for (const auto& a : anchors) require(a.dim() == n, "path: anchor dimension mismatch");
    if (j.contains("times")) return make_path(anchors, j.at("times").get<std::vector<double>>());
    return make_path(anchors);
  }
  throw InvalidArgument("unknown path kind '" + kind + "'");
}

inline json to_json(const ChannelPath& p) {
  if (p.kind() == ChannelPath::Kind::sqrt_snr) return {{"kind", "snr"}, {"snr_max", p.snr_max()}};
  json anchors = json::array(), times = json::array();
  for (const auto& a : p.anchors()) {
    anchors.push_back(to_json(a.channel.gains));
    times.push_back(a.t);
  }
  return {{"kind", "piecewise"}, {"anchors", anchors}, {"times", times}};
}

inline GainScanGrid grid_from_json(const json& j) {
  if (j.contains("values")) return GainScanGrid(j.at("values").get<std::vector<double>>());
  const std::string kind = j.value("kind", "linspace");
  const double a = j.at("from").get<double>(), b = j.at("to").get<double>();
  const std::size_t n = j.at("points").get<std::size_t>();
  if (kind == "linspace") return GainScanGrid::linspace(a, b, n);
  if (kind == "geometric") return GainScanGrid::zero_then_geometric(a, b, n);
  throw InvalidArgument("unknown grid kind '" + kind + "'");
}

inline EstimatorConfig estimator_from_json(const json& j) {
  EstimatorConfig c;
  if (!j.contains("seed")) throw InvalidArgument("config: 'seed' is mandatory");
  c.seed = j.at("seed").get<std::uint64_t>();
  c.samples = j.value("samples", c.samples);
  c.method = method_from_string(j.value("method", std::string("automatic")));
  c.quad_order = j.value("quad_order", c.quad_order);
  return c;
}

// ---- results ----

inline json to_json(const MmseEstimate& e) {
  return {{"matrix", to_json(e.matrix)}, {"std_err", to_json(e.std_err)}, {"method", to_string(e.method)}, {"samples", e.samples}, {"seed", e.seed}};
}

inline json to_json(const MiEstimate& m) {
  json j = {{"value", m.value}, {"std_err", m.std_err}, {"method", to_string(m.method)}};
  if (m.method == MiMethod::immse_integral) {
    j["quadrature_err"] = m.quadrature_err;
    j["mc_err"] = m.mc_err;
    j["nodes"] = m.nodes;
  }
  return j;
}

inline json to_json(const ItemChecks& c) {
  return {{"start_nonpositive", c.start_nonpositive}, {"increasing_before", c.increasing_before}, {"nonneg_after", c.nonneg_after},
          {"vanishes_at_limit", c.vanishes_at_limit}, {"limit_t", c.limit_t}, {"limit_value", c.limit_value}, {"limit_err", c.limit_err},
          {"limit_bound", c.limit_bound}};
}

inline json to_json(const CrossingReport& r) {
  json cr = json::array();
  for (const auto& c : r.crossings) cr.push_back({{"t_a", c.t_a}, {"t_b", c.t_b}, {"direction", to_string(c.direction)}});
  json j = {{"series_kind", to_string(r.kind)},
            {"index", r.index},
            {"t", r.grid.t_values},
            {"values", r.values},
            {"errors", r.errors},
            {"signs", r.signs},
            {"crossings", cr},
            {"verdict", to_string(r.verdict)},
            {"isolated_flips", r.isolated_flips},
            {"notes", r.notes}};
  if (r.items) j["items"] = to_json(*r.items);
  return j;
}

inline std::string series_csv(const CrossingReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "t,value,err,sign\n";
  for (std::size_t i = 0; i < r.values.size(); ++i) os << r.grid[i] << ',' << r.values[i] << ',' << r.errors[i] << ',' << r.signs[i] << '\n';
  return os.str();
}

inline json to_json(const MatchResult& m) {
  json j = {{"sigma_star", to_json(m.sigma_star)}, {"alpha", m.alpha},         {"alpha_err", m.alpha_err}, {"residual", m.residual},
            {"tolerance", m.tolerance},             {"iterations", m.iterations}, {"kept", m.kept},          {"notes", m.notes}};
  if (m.eta.size() > 0) {
    j["eta"] = to_json(m.eta);
  } else {
    j["nu_star"] = m.nu_star;
    j["c_matrix"] = to_json(m.c_matrix);
    j["bracket"] = {{"r_at_1", m.r_low}, {"r_at_0", m.r_high}};
  }
  return j;
}

inline json to_json(const MatchChecks& c) {
  return {{"mi_gaussian", c.mi_gaussian}, {"mi_input", c.mi_input},   {"mi_err", c.mi_err},     {"mi_equal", c.mi_equal},
          {"loewner_gap", c.loewner_gap}, {"loewner_ok", c.loewner_ok}, {"beyond_min_z", c.q_min}, {"beyond_ok", c.beyond_ok},
          {"sampled_t", c.sampled_t}};
}

inline json to_json(const RatePoint& r) {
  json s = json::array();
  for (const auto& g : r.splits) s.push_back(to_json(g));
  return {{"rates", to_json(r.rates)}, {"errors", to_json(r.errors)}, {"splits", s}};
}

inline json to_json(const WitnessReport& w) {
  return {{"constraint", to_string(w.constraint)},
          {"match", to_json(w.match)},
          {"achievable", to_json(w.achievable)},
          {"bound", to_json(w.bound)},
          {"t1", {{"mi_input", w.mi_t1_input}, {"mi_gaussian", w.mi_t1_gauss}, {"err", w.mi_t1_err}, {"equal", w.matched_equal}}},
          {"t2", {{"mi_input", w.mi_t2_input}, {"mi_gaussian", w.mi_t2_gauss}, {"err", w.mi_t2_err}, {"dominated", w.dominance}}},
          {"integrand_min_z", w.integrand_min_z},
          {"integrand_ok", w.integrand_ok},
          {"contains", w.contains},
          {"certified", w.certified()},
          {"notes", w.notes}};
}

inline json to_json(const EpiReport& r) {
  json pts = json::array();
  for (const auto& p : r.points) pts.push_back({{"snr", p.snr}, {"delta", p.delta}, {"err", p.err}, {"ok", p.ok}});
  return {{"h_x", r.h_x},
          {"h_x_err", r.h_x_err},
          {"alpha", r.alpha},
          {"alpha_err", r.alpha_err},
          {"points", pts},
          {"delta_nonpositive", r.delta_nonpositive},
          {"limit", {{"snr", r.limit_snr}, {"delta", r.limit_delta}, {"err", r.limit_err}}},
          {"h_sum", r.h_sum},
          {"h_sum_err", r.h_sum_err},
          {"epi", {{"lhs", r.epi_lhs}, {"rhs", r.epi_rhs}, {"slack", r.epi_slack}, {"err", r.epi_err}, {"holds", r.epi_holds}}}};
}

inline json to_json(const FisherReport& f) {
  return {{"t", f.t}, {"J", to_json(f.J)}, {"W", to_json(f.W)}, {"J_gaussian", to_json(f.J_gaussian)}, {"J_err", to_json(f.J_err)},
          {"identity_residual", f.identity_residual}};
}

inline json to_json(const DerivativeBound& d) {
  return {{"lhs", to_json(d.lhs)},           {"rhs", to_json(d.rhs)},      {"holds", d.holds},
          {"min_gap", d.min_gap},           {"tolerance", d.tolerance}, {"discretization", d.discretization},
          {"central_difference", d.central}};
}

}  // namespace crosspoint
