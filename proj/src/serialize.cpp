#include "tvvine/serialize.hpp"

#include "tvvine/ingest.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace tvvine::io {

using nlohmann::json;

namespace {

void check_header(const json& j, const char* kind) {
  if (!j.is_object() || !j.contains("format_version") || !j.contains("kind"))
    throw ArtifactError(std::string("not a ") + kind + " artifact");
  if (j["kind"] != kind) throw ArtifactError(std::string("expected a ") + kind + " artifact, found " + j["kind"].dump());
  const int v = j["format_version"].get<int>();
  if (v != kFormatVersion)
    throw ArtifactError("unsupported format_version " + std::to_string(v) + " (this build reads " +
                        std::to_string(kFormatVersion) + ")");
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const ArtifactError&) {
    throw;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string(what) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ArtifactError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path);
  out << text;
  if (!out) throw ArtifactError("write failed for " + path);
}

std::string marginals_to_string(const std::vector<marginals::MarginalFit>& fits, std::size_t lag) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "marginals";
  j["series"] = json::array();
  for (const auto& f : fits) {
    json r;
    r["name"] = f.name;
    r["order"] = {{"p", f.order.p}, {"q", f.order.q}, {"frac_d", f.order.use_frac_d}, {"a", f.order.a}, {"b", f.order.b}};
    r["mu"] = f.mu;
    r["phi"] = f.phi;
    r["theta"] = f.theta;
    r["d"] = f.d;
    r["omega"] = f.omega;
    r["alpha"] = f.alpha;
    r["beta"] = f.beta;
    r["nu"] = f.nu;
    r["xi"] = f.xi_skew;
    r["frac_truncation"] = f.frac_truncation;
    r["loglik"] = f.loglik;
    r["aic"] = f.aic;
    r["converged"] = f.converged;
    r["n_obs"] = f.z.size();
    if (f.z.size() > lag + 1) {
      std::vector<double> z2(f.z.size());
      for (std::size_t t = 0; t < z2.size(); ++t) z2[t] = f.z[t] * f.z[t];
      r["diagnostics"] = {{"lag", lag},
                          {"ljung_box_p", ingest::ljung_box(f.z, lag).p_value},
                          {"ljung_box_sq_p", ingest::ljung_box(z2, lag).p_value},
                          {"arch_lm_p", ingest::arch_lm_test(f.z, lag).p_value}};
    }
    j["series"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::vector<marginals::MarginalFit> marginals_from_string(const std::string& text) {
  return guarded("marginals artifact", [&] {
    const json j = json::parse(text);
    check_header(j, "marginals");
    std::vector<marginals::MarginalFit> out;
    for (const auto& r : j.at("series")) {
      marginals::MarginalFit f;
      f.name = r.at("name").get<std::string>();
      const auto& o = r.at("order");
      f.order.p = o.at("p").get<int>();
      f.order.q = o.at("q").get<int>();
      f.order.use_frac_d = o.at("frac_d").get<bool>();
      f.order.a = o.at("a").get<int>();
      f.order.b = o.at("b").get<int>();
      f.mu = r.at("mu").get<double>();
      f.phi = r.at("phi").get<std::vector<double>>();
      f.theta = r.at("theta").get<std::vector<double>>();
      f.d = r.at("d").get<double>();
      f.omega = r.at("omega").get<double>();
      f.alpha = r.at("alpha").get<std::vector<double>>();
      f.beta = r.at("beta").get<std::vector<double>>();
      f.nu = r.at("nu").get<double>();
      f.xi_skew = r.at("xi").get<double>();
      f.frac_truncation = r.at("frac_truncation").get<std::size_t>();
      f.loglik = r.at("loglik").get<double>();
      f.aic = r.at("aic").get<double>();
      f.converged = r.at("converged").get<bool>();
      f.validate();
      out.push_back(std::move(f));
    }
    return out;
  });
}

void save_marginals(const std::string& path, const std::vector<marginals::MarginalFit>& fits, std::size_t lag) {
  write_text(path, marginals_to_string(fits, lag));
}

std::vector<marginals::MarginalFit> load_marginals(const std::string& path) {
  try {
    return marginals_from_string(read_text(path));
  } catch (const ArtifactError& e) {
    throw ArtifactError(path + ": " + e.what());
  }
}

std::string vine_to_string(const vine::FittedTVVine& fitted) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "vine";
  j["n"] = fitted.structure.n;
  j["mode"] = std::string(vine::mode_name(fitted.structure.mode));
  j["driver"] = std::string(dynamics::driver_name(fitted.driver));
  j["pit"] = std::string(marginals::pit_mode_name(fitted.pit_mode));
  j["names"] = fitted.names;
  j["length"] = fitted.length;
  j["loglik"] = fitted.loglik;
  j["aic"] = fitted.aic;
  j["matrix"] = vine::to_rvine_matrix(fitted.structure);
  j["trees"] = json::array();
  for (std::size_t d = 0; d < fitted.edges.size(); ++d) {
    json tree = json::array();
    for (const auto& e : fitted.edges[d]) {
      tree.push_back({{"label", e.label.str()},
                      {"family", std::string(copula::family_name(e.fit.family))},
                      {"driver", std::string(dynamics::driver_name(dynamics::driver_of(e.fit.coef)))},
                      {"coef", dynamics::coef_vector(e.fit.coef)},
                      {"loglik", e.fit.loglik},
                      {"aic", e.fit.aic},
                      {"converged", e.fit.converged}});
    }
    j["trees"].push_back(std::move(tree));
  }
  return j.dump(2) + "\n";
}

vine::FittedTVVine vine_from_string(const std::string& text) {
  return guarded("vine artifact", [&] {
    const json j = json::parse(text);
    check_header(j, "vine");
    vine::FittedTVVine f;
    const auto mode = vine::parse_mode(j.at("mode").get<std::string>());
    f.structure = vine::from_rvine_matrix(j.at("matrix").get<vine::RVineMatrix>(), mode);
    if (f.structure.n != j.at("n").get<int>()) throw ArtifactError("vine artifact: matrix size disagrees with n");
    f.driver = dynamics::parse_driver(j.at("driver").get<std::string>());
    f.pit_mode = marginals::parse_pit_mode(j.at("pit").get<std::string>());
    f.names = j.at("names").get<std::vector<std::string>>();
    f.loglik = j.at("loglik").get<double>();
    f.aic = j.at("aic").get<double>();
    f.length = 0;

    std::map<std::string, dynamics::PairFit> by_label;
    for (const auto& tree : j.at("trees"))
      for (const auto& e : tree) {
        dynamics::PairFit p;
        p.family = copula::parse_family(e.at("family").get<std::string>());
        const auto drv = dynamics::parse_driver(e.at("driver").get<std::string>());
        const auto v = e.at("coef").get<std::vector<double>>();
        p.coef = dynamics::coef_from_vector(drv, p.family, v);
        p.loglik = e.at("loglik").get<double>();
        p.aic = e.at("aic").get<double>();
        p.converged = e.at("converged").get<bool>();
        by_label.emplace(e.at("label").get<std::string>(), std::move(p));
      }
    if (by_label.size() != f.structure.edge_count())
      throw ArtifactError("vine artifact: " + std::to_string(by_label.size()) + " edge records for " +
                          std::to_string(f.structure.edge_count()) + " matrix edges");
    for (const auto& tree : f.structure.trees) {
      std::vector<vine::FittedEdge> row;
      for (const auto& label : tree) {
        auto it = by_label.find(label.str());
        if (it == by_label.end()) throw ArtifactError("vine artifact: no record for edge " + label.str());
        row.push_back(vine::FittedEdge{label, it->second, {}});
      }
      f.edges.push_back(std::move(row));
    }
    return f;
  });
}

void save_vine(const std::string& path, const vine::FittedTVVine& fitted) { write_text(path, vine_to_string(fitted)); }

vine::FittedTVVine load_vine(const std::string& path) {
  try {
    return vine_from_string(read_text(path));
  } catch (const ArtifactError& e) {
    throw ArtifactError(path + ": " + e.what());
  }
}

}  // namespace tvvine::io
