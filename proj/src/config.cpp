#include "randse/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "randse/errors.hpp"
#include "randse/mathutil.hpp"
#include "randse/method.hpp"

namespace randse::config {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits at commas outside parentheses.
std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> parts;
  std::string current;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!trim(current).empty() || !parts.empty()) parts.push_back(trim(current));
  return parts;
}

double parse_num(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in " + context);
  }
}

struct Call {
  std::string name;
  std::vector<std::string> args;
};

Call parse_call(const std::string& s, const std::string& context) {
  const auto open = s.find('(');
  if (open == std::string::npos || s.back() != ')') {
    throw ConfigError("expected name(args...) in " + context + ", got '" + s + "'");
  }
  Call call;
  call.name = trim(s.substr(0, open));
  const std::string inner = s.substr(open + 1, s.size() - open - 2);
  if (!trim(inner).empty()) call.args = split_top_level(inner);
  return call;
}

dgp::ErrorProcessSpec parse_process(const std::string& s, const std::string& context,
                                    Eigen::Index n_hint) {
  const Call call = parse_call(s, context);
  auto need = [&](std::size_t k) {
    if (call.args.size() != k) {
      throw ConfigError(context + ": " + call.name + " takes " + std::to_string(k) +
                        " arguments");
    }
  };
  if (call.name == "iid") {
    need(1);
    return {dgp::IID{parse_num(call.args[0], context)}};
  }
  if (call.name == "ar1") {
    need(2);
    return {dgp::AR1{parse_num(call.args[0], context), parse_num(call.args[1], context)}};
  }
  if (call.name == "ma") {
    std::vector<double> coef;
    for (const auto& a : call.args) coef.push_back(parse_num(a, context));
    return {dgp::MAq{coef}};
  }
  if (call.name == "cluster_re") {
    need(3);
    return {dgp::ClusterRE{parse_num(call.args[0], context), parse_num(call.args[1], context),
                           static_cast<int>(parse_num(call.args[2], context))}};
  }
  if (call.name == "network_ma") {
    need(2);
    const double weight = parse_num(call.args[0], context);
    const int band = static_cast<int>(parse_num(call.args[1], context));
    if (band < 1) throw ConfigError(context + ": network_ma bandwidth must be >= 1");
    dgp::NetworkMA net;
    net.weight = weight;
    for (Eigen::Index i = 0; i < n_hint; ++i) {
      for (int k = 1; k <= band && i + k < n_hint; ++k) {
        net.edges.emplace_back(static_cast<int>(i), static_cast<int>(i + k));
      }
    }
    return {net};
  }
  throw ConfigError(context + ": unknown process '" + call.name + "'");
}

std::string serialize_process(const dgp::ErrorProcessSpec& spec) {
  if (const auto* iid = std::get_if<dgp::IID>(&spec.process)) {
    return "iid(" + fmt(iid->sigma) + ")";
  }
  if (const auto* ar = std::get_if<dgp::AR1>(&spec.process)) {
    return "ar1(" + fmt(ar->rho) + ", " + fmt(ar->sigma) + ")";
  }
  if (const auto* ma = std::get_if<dgp::MAq>(&spec.process)) {
    std::string out = "ma(";
    for (std::size_t k = 0; k < ma->coefficients.size(); ++k) {
      if (k) out += ", ";
      out += fmt(ma->coefficients[k]);
    }
    return out + ")";
  }
  if (const auto* cre = std::get_if<dgp::ClusterRE>(&spec.process)) {
    return "cluster_re(" + fmt(cre->sigma_between) + ", " + fmt(cre->sigma_within) + ", " +
           std::to_string(cre->cluster_size) + ")";
  }
  const auto& net = std::get<dgp::NetworkMA>(spec.process);
  // Band networks round-trip; arbitrary edge lists are API-only.
  int band = 0;
  for (const auto& [a, b] : net.edges) band = std::max(band, std::abs(a - b));
  return "network_ma(" + fmt(net.weight) + ", " + std::to_string(band) + ")";
}

dgp::TreatmentSpec parse_treatment_dist(const std::string& s, const std::string& context) {
  const Call call = parse_call(s, context);
  dgp::TreatmentSpec t;
  if (call.name == "bernoulli") {
    if (call.args.size() != 1) throw ConfigError(context + ": bernoulli takes one argument");
    t.dist = dgp::Bernoulli{parse_num(call.args[0], context)};
    return t;
  }
  if (call.name == "normal") {
    if (call.args.size() != 2) throw ConfigError(context + ": normal takes two arguments");
    t.dist = dgp::NormalDist{parse_num(call.args[0], context), parse_num(call.args[1], context)};
    return t;
  }
  if (call.name == "discrete") {
    dgp::Discrete d;
    for (const auto& pair : call.args) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos) {
        throw ConfigError(context + ": discrete entries look like value:prob");
      }
      d.values.push_back(parse_num(trim(pair.substr(0, colon)), context));
      d.probs.push_back(parse_num(trim(pair.substr(colon + 1)), context));
    }
    t.dist = d;
    return t;
  }
  throw ConfigError(context + ": unknown distribution '" + call.name + "'");
}

std::string serialize_treatment_dist(const dgp::TreatmentSpec& t) {
  if (const auto* b = std::get_if<dgp::Bernoulli>(&t.dist)) {
    return "bernoulli(" + fmt(b->p) + ")";
  }
  if (const auto* nd = std::get_if<dgp::NormalDist>(&t.dist)) {
    return "normal(" + fmt(nd->mu) + ", " + fmt(nd->sigma) + ")";
  }
  const auto& d = std::get<dgp::Discrete>(t.dist);
  std::string out = "discrete(";
  for (std::size_t k = 0; k < d.values.size(); ++k) {
    if (k) out += ", ";
    out += fmt(d.values[k]) + ":" + fmt(d.probs[k]);
  }
  return out + ")";
}

dgp::EffectSpec parse_effect(const std::string& s, const std::string& context) {
  const Call call = parse_call(s, context);
  dgp::EffectSpec e;
  if (call.name == "constant") {
    if (call.args.size() != 1) throw ConfigError(context + ": constant takes one argument");
    e.effect = dgp::ConstantEffect{parse_num(call.args[0], context)};
    return e;
  }
  if (call.name == "het_iid") {
    if (call.args.size() != 2) throw ConfigError(context + ": het_iid takes two arguments");
    e.effect = dgp::HeterogeneousIID{parse_num(call.args[0], context),
                                     parse_num(call.args[1], context)};
    return e;
  }
  if (call.name == "het_clustered") {
    if (call.args.size() != 4) {
      throw ConfigError(context + ": het_clustered takes four arguments");
    }
    e.effect = dgp::HeterogeneousClustered{
        parse_num(call.args[0], context), parse_num(call.args[1], context),
        parse_num(call.args[2], context), static_cast<int>(parse_num(call.args[3], context))};
    return e;
  }
  throw ConfigError(context + ": unknown effect '" + call.name + "'");
}

std::string serialize_effect(const dgp::EffectSpec& e) {
  if (const auto* c = std::get_if<dgp::ConstantEffect>(&e.effect)) {
    return "constant(" + fmt(c->tau) + ")";
  }
  if (const auto* h = std::get_if<dgp::HeterogeneousIID>(&e.effect)) {
    return "het_iid(" + fmt(h->mean_tau) + ", " + fmt(h->var_tau) + ")";
  }
  const auto& h = std::get<dgp::HeterogeneousClustered>(e.effect);
  return "het_clustered(" + fmt(h.mean_tau) + ", " + fmt(h.var_between) + ", " +
         fmt(h.var_within) + ", " + std::to_string(h.cluster_size) + ")";
}

std::vector<int> parse_group_sizes(const std::string& s, Eigen::Index n) {
  const auto x = s.find(" x ");
  if (x != std::string::npos) {
    const int size = static_cast<int>(parse_num(trim(s.substr(0, x)), "group_sizes"));
    const int count = static_cast<int>(parse_num(trim(s.substr(x + 3)), "group_sizes"));
    if (size < 1 || count < 1) throw ConfigError("group_sizes: need positive size x count");
    return std::vector<int>(static_cast<std::size_t>(count), size);
  }
  std::vector<int> sizes;
  for (const auto& part : split_top_level(s)) {
    sizes.push_back(static_cast<int>(parse_num(part, "group_sizes")));
  }
  (void)n;
  return sizes;
}

std::string serialize_group_sizes(const std::vector<int>& sizes) {
  const bool uniform =
      std::all_of(sizes.begin(), sizes.end(), [&](int m) { return m == sizes[0]; });
  if (uniform) {
    return std::to_string(sizes[0]) + " x " + std::to_string(sizes.size());
  }
  std::string out;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (k) out += ", ";
    out += std::to_string(sizes[k]);
  }
  return out;
}

Eigen::VectorXd parse_vector(const std::string& s, const std::string& context) {
  const auto parts = split_top_level(s);
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    v(static_cast<Eigen::Index>(k)) = parse_num(parts[k], context);
  }
  return v;
}

std::string serialize_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) out += ", ";
    out += fmt(v(k));
  }
  return out;
}

// Shared key dispatcher for file parsing and CLI overrides. Raw values are
// applied in two passes so key order never matters.
struct RawConfig {
  std::map<std::string, std::string> kv;
  bool has(const std::string& k) const { return kv.count(k) > 0; }
  const std::string& at(const std::string& k) const { return kv.at(k); }
};

const std::vector<std::string> kKnownKeys = {
    "n",         "beta_true", "gamma_true",      "error0",  "controls",
    "treatment", "treatment_level", "effect",    "group_sizes", "alpha_dw",
    "iv_rho",    "iv_eta",    "methods"};

void apply_raw(dgp::ScenarioSpec& spec, const RawConfig& raw) {
  for (const auto& [key, value] : raw.kv) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    (void)value;
  }
  if (raw.has("n")) spec.n = static_cast<Eigen::Index>(parse_num(raw.at("n"), "n"));
  if (raw.has("error0")) spec.error0 = parse_process(raw.at("error0"), "error0", spec.n);
  if (raw.has("controls")) {
    spec.controls.clear();
    const std::string value = trim(raw.at("controls"));
    if (value != "none" && !value.empty()) {
      for (const auto& part : split_top_level(value)) {
        spec.controls.push_back(parse_process(part, "controls", spec.n));
      }
    }
  }
  if (raw.has("treatment")) {
    const auto level = spec.treatment.level;
    spec.treatment = parse_treatment_dist(raw.at("treatment"), "treatment");
    spec.treatment.level = level;
  }
  if (raw.has("treatment_level")) {
    const std::string level = trim(raw.at("treatment_level"));
    if (level == "unit") {
      spec.treatment.level = dgp::AssignLevel::Unit;
    } else if (level == "group") {
      spec.treatment.level = dgp::AssignLevel::Group;
    } else {
      throw ConfigError("treatment_level must be 'unit' or 'group'");
    }
  }
  if (raw.has("effect")) spec.effect = parse_effect(raw.at("effect"), "effect");
  if (raw.has("group_sizes")) {
    const std::string value = trim(raw.at("group_sizes"));
    if (value.empty() || value == "none") {
      spec.group_sizes.reset();
    } else {
      spec.group_sizes = parse_group_sizes(value, spec.n);
    }
  }
  if (raw.has("gamma_true")) spec.gamma_true = parse_vector(raw.at("gamma_true"), "gamma_true");
  if (raw.has("alpha_dw")) {
    const std::string value = trim(raw.at("alpha_dw"));
    if (value.empty() || value == "none") {
      spec.alpha_dw.reset();
    } else {
      spec.alpha_dw = parse_vector(value, "alpha_dw");
    }
  }
  if (raw.has("iv_rho") || raw.has("iv_eta")) {
    dgp::IvSpec iv = spec.iv.value_or(dgp::IvSpec{0.0, {dgp::IID{1.0}}});
    if (raw.has("iv_rho")) iv.rho = parse_num(raw.at("iv_rho"), "iv_rho");
    if (raw.has("iv_eta")) iv.eta = parse_process(raw.at("iv_eta"), "iv_eta", spec.n);
    spec.iv = iv;
  }
  if (raw.has("methods")) {
    spec.methods.clear();
    for (const auto& part : split_top_level(raw.at("methods"))) {
      const auto method = parse_method(part);
      if (!method) throw ConfigError("unknown method '" + part + "'");
      spec.methods.push_back(*method);
    }
  }
  // beta_true is pinned to the effect mean; an explicit key must agree.
  spec.beta_true = spec.effect.mean();
  if (raw.has("beta_true")) {
    const double given = parse_num(raw.at("beta_true"), "beta_true");
    if (given != spec.beta_true) {
      throw ConfigError("beta_true must equal the mean treatment effect " +
                        fmt(spec.beta_true));
    }
  }
}

void retile_groups(dgp::ScenarioSpec& spec) {
  if (!spec.group_sizes || spec.group_sizes->empty()) return;
  const int size = (*spec.group_sizes)[0];
  const bool uniform = std::all_of(spec.group_sizes->begin(), spec.group_sizes->end(),
                                   [&](int m) { return m == size; });
  const auto total = static_cast<Eigen::Index>(size) *
                     static_cast<Eigen::Index>(spec.group_sizes->size());
  if (total == spec.n) return;
  if (!uniform || spec.n % size != 0) {
    throw ConfigError("n override incompatible with the configured group sizes");
  }
  spec.group_sizes =
      std::vector<int>(static_cast<std::size_t>(spec.n / size), size);
}

}  // namespace

std::string serialize_scenario(const dgp::ScenarioSpec& spec) {
  std::ostringstream out;
  out << "n = " << spec.n << "\n";
  out << "beta_true = " << fmt(spec.beta_true) << "\n";
  out << "gamma_true = " << serialize_vector(spec.gamma_true) << "\n";
  out << "error0 = " << serialize_process(spec.error0) << "\n";
  out << "controls = ";
  if (spec.controls.empty()) {
    out << "none";
  } else {
    for (std::size_t k = 0; k < spec.controls.size(); ++k) {
      if (k) out << ", ";
      out << serialize_process(spec.controls[k]);
    }
  }
  out << "\n";
  out << "treatment_level = "
      << (spec.treatment.level == dgp::AssignLevel::Group ? "group" : "unit") << "\n";
  out << "treatment = " << serialize_treatment_dist(spec.treatment) << "\n";
  out << "effect = " << serialize_effect(spec.effect) << "\n";
  if (spec.group_sizes) {
    out << "group_sizes = " << serialize_group_sizes(*spec.group_sizes) << "\n";
  }
  if (spec.alpha_dw) out << "alpha_dw = " << serialize_vector(*spec.alpha_dw) << "\n";
  if (spec.iv) {
    out << "iv_rho = " << fmt(spec.iv->rho) << "\n";
    out << "iv_eta = " << serialize_process(spec.iv->eta) << "\n";
  }
  out << "methods = ";
  for (std::size_t k = 0; k < spec.methods.size(); ++k) {
    if (k) out << ", ";
    out << method_name(spec.methods[k]);
  }
  out << "\n";
  return out.str();
}

dgp::ScenarioSpec parse_scenario_config(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (raw.kv.count(key)) {
      throw ConfigError("duplicate config key '" + key + "'");
    }
    raw.kv[key] = value;
  }
  dgp::ScenarioSpec spec;
  spec.gamma_true = Eigen::VectorXd::Zero(1);
  apply_raw(spec, raw);
  spec.validate();
  return spec;
}

void apply_override(dgp::ScenarioSpec& spec, const std::string& key, const std::string& value) {
  RawConfig raw;
  raw.kv[key] = value;
  apply_raw(spec, raw);
  if (key == "n") retile_groups(spec);
}

std::uint64_t scenario_hash(const dgp::ScenarioSpec& spec) {
  const std::string text = serialize_scenario(spec);
  return fnv1a64(text.data(), text.size());
}

}  // namespace randse::config
