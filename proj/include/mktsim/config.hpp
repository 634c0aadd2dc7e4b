#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mktsim/assignment.hpp"
#include "mktsim/csv.hpp"
#include "mktsim/errors.hpp"
#include "mktsim/marketplace.hpp"
#include "mktsim/models.hpp"

namespace mktsim {

// A parsed scenario file is a flat map "section.key" -> value. Three
// on-disk forms feed the same map: TOML-style key/value tables (.toml /
// .cfg / .ini), JSON (.json), and the flat key,value manifest CSV that every
// run emits (.csv) -- so re-running from a manifest reproduces the run.
struct ConfigValue {
  enum class Type { kScalar, kList };
  Type type = Type::kScalar;
  std::string scalar;
  std::vector<std::string> list;

  std::string render() const {
    if (type == Type::kScalar) return scalar;
    std::string out = "[";
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i) out += ";";
      out += list[i];
    }
    out += "]";
    return out;
  }
};

using ConfigMap = std::map<std::string, ConfigValue>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string strip_quotes(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

inline ConfigValue parse_value_text(const std::string& raw) {
  ConfigValue v;
  const std::string text = trim(raw);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') throw ConfigError("unterminated list value: " + text);
    v.type = ConfigValue::Type::kList;
    std::string body = text.substr(1, text.size() - 2);
    std::string item;
    std::stringstream ss(body);
    while (std::getline(ss, item, ',')) {
      const std::string entry = strip_quotes(trim(item));
      if (!entry.empty()) v.list.push_back(entry);
    }
    return v;
  }
  v.scalar = strip_quotes(text);
  return v;
}

}  // namespace detail

inline ConfigMap parse_toml_subset(std::istream& in, const std::string& origin) {
  ConfigMap map;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    const std::string qualified = section.empty() ? key : section + "." + key;
    map[qualified] = detail::parse_value_text(line.substr(eq + 1));
  }
  return map;
}

inline ConfigMap parse_json_config(std::istream& in, const std::string& origin) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(origin + ": top level must be an object");
  ConfigMap map;
  auto scalar_text = [](const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  };
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object())
      throw ConfigError(origin + ": section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      ConfigValue cv;
      if (value.is_array()) {
        cv.type = ConfigValue::Type::kList;
        for (const auto& item : value) cv.list.push_back(scalar_text(item));
      } else {
        cv.scalar = scalar_text(value);
      }
      map[section + "." + key] = cv;
    }
  }
  return map;
}

inline ConfigMap parse_manifest_csv(std::istream& in, const std::string& origin) {
  ConfigMap map;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == "key,value") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key,value");
    const std::string key = detail::trim(line.substr(0, comma));
    std::string value = line.substr(comma + 1);
    ConfigValue cv;
    if (!value.empty() && value.front() == '[' && value.back() == ']') {
      cv.type = ConfigValue::Type::kList;
      std::stringstream ss(value.substr(1, value.size() - 2));
      std::string item;
      while (std::getline(ss, item, ';'))
        if (!detail::trim(item).empty()) cv.list.push_back(detail::trim(item));
    } else {
      cv.scalar = value;
    }
    map[key] = cv;
  }
  return map;
}

inline ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "json") return parse_json_config(in, path);
  if (ext == "csv") return parse_manifest_csv(in, path);
  return parse_toml_subset(in, path);
}

// ---------------------------------------------------------------------------
// Resolved scenario
// ---------------------------------------------------------------------------

struct MarketplaceSpec {
  int members = 10;
  int campaigns = 1;
  int horizon = 10;
  std::vector<Cents> budgets{kUnlimitedBudget};   // broadcast when shorter than M
  std::vector<Cents> value_rates{100};
  double request_rate = 1.0;
  double affinity_base = 1.0;
  double affinity_spread = 0.0;   // member i gets base * (1 + spread * i/(N-1))
  std::string targeting = "all";  // all | blocks
  Cents reserve = 0;
  std::string mechanism = "second-price";
  double pacing_rate0 = 1.0;
  double pacing_epsilon = 0.1;
  double pacing_selectivity = 1.0;
  bool fixed_requests = false;
};

struct TreatmentConfig {
  std::string side = "member";  // member | campaign
  double multiplier = 1.0;
  double carryover = 0.0;
};

struct ModelConfig {
  // mechanistic | constant-cannibalization | diminishing-returns |
  // budget-share | panel
  std::string kind = "mechanistic";
  AnalyticModel analytic;
  PanelParams panel;
};

struct DesignConfig {
  std::string kind = "member-cr";  // member-cr | campaign-cr | switchback | budget-split
  int treated_units = 0;           // 0 -> half of the unit count
  double split_p = 0.5;
  bool balanced = true;
  int periods = 0;                 // 0 -> marketplace horizon
};

struct StudyConfig {
  int reps = 1000;
  double alpha = 0.05;
  std::vector<double> effects{0.0};
  std::string estimand = "delivered";  // delivered | revenue
  std::vector<std::string> designs;    // bias/power studies; empty -> [design].kind
  std::vector<int> k_grid;             // validate-assumptions; empty -> {N/10, N/4, N/2, N}
  std::uint64_t seed = 1;
  std::string out = "out";
  int threads = 0;                     // 0 -> hardware concurrency
};

struct ScenarioConfig {
  MarketplaceSpec marketplace;
  TreatmentConfig treatment;
  ModelConfig model;
  DesignConfig design;
  StudyConfig study;
};

namespace detail {

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "marketplace.members", "marketplace.campaigns", "marketplace.horizon",
      "marketplace.budget_cents", "marketplace.value_rate_cents", "marketplace.request_rate",
      "marketplace.affinity_base", "marketplace.affinity_spread", "marketplace.targeting",
      "marketplace.reserve_cents", "marketplace.mechanism", "marketplace.pacing_rate0",
      "marketplace.pacing_epsilon", "marketplace.pacing_selectivity",
      "marketplace.fixed_requests",
      "treatment.side", "treatment.multiplier", "treatment.carryover",
      "model.kind", "model.baseline", "model.lift", "model.cannibalization", "model.slope",
      "model.noise_sd", "model.periods", "model.period_mean", "model.member_sd",
      "model.period_sd", "model.scale_log_sd",
      "design.kind", "design.treated_units", "design.split_p", "design.balanced",
      "design.periods",
      "study.reps", "study.alpha", "study.effects", "study.estimand", "study.designs",
      "study.k_grid", "study.seed", "study.out", "study.threads",
  };
  return keys;
}

class ConfigReader {
 public:
  explicit ConfigReader(const ConfigMap& map) : map_(map) {}

  double number(const std::string& key, double fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    return to_number(key, v->scalar);
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    return to_integer(key, v->scalar);
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    try {
      return std::stoull(v->scalar);
    } catch (...) {
      throw ConfigError("config key '" + key + "' is not an unsigned integer: " + v->scalar);
    }
  }
  bool boolean(const std::string& key, bool fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    if (v->scalar == "true" || v->scalar == "1") return true;
    if (v->scalar == "false" || v->scalar == "0") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: " + v->scalar);
  }
  std::string text(const std::string& key, const std::string& fallback) {
    const ConfigValue* v = find(key);
    return v ? v->scalar : fallback;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : items(*v)) out.push_back(to_number(key, item));
    return out;
  }
  std::vector<std::int64_t> integers(const std::string& key, std::vector<std::int64_t> fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    std::vector<std::int64_t> out;
    for (const auto& item : items(*v)) out.push_back(to_integer(key, item));
    return out;
  }
  std::vector<std::string> texts(const std::string& key, std::vector<std::string> fallback) {
    const ConfigValue* v = find(key);
    if (!v) return fallback;
    return items(*v);
  }

  void check_unknown_keys() const {
    std::string offenders;
    for (const auto& [key, value] : map_) {
      if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
        if (!offenders.empty()) offenders += ", ";
        offenders += key;
      }
    }
    if (!offenders.empty())
      throw ConfigError("unknown config keys: " + offenders);
  }

 private:
  const ConfigValue* find(const std::string& key) const {
    const auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second;
  }
  static std::vector<std::string> items(const ConfigValue& v) {
    if (v.type == ConfigValue::Type::kList) return v.list;
    return {v.scalar};
  }
  static double to_number(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double x = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return x;
    } catch (...) {
      throw ConfigError("config key '" + key + "' is not a number: " + s);
    }
  }
  static std::int64_t to_integer(const std::string& key, const std::string& s) {
    if (s == "unlimited" || s == "inf") return kUnlimitedBudget;
    try {
      std::size_t used = 0;
      const std::int64_t x = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return x;
    } catch (...) {
      throw ConfigError("config key '" + key + "' is not an integer: " + s);
    }
  }

  const ConfigMap& map_;
};

}  // namespace detail

inline ScenarioConfig resolve_scenario(const ConfigMap& map) {
  detail::ConfigReader reader(map);
  reader.check_unknown_keys();
  ScenarioConfig cfg;
  auto& mp = cfg.marketplace;
  mp.members = static_cast<int>(reader.integer("marketplace.members", mp.members));
  mp.campaigns = static_cast<int>(reader.integer("marketplace.campaigns", mp.campaigns));
  mp.horizon = static_cast<int>(reader.integer("marketplace.horizon", mp.horizon));
  {
    const auto budgets = reader.integers("marketplace.budget_cents", {kUnlimitedBudget});
    mp.budgets.assign(budgets.begin(), budgets.end());
    const auto rates = reader.integers("marketplace.value_rate_cents", {100});
    mp.value_rates.assign(rates.begin(), rates.end());
  }
  mp.request_rate = reader.number("marketplace.request_rate", mp.request_rate);
  mp.affinity_base = reader.number("marketplace.affinity_base", mp.affinity_base);
  mp.affinity_spread = reader.number("marketplace.affinity_spread", mp.affinity_spread);
  mp.targeting = reader.text("marketplace.targeting", mp.targeting);
  mp.reserve = reader.integer("marketplace.reserve_cents", mp.reserve);
  mp.mechanism = reader.text("marketplace.mechanism", mp.mechanism);
  mp.pacing_rate0 = reader.number("marketplace.pacing_rate0", mp.pacing_rate0);
  mp.pacing_epsilon = reader.number("marketplace.pacing_epsilon", mp.pacing_epsilon);
  mp.pacing_selectivity = reader.number("marketplace.pacing_selectivity", mp.pacing_selectivity);
  mp.fixed_requests = reader.boolean("marketplace.fixed_requests", mp.fixed_requests);

  cfg.treatment.side = reader.text("treatment.side", cfg.treatment.side);
  cfg.treatment.multiplier = reader.number("treatment.multiplier", cfg.treatment.multiplier);
  cfg.treatment.carryover = reader.number("treatment.carryover", cfg.treatment.carryover);

  cfg.model.kind = reader.text("model.kind", cfg.model.kind);
  auto& an = cfg.model.analytic;
  an.baseline = reader.number("model.baseline", an.baseline);
  an.lift = reader.number("model.lift", an.lift);
  an.cannibalization = reader.number("model.cannibalization", an.cannibalization);
  an.slope = reader.number("model.slope", an.slope);
  an.noise_sd = reader.number("model.noise_sd", an.noise_sd);
  auto& panel = cfg.model.panel;
  panel.periods = static_cast<int>(reader.integer("model.periods", panel.periods));
  panel.period_mean = reader.number("model.period_mean", panel.period_mean);
  panel.member_sd = reader.number("model.member_sd", panel.member_sd);
  panel.period_sd = reader.number("model.period_sd", panel.period_sd);
  panel.scale_log_sd = reader.number("model.scale_log_sd", panel.scale_log_sd);

  cfg.design.kind = reader.text("design.kind", cfg.design.kind);
  cfg.design.treated_units =
      static_cast<int>(reader.integer("design.treated_units", cfg.design.treated_units));
  cfg.design.split_p = reader.number("design.split_p", cfg.design.split_p);
  cfg.design.balanced = reader.boolean("design.balanced", cfg.design.balanced);
  cfg.design.periods = static_cast<int>(reader.integer("design.periods", cfg.design.periods));

  cfg.study.reps = static_cast<int>(reader.integer("study.reps", cfg.study.reps));
  cfg.study.alpha = reader.number("study.alpha", cfg.study.alpha);
  cfg.study.effects = reader.numbers("study.effects", cfg.study.effects);
  cfg.study.estimand = reader.text("study.estimand", cfg.study.estimand);
  cfg.study.designs = reader.texts("study.designs", cfg.study.designs);
  {
    const auto grid = reader.integers("study.k_grid", {});
    cfg.study.k_grid.assign(grid.begin(), grid.end());
  }
  cfg.study.seed = reader.unsigned_integer("study.seed", cfg.study.seed);
  cfg.study.out = reader.text("study.out", cfg.study.out);
  cfg.study.threads = static_cast<int>(reader.integer("study.threads", cfg.study.threads));

  // Cross-field checks with the offending keys called out.
  std::string bad;
  auto flag = [&bad](bool ok, const char* key) {
    if (ok) return;
    if (!bad.empty()) bad += ", ";
    bad += key;
  };
  flag(mp.members >= 1, "marketplace.members");
  flag(mp.campaigns >= 1, "marketplace.campaigns");
  flag(mp.horizon >= 1, "marketplace.horizon");
  flag(mp.request_rate >= 0.0, "marketplace.request_rate");
  flag(mp.targeting == "all" || mp.targeting == "blocks", "marketplace.targeting");
  flag(mp.mechanism == "second-price" || mp.mechanism == "first-price",
       "marketplace.mechanism");
  flag(mp.reserve >= 0, "marketplace.reserve_cents");
  for (Cents b : mp.budgets) flag(b >= 0, "marketplace.budget_cents");
  flag(cfg.treatment.side == "member" || cfg.treatment.side == "campaign", "treatment.side");
  flag(cfg.treatment.multiplier >= 0.0, "treatment.multiplier");
  flag(cfg.model.kind == "mechanistic" || cfg.model.kind == "constant-cannibalization" ||
           cfg.model.kind == "diminishing-returns" || cfg.model.kind == "budget-share" ||
           cfg.model.kind == "panel",
       "model.kind");
  flag(an.cannibalization >= 0.0, "model.cannibalization");
  flag(an.noise_sd >= 0.0, "model.noise_sd");
  flag(cfg.design.kind == "member-cr" || cfg.design.kind == "campaign-cr" ||
           cfg.design.kind == "switchback" || cfg.design.kind == "budget-split",
       "design.kind");
  flag(cfg.design.treated_units >= 0, "design.treated_units");
  flag(cfg.design.periods >= 0, "design.periods");
  flag(cfg.design.split_p >= 0.0 && cfg.design.split_p <= 1.0, "design.split_p");
  flag(cfg.study.reps >= 1, "study.reps");
  flag(cfg.study.alpha > 0.0 && cfg.study.alpha < 1.0, "study.alpha");
  flag(cfg.study.estimand == "delivered" || cfg.study.estimand == "revenue", "study.estimand");
  for (const auto& d : cfg.study.designs)
    flag(d == "member-cr" || d == "campaign-cr" || d == "switchback" || d == "budget-split",
         "study.designs");
  if (!bad.empty()) throw ConfigError("invalid config values for keys: " + bad);
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  return resolve_scenario(parse_config_file(path));
}

// ---------------------------------------------------------------------------
// Builders: concrete simulation objects from the resolved scenario
// ---------------------------------------------------------------------------

inline Marketplace build_marketplace(const ScenarioConfig& cfg, std::uint64_t seed) {
  const auto& spec = cfg.marketplace;
  Marketplace market;
  market.horizon = spec.horizon;
  market.seed = seed;
  market.reserve_price = spec.reserve;
  market.mechanism = spec.mechanism == "first-price" ? AuctionMechanism::kFirstPrice
                                                     : AuctionMechanism::kSecondPrice;
  market.fixed_requests = spec.fixed_requests;
  const int n = spec.members;
  const int m = spec.campaigns;
  market.members.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    MemberProfile member;
    member.id = i;
    member.request_rate = spec.request_rate;
    const double ramp = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    member.affinity = {spec.affinity_base * (1.0 + spec.affinity_spread * ramp)};
    market.members.push_back(std::move(member));
  }
  for (int j = 0; j < m; ++j) {
    Campaign c;
    c.id = j;
    c.budget = spec.budgets[static_cast<std::size_t>(j) % spec.budgets.size()];
    c.params.value_rate = spec.value_rates[static_cast<std::size_t>(j) % spec.value_rates.size()];
    c.params.pacing_initial_rate = spec.pacing_rate0;
    c.params.pacing_step = spec.pacing_epsilon;
    c.params.pacing_selectivity = spec.pacing_selectivity;
    if (spec.targeting == "blocks") {
      const int lo = static_cast<int>((static_cast<std::int64_t>(j) * n) / m);
      const int hi = static_cast<int>((static_cast<std::int64_t>(j + 1) * n) / m);
      for (int i = lo; i < hi; ++i) c.target.push_back(i);
    } else {
      for (int i = 0; i < n; ++i) c.target.push_back(i);
    }
    market.campaigns.push_back(std::move(c));
  }
  validate(market);
  return market;
}

inline OutcomeModelRef build_model(const ScenarioConfig& cfg) {
  OutcomeModelRef model;
  if (cfg.model.kind == "mechanistic") {
    model.backend = OutcomeModelRef::Backend::kMechanistic;
  } else if (cfg.model.kind == "panel") {
    model.backend = OutcomeModelRef::Backend::kPanel;
    model.panel = cfg.model.panel;
    model.panel.carryover = cfg.treatment.carryover;
  } else {
    model.backend = OutcomeModelRef::Backend::kAnalytic;
    model.analytic = cfg.model.analytic;
    if (cfg.model.kind == "diminishing-returns")
      model.analytic.kind = AnalyticKind::kDiminishingReturns;
    else if (cfg.model.kind == "budget-share")
      model.analytic.kind = AnalyticKind::kBudgetShare;
    else
      model.analytic.kind = AnalyticKind::kConstantCannibalization;
  }
  return model;
}

inline TreatmentSpec build_treatment(const ScenarioConfig& cfg) {
  TreatmentSpec t;
  t.side = cfg.treatment.side == "campaign" ? TreatmentSpec::Side::kCampaign
                                            : TreatmentSpec::Side::kMember;
  t.multiplier = cfg.treatment.multiplier;
  t.carryover = cfg.treatment.carryover;
  return t;
}

inline DesignKind design_kind_from_name(const std::string& name) {
  if (name == "member-cr") return DesignKind::kMemberCr;
  if (name == "campaign-cr") return DesignKind::kCampaignCr;
  if (name == "switchback") return DesignKind::kSwitchback;
  if (name == "budget-split") return DesignKind::kBudgetSplit;
  throw ConfigError("unknown design: " + name);
}

// Draws one assignment for the configured design. treated_units == 0 means
// half the units; switchback period count defaults to the horizon.
inline AssignmentPlan draw_plan(const ScenarioConfig& cfg, DesignKind kind, std::uint64_t seed) {
  const int n = cfg.marketplace.members;
  const int m = cfg.marketplace.campaigns;
  switch (kind) {
    case DesignKind::kMemberCr: {
      const int n1 = cfg.design.treated_units > 0 ? cfg.design.treated_units : n / 2;
      return member_cr(n, n1, seed);
    }
    case DesignKind::kCampaignCr: {
      const int m1 = cfg.design.treated_units > 0 ? cfg.design.treated_units : m / 2;
      return campaign_cr(m, m1, seed);
    }
    case DesignKind::kSwitchback: {
      int periods = cfg.design.periods > 0 ? cfg.design.periods : cfg.marketplace.horizon;
      if (cfg.model.kind == "panel") periods = cfg.model.panel.periods;
      return switchback(periods, seed, cfg.design.balanced);
    }
    case DesignKind::kBudgetSplit:
      return budget_split(n, cfg.design.split_p, seed);
  }
  throw ConfigError("unknown design kind");
}

// Canonical flat echo of the resolved scenario; loadable as a config.
inline ConfigMap scenario_manifest(const ScenarioConfig& cfg) {
  ConfigMap map;
  auto put = [&map](const std::string& key, const std::string& value) {
    ConfigValue v;
    v.scalar = value;
    map[key] = v;
  };
  auto put_list = [&map](const std::string& key, const std::vector<std::string>& values) {
    ConfigValue v;
    v.type = ConfigValue::Type::kList;
    v.list = values;
    map[key] = v;
  };
  const auto& mp = cfg.marketplace;
  put("marketplace.members", std::to_string(mp.members));
  put("marketplace.campaigns", std::to_string(mp.campaigns));
  put("marketplace.horizon", std::to_string(mp.horizon));
  {
    std::vector<std::string> budgets, rates;
    for (Cents b : mp.budgets)
      budgets.push_back(is_unlimited(b) ? "unlimited" : std::to_string(b));
    for (Cents r : mp.value_rates) rates.push_back(std::to_string(r));
    put_list("marketplace.budget_cents", budgets);
    put_list("marketplace.value_rate_cents", rates);
  }
  put("marketplace.request_rate", format_number(mp.request_rate));
  put("marketplace.affinity_base", format_number(mp.affinity_base));
  put("marketplace.affinity_spread", format_number(mp.affinity_spread));
  put("marketplace.targeting", mp.targeting);
  put("marketplace.reserve_cents", std::to_string(mp.reserve));
  put("marketplace.mechanism", mp.mechanism);
  put("marketplace.pacing_rate0", format_number(mp.pacing_rate0));
  put("marketplace.pacing_epsilon", format_number(mp.pacing_epsilon));
  put("marketplace.pacing_selectivity", format_number(mp.pacing_selectivity));
  put("marketplace.fixed_requests", mp.fixed_requests ? "true" : "false");
  put("treatment.side", cfg.treatment.side);
  put("treatment.multiplier", format_number(cfg.treatment.multiplier));
  put("treatment.carryover", format_number(cfg.treatment.carryover));
  put("model.kind", cfg.model.kind);
  put("model.baseline", format_number(cfg.model.analytic.baseline));
  put("model.lift", format_number(cfg.model.analytic.lift));
  put("model.cannibalization", format_number(cfg.model.analytic.cannibalization));
  put("model.slope", format_number(cfg.model.analytic.slope));
  put("model.noise_sd", format_number(cfg.model.analytic.noise_sd));
  put("model.periods", std::to_string(cfg.model.panel.periods));
  put("model.period_mean", format_number(cfg.model.panel.period_mean));
  put("model.member_sd", format_number(cfg.model.panel.member_sd));
  put("model.period_sd", format_number(cfg.model.panel.period_sd));
  put("model.scale_log_sd", format_number(cfg.model.panel.scale_log_sd));
  put("design.kind", cfg.design.kind);
  put("design.treated_units", std::to_string(cfg.design.treated_units));
  put("design.split_p", format_number(cfg.design.split_p));
  put("design.balanced", cfg.design.balanced ? "true" : "false");
  put("design.periods", std::to_string(cfg.design.periods));
  put("study.reps", std::to_string(cfg.study.reps));
  put("study.alpha", format_number(cfg.study.alpha));
  {
    std::vector<std::string> effects;
    for (double e : cfg.study.effects) effects.push_back(format_number(e));
    put_list("study.effects", effects);
    put_list("study.designs", cfg.study.designs);
    std::vector<std::string> grid;
    for (int k : cfg.study.k_grid) grid.push_back(std::to_string(k));
    if (!grid.empty()) put_list("study.k_grid", grid);
  }
  put("study.estimand", cfg.study.estimand);
  put("study.seed", std::to_string(cfg.study.seed));
  // study.out and study.threads are runtime placement knobs, not part of the
  // experiment identity; reruns take them from the command line.
  return map;
}

inline void write_manifest_csv(const ConfigMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open output file: " + path);
  out << "key,value\n";
  for (const auto& [key, value] : map) out << key << ',' << value.render() << '\n';
}

}  // namespace mktsim
