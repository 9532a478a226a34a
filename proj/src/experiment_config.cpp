#include "experiment_config.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "crpsreg/error.hpp"
#include "crpsreg/textio.hpp"

namespace crpsreg::cli {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::vector<std::string>>& valid_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"experiment",
       {"seed", "sample_sizes", "replications", "test_points", "bootstrap_draws",
        "slope_tolerance"}},
      {"model", {"kind", "dimension", "L", "center", "amplitude", "xi0", "alpha", "sigma0", "beta"}},
      {"method", {"name", "tuning", "value"}},
  };
  return keys;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& it : items) s += (s.empty() ? "" : ", ") + it;
  return s;
}

std::string section_list() {
  std::vector<std::string> names;
  for (const auto& [name, _] : valid_keys()) names.push_back(name);
  return join(names);
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end)
    throw Error("config key '" + key + "': expected a nonnegative integer, got '" + text + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    return textio::parse_real(text, 0);
  } catch (const Error&) {
    throw Error("config key '" + key + "': expected a number, got '" + text + "'");
  }
}

// Drops '#' comment lines, which the INI reader does not know.
std::string strip_hash_comments(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') line.clear();
    out += line + '\n';
  }
  return out;
}

}  // namespace

ExperimentFile parse_experiment_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(strip_hash_comments(text));
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::map<std::string, std::map<std::string, std::string>> values;
  for (const auto& [section, body] : tree) {
    const auto it = valid_keys().find(section);
    if (it == valid_keys().end()) {
      if (body.empty())
        throw Error("config key '" + section + "' outside a section; valid sections: " + section_list());
      throw Error("unknown config section [" + section + "]; valid sections: " + section_list());
    }
    for (const auto& [key, value] : body) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw Error("unknown config key '" + key + "' in [" + section + "]; valid keys: " +
                    join(it->second));
      values[section][key] = value.data();
    }
  }

  ExperimentFile file;
  for (const auto& [section, kv] : values)
    for (const auto& [key, value] : kv) file.echo[section][key] = value;

  const auto get = [&](const std::string& section, const std::string& key) -> const std::string* {
    const auto s = values.find(section);
    if (s == values.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  };
  const auto require = [&](const std::string& section, const std::string& key) {
    const std::string* v = get(section, key);
    if (!v) throw Error("missing config key '" + key + "' in [" + section + "]");
    return *v;
  };

  // [model]
  const std::string kind = require("model", "kind");
  const auto dim = static_cast<std::size_t>(parse_unsigned("dimension", require("model", "dimension")));
  const auto number = [&](const std::string& key, double fallback) {
    const std::string* v = get("model", key);
    return v ? parse_double(key, *v) : fallback;
  };
  const auto reject = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys)
      if (get("model", k)) throw Error("config key '" + std::string(k) + "' does not apply to kind " + kind);
  };
  ExperimentConfig& cfg = file.config;
  if (kind == "binary_smooth") {
    reject({"xi0", "alpha", "sigma0", "beta"});
    cfg.model = ConditionalModel::binary_smooth(dim, number("L", 1.0), number("center", 0.5),
                                                number("amplitude", 0.4));
  } else if (kind == "gpd_linear") {
    reject({"L", "center", "amplitude"});
    const auto preset = [&] {
      return !get("model", "xi0") && !get("model", "alpha") && !get("model", "sigma0") &&
             !get("model", "beta");
    };
    cfg.model = preset() ? ConditionalModel::gpd_linear(dim)
                         : ConditionalModel::gpd_linear(dim, number("xi0", 0.3), number("alpha", 0.2 / dim),
                                                        number("sigma0", 1.0), number("beta", 0.5 / dim));
  } else {
    throw Error("config key 'kind': expected binary_smooth or gpd_linear, got '" + kind + "'");
  }

  // [method]
  const std::string name = require("method", "name");
  if (name == "knn") cfg.method = Method::kKnn;
  else if (name == "kernel") cfg.method = Method::kKernel;
  else throw Error("config key 'name': expected knn or kernel, got '" + name + "'");
  const std::string* tuning = get("method", "tuning");
  const std::string tuning_kind = tuning ? *tuning : "optimal";
  if (tuning_kind == "optimal") {
    if (get("method", "value")) throw Error("config key 'value' requires tuning = fixed");
    cfg.tuning = {true, 0.0};
  } else if (tuning_kind == "fixed") {
    cfg.tuning = {false, parse_double("value", require("method", "value"))};
  } else {
    throw Error("config key 'tuning': expected optimal or fixed, got '" + tuning_kind + "'");
  }

  // [experiment]
  {
    const std::string sizes = require("experiment", "sample_sizes");
    std::istringstream in(sizes);
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto a = item.find_first_not_of(" \t");
      const auto b = item.find_last_not_of(" \t");
      item = a == std::string::npos ? std::string() : item.substr(a, b - a + 1);
      cfg.sample_sizes.push_back(static_cast<std::size_t>(parse_unsigned("sample_sizes", item)));
    }
  }
  if (const auto* v = get("experiment", "seed")) file.seed = parse_unsigned("seed", *v);
  if (const auto* v = get("experiment", "replications"))
    cfg.replications = static_cast<std::size_t>(parse_unsigned("replications", *v));
  if (const auto* v = get("experiment", "test_points"))
    cfg.test_points = static_cast<std::size_t>(parse_unsigned("test_points", *v));
  if (const auto* v = get("experiment", "bootstrap_draws"))
    file.bootstrap_draws = static_cast<std::size_t>(parse_unsigned("bootstrap_draws", *v));
  if (const auto* v = get("experiment", "slope_tolerance")) {
    file.slope_tolerance = parse_double("slope_tolerance", *v);
    if (!(file.slope_tolerance > 0.0)) throw Error("slope_tolerance must be positive");
  }
  validate(cfg);
  return file;
}

}  // namespace crpsreg::cli
