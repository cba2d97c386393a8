#include "lrbms/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lrbms {

Parameter resolve_mu_bar(const EstimatorPolicy& policy, const Parameter& mu) {
  return policy.mu_bar_online ? mu : policy.mu_bar_fixed;
}

Parameter resolve_mu_hat(const EstimatorPolicy& policy, const ParameterBox& box) {
  return policy.mu_hat_midpoint ? box.midpoint() : policy.mu_hat_fixed;
}

namespace {

constexpr double pi = 3.141592653589793238462643383279502884;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError("not a number for " + what + ": '" + text + "'");
  return v;
}

int parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  int v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError("not an integer for " + what + ": '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ','))
    out.push_back(trim(item));
  if (!text.empty() && text.back() == ',')
    out.push_back("");
  return out;
}

/// Accepted coefficient forms: "c", "mu<i>", and "c*mu<i>".
ThetaCoefficient parse_theta(const std::string& text) {
  const std::string t = trim(text);
  const std::size_t star = t.find('*');
  std::string scale_part, mu_part;
  if (star != std::string::npos) {
    scale_part = trim(t.substr(0, star));
    mu_part = trim(t.substr(star + 1));
  } else if (t.rfind("mu", 0) == 0) {
    mu_part = t;
  } else {
    scale_part = t;
  }
  double scale = 1.0;
  if (!scale_part.empty())
    scale = parse_double(scale_part, "coefficient scale");
  if (mu_part.empty())
    return ThetaCoefficient::constant(scale);
  if (mu_part.rfind("mu", 0) != 0)
    throw ConfigError("malformed coefficient '" + text + "', expected c, mu<i> or c*mu<i>");
  const int index = parse_int(mu_part.substr(2), "coefficient parameter index");
  if (index < 0)
    throw ConfigError("negative parameter index in coefficient '" + text + "'");
  return ThetaCoefficient::parameter(index, scale);
}

ScalarField make_field(const std::string& name) {
  if (name == "one")
    return [](Vec2) { return 1.0; };
  if (name == "channel")
    return [](Vec2 p) {
      return std::clamp((0.125 - std::abs(p.y - 0.375)) / 0.05, 0.0, 1.0);
    };
  if (name == "bumps")
    return [](Vec2 p) { return 1.0 + 0.5 * std::sin(2.0 * pi * p.x) * std::sin(2.0 * pi * p.y); };
  if (name == "ramp")
    return [](Vec2 p) { return 0.1 + 0.9 * p.x; };
  throw ConfigError("unknown scalar field '" + name + "', expected one, channel, bumps or ramp");
}

using Entries = std::vector<std::pair<std::string, std::string>>;
using Sections = std::map<std::string, Entries>;

Sections parse_ini(const std::string& text) {
  Sections sections;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';')
      continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      sections[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": entry outside of any section");
    sections[section].push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }
  return sections;
}

void apply_preset(RunConfig& c) {
  if (c.preset == "manufactured") {
    c.lambda_components = {"one"};
    c.lambda_thetas = {ThetaCoefficient::parameter(0)};
    c.kappa = "identity";
    c.source = "sinsin";
    c.box_lower = {0.5};
    c.box_upper = {2.0};
    c.coarse_per_dim = 2;
    c.fine_per_dim = 4;
  } else if (c.preset == "checkerboard") {
    c.lambda_components = {"one", "channel"};
    c.lambda_thetas = {ThetaCoefficient::constant(1.0), ThetaCoefficient::parameter(0)};
    c.kappa = "checkerboard";
    c.kappa_contrast = 100.0;
    c.source = "constant";
    c.source_value = 1.0;
    c.box_lower = {0.1};
    c.box_upper = {1.0};
    c.coarse_per_dim = 4;
    c.fine_per_dim = 4;
  } else if (c.preset != "custom") {
    throw ConfigError("unknown preset '" + c.preset +
                      "', expected manufactured, checkerboard or custom");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  const Sections sections = parse_ini(text);

  const std::set<std::string> known_sections = {"problem", "grid", "discretization", "estimator",
                                                "greedy"};
  for (const auto& [name, entries] : sections)
    if (!known_sections.count(name))
      throw ConfigError("unknown section [" + name + "]");

  RunConfig config;

  // The preset decides the defaults, so it is read before everything else.
  config.preset = "custom";
  if (auto it = sections.find("problem"); it != sections.end())
    for (const auto& [key, value] : it->second)
      if (key == "preset")
        config.preset = value;
  apply_preset(config);

  bool saw_components = false, saw_thetas = false, saw_box_lower = false, saw_box_upper = false;

  for (const auto& [section, entries] : sections) {
    for (const auto& [key, value] : entries) {
      const std::string where = "[" + section + "] " + key;
      if (section == "problem") {
        if (key == "preset") {
          // handled above
        } else if (key == "lambda_components") {
          config.lambda_components = split_list(value);
          saw_components = true;
        } else if (key == "lambda_thetas") {
          config.lambda_thetas.clear();
          for (const std::string& token : split_list(value))
            config.lambda_thetas.push_back(parse_theta(token));
          saw_thetas = true;
        } else if (key == "lambda_fixed") {
          config.lambda_fixed = value;
        } else if (key == "kappa") {
          config.kappa = value;
        } else if (key == "kappa_contrast") {
          config.kappa_contrast = parse_double(value, where);
        } else if (key == "kappa_table") {
          config.kappa_table = value;
        } else if (key == "source") {
          config.source = value;
        } else if (key == "source_value") {
          config.source_value = parse_double(value, where);
        } else if (key == "box_lower") {
          config.box_lower.clear();
          for (const std::string& token : split_list(value))
            config.box_lower.push_back(parse_double(token, where));
          saw_box_lower = true;
        } else if (key == "box_upper") {
          config.box_upper.clear();
          for (const std::string& token : split_list(value))
            config.box_upper.push_back(parse_double(token, where));
          saw_box_upper = true;
        } else {
          throw ConfigError("unknown key '" + key + "' in section [problem]");
        }
      } else if (section == "grid") {
        if (key == "coarse_per_dim")
          config.coarse_per_dim = parse_int(value, where);
        else if (key == "fine_per_dim")
          config.fine_per_dim = parse_int(value, where);
        else
          throw ConfigError("unknown key '" + key + "' in section [grid]");
      } else if (section == "discretization") {
        if (key == "penalty_factor")
          config.penalty_factor = parse_double(value, where);
        else if (key == "cg_tolerance")
          config.cg_tolerance = parse_double(value, where);
        else if (key == "cg_max_iterations")
          config.cg_max_iterations = parse_int(value, where);
        else
          throw ConfigError("unknown key '" + key + "' in section [discretization]");
      } else if (section == "estimator") {
        if (key == "mu_bar") {
          if (value == "online") {
            config.estimator.mu_bar_online = true;
          } else {
            config.estimator.mu_bar_online = false;
            config.estimator.mu_bar_fixed.values.clear();
            for (const std::string& token : split_list(value))
              config.estimator.mu_bar_fixed.values.push_back(parse_double(token, where));
          }
        } else if (key == "mu_hat") {
          if (value == "midpoint") {
            config.estimator.mu_hat_midpoint = true;
          } else {
            config.estimator.mu_hat_midpoint = false;
            config.estimator.mu_hat_fixed.values.clear();
            for (const std::string& token : split_list(value))
              config.estimator.mu_hat_fixed.values.push_back(parse_double(token, where));
          }
        } else {
          throw ConfigError("unknown key '" + key + "' in section [estimator]");
        }
      } else if (section == "greedy") {
        if (key == "tolerance")
          config.greedy_tolerance = parse_double(value, where);
        else if (key == "max_extensions")
          config.greedy_max_extensions = parse_int(value, where);
        else if (key == "training_size")
          config.training_size = parse_int(value, where);
        else if (key == "drop_tol")
          config.greedy_drop_tol = parse_double(value, where);
        else
          throw ConfigError("unknown key '" + key + "' in section [greedy]");
      }
    }
  }

  // Consistency checks; everything below is independent of the grid size.
  if (config.preset == "custom") {
    if (!saw_components || !saw_thetas)
      throw ConfigError("custom preset requires lambda_components and lambda_thetas");
    if (!saw_box_lower || !saw_box_upper)
      throw ConfigError("custom preset requires box_lower and box_upper");
  }
  if (config.lambda_components.empty())
    throw ConfigError("lambda_components must not be empty");
  if (config.lambda_components.size() != config.lambda_thetas.size())
    throw ConfigError("lambda_components and lambda_thetas must have the same length");
  for (const std::string& name : config.lambda_components)
    make_field(name);  // validates the name
  if (config.lambda_fixed != "none")
    make_field(config.lambda_fixed);
  if (config.box_lower.size() != config.box_upper.size() || config.box_lower.empty())
    throw ConfigError("box_lower and box_upper must be non-empty lists of equal length");
  for (std::size_t i = 0; i < config.box_lower.size(); ++i)
    if (!(config.box_lower[i] <= config.box_upper[i]))
      throw ConfigError("parameter box is inverted in component " + std::to_string(i));
  for (const ThetaCoefficient& theta : config.lambda_thetas)
    if (theta.index >= static_cast<int>(config.box_lower.size()))
      throw ConfigError("coefficient references parameter index " + std::to_string(theta.index) +
                        " outside the box of dimension " + std::to_string(config.box_lower.size()));
  if (config.kappa != "identity" && config.kappa != "checkerboard" && config.kappa != "table")
    throw ConfigError("unknown kappa '" + config.kappa +
                      "', expected identity, checkerboard or table");
  if (config.kappa == "checkerboard" && !(config.kappa_contrast > 0.0))
    throw ConfigError("kappa_contrast must be positive");
  if (config.kappa == "table" && config.kappa_table.empty())
    throw ConfigError("kappa = table requires kappa_table");
  if (config.source != "sinsin" && config.source != "constant")
    throw ConfigError("unknown source '" + config.source + "', expected sinsin or constant");
  if (config.coarse_per_dim < 1 || config.fine_per_dim < 1)
    throw ConfigError("grid subdivisions must be at least 1");
  if (!(config.penalty_factor > 0.0))
    throw ConfigError("penalty_factor must be positive");
  if (!(config.cg_tolerance > 0.0))
    throw ConfigError("cg_tolerance must be positive");
  if (!config.estimator.mu_bar_online &&
      config.estimator.mu_bar_fixed.values.size() != config.box_lower.size())
    throw ConfigError("fixed mu_bar has the wrong dimension");
  if (!config.estimator.mu_hat_midpoint &&
      config.estimator.mu_hat_fixed.values.size() != config.box_lower.size())
    throw ConfigError("fixed mu_hat has the wrong dimension");
  if (!(config.greedy_tolerance > 0.0))
    throw ConfigError("greedy tolerance must be positive");
  if (config.greedy_max_extensions < 1)
    throw ConfigError("greedy max_extensions must be at least 1");
  if (config.training_size < 1)
    throw ConfigError("training_size must be at least 1");
  if (!(config.greedy_drop_tol > 0.0))
    throw ConfigError("greedy drop_tol must be positive");
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

Scenario build_scenario(const RunConfig& config) {
  return build_scenario(config, config.coarse_per_dim, config.fine_per_dim);
}

Scenario build_scenario(const RunConfig& config, int coarse_per_dim, int fine_per_dim) {
  Scenario s;
  try {
    s.grid = std::make_unique<NestedGrid>(coarse_per_dim, fine_per_dim);

    AffineScalarField lambda;
    for (std::size_t k = 0; k < config.lambda_components.size(); ++k)
      lambda.add_component(make_field(config.lambda_components[k]), config.lambda_thetas[k]);
    if (config.lambda_fixed != "none")
      lambda.set_fixed_component(make_field(config.lambda_fixed));

    DiffusionTensorField kappa;
    if (config.kappa == "identity")
      kappa = DiffusionTensorField::identity(*s.grid);
    else if (config.kappa == "checkerboard")
      kappa = DiffusionTensorField::checkerboard(*s.grid, config.kappa_contrast);
    else
      kappa = DiffusionTensorField::from_table(*s.grid, config.kappa_table);

    SourceField source;
    if (config.source == "sinsin")
      source = SourceField::from_function(*s.grid, [](Vec2 p) {
        return 2.0 * pi * pi * std::sin(pi * p.x) * std::sin(pi * p.y);
      });
    else
      source = SourceField::constant(*s.grid, config.source_value);

    ParameterBox box{config.box_lower, config.box_upper};
    s.problem = std::make_unique<ParametricProblem>(*s.grid, std::move(lambda), std::move(kappa),
                                                    std::move(source), std::move(box));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid problem data: ") + e.what());
  }
  return s;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& token : split_list(text))
    out.push_back(parse_double(token, "list entry"));
  return out;
}

}  // namespace lrbms
