#include "critr/design.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "critr/csv.hpp"
#include "critr/error.hpp"

namespace critr {

namespace {

// How a named column is read from a record.
struct ColumnRef {
  enum class Kind { covariate, treatment, product } kind = Kind::covariate;
  std::size_t position = 0;
  // For products: the two factors (each a covariate or the treatment).
  std::size_t left = 0, right = 0;
  bool left_is_treatment = false, right_is_treatment = false;
};

bool resolve_simple(const Dataset& d, const std::string& name, std::size_t& pos, bool& is_treatment) {
  if (name == d.treatment_name()) {
    is_treatment = true;
    return true;
  }
  if (const auto p = d.covariate_position(name)) {
    pos = *p;
    is_treatment = false;
    return true;
  }
  return false;
}

ColumnRef resolve(const Dataset& d, const std::string& name, std::span<const Interaction> interactions) {
  ColumnRef ref;
  bool is_treatment = false;
  if (resolve_simple(d, name, ref.position, is_treatment)) {
    ref.kind = is_treatment ? ColumnRef::Kind::treatment : ColumnRef::Kind::covariate;
    return ref;
  }
  const auto it = std::find_if(interactions.begin(), interactions.end(),
                               [&](const Interaction& ix) { return ix.name() == name; });
  if (it != interactions.end()) {
    ref.kind = ColumnRef::Kind::product;
    if (!resolve_simple(d, it->first, ref.left, ref.left_is_treatment)) {
      throw SchemaError("interaction '" + name + "' references unknown column '" + it->first + "'");
    }
    if (!resolve_simple(d, it->second, ref.right, ref.right_is_treatment)) {
      throw SchemaError("interaction '" + name + "' references unknown column '" + it->second + "'");
    }
    return ref;
  }
  throw SchemaError("unknown column '" + name + "'");
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  if (csv::trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = csv::trim(item);
    if (t.empty()) throw SchemaError("empty entry in list '" + value + "'");
    out.emplace_back(t);
  }
  return out;
}

int parse_cause_suffix(const std::string& key, const std::string& prefix) {
  const auto suffix = key.substr(prefix.size());
  const auto k = csv::parse_integer(suffix);
  if (!k || *k < 1) throw SchemaError("invalid cause index in key '" + key + "'");
  return static_cast<int>(*k);
}

}  // namespace

Vector CostThreshold::values(const Dataset& d) const {
  Vector out = Vector::Constant(static_cast<Eigen::Index>(d.n()), constant);
  if (column) {
    const auto pos = d.covariate_position(*column);
    if (!pos) throw SchemaError("unknown cost column '" + *column + "'");
    for (std::size_t i = 0; i < d.n(); ++i) out[static_cast<Eigen::Index>(i)] = d[i].covariates[*pos];
  }
  return out;
}

const std::vector<std::string>& ModelSpec::treatment_free(int cause) const {
  const auto it = treatment_free_by_cause.find(cause);
  return it == treatment_free_by_cause.end() ? treatment_free_cols : it->second;
}

const std::vector<std::string>& ModelSpec::blip(int cause) const {
  const auto it = blip_by_cause.find(cause);
  return it == blip_by_cause.end() ? blip_cols : it->second;
}

const std::vector<std::string>& ModelSpec::composite_treatment_free() const {
  return composite_treatment_free_cols ? *composite_treatment_free_cols : treatment_free(1);
}

const std::vector<std::string>& ModelSpec::composite_blip() const {
  return composite_blip_cols ? *composite_blip_cols : blip(1);
}

void ModelSpec::validate(const Dataset& d) const {
  auto check = [&](const std::vector<std::string>& cols, const char* what) {
    std::set<std::string> seen;
    for (const auto& c : cols) {
      if (!seen.insert(c).second) {
        throw SchemaError(std::string(what) + ": duplicate column '" + c + "'");
      }
      try {
        resolve(d, c, interactions);
      } catch (const SchemaError& e) {
        throw SchemaError(std::string(what) + ": " + e.what());
      }
    }
  };
  check(treatment_cols, "treatment model");
  check(censoring_cols, "censoring model");
  check(cause_cols, "cause model");
  for (int k = 1; k <= d.kappa(); ++k) {
    check(treatment_free(k), "treatment-free model");
    check(blip(k), "blip model");
  }
  check(composite_treatment_free(), "composite treatment-free model");
  check(composite_blip(), "composite blip model");
  for (const auto& [k, cols] : treatment_free_by_cause) {
    if (k > d.kappa()) throw SchemaError("treatment_free override for cause " + std::to_string(k) + " > kappa");
  }
  for (const auto& [k, cols] : blip_by_cause) {
    if (k > d.kappa()) throw SchemaError("blip override for cause " + std::to_string(k) + " > kappa");
  }
  for (const auto& c : treatment_cols) {
    if (c == d.treatment_name()) throw SchemaError("treatment model cannot use the treatment column");
  }
  if (cost.column && !d.covariate_position(*cost.column)) {
    throw SchemaError("unknown cost column '" + *cost.column + "'");
  }
}

Matrix build_design(const Dataset& d, std::span<const std::string> cols, bool add_intercept,
                    std::span<const Interaction> interactions, const DesignOptions& options) {
  std::set<std::string> seen;
  std::vector<ColumnRef> refs;
  refs.reserve(cols.size());
  for (const auto& name : cols) {
    if (!seen.insert(name).second) throw SchemaError("duplicate column '" + name + "' in design");
    refs.push_back(resolve(d, name, interactions));
  }
  const auto n = static_cast<Eigen::Index>(d.n());
  const Eigen::Index offset = add_intercept ? 1 : 0;
  Matrix X(n, offset + static_cast<Eigen::Index>(refs.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = d[static_cast<std::size_t>(i)];
    const double a = options.treatment_override ? *options.treatment_override : rec.treatment;
    if (add_intercept) X(i, 0) = 1.0;
    for (std::size_t j = 0; j < refs.size(); ++j) {
      const auto& ref = refs[j];
      double v = 0.0;
      switch (ref.kind) {
        case ColumnRef::Kind::covariate: v = rec.covariates[ref.position]; break;
        case ColumnRef::Kind::treatment: v = a; break;
        case ColumnRef::Kind::product:
          v = (ref.left_is_treatment ? a : rec.covariates[ref.left]) *
              (ref.right_is_treatment ? a : rec.covariates[ref.right]);
          break;
      }
      X(i, offset + static_cast<Eigen::Index>(j)) = v;
    }
  }
  return X;
}

std::vector<std::string> design_names(std::span<const std::string> cols, bool add_intercept) {
  std::vector<std::string> names;
  if (add_intercept) names.emplace_back(kInterceptName);
  names.insert(names.end(), cols.begin(), cols.end());
  return names;
}

ModelConfig parse_model_config(std::istream& in) {
  ModelConfig config;
  auto& spec = config.spec;
  auto& schema = config.schema;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (csv::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw SchemaError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key(csv::trim(std::string_view(line).substr(0, eq)));
    const std::string value(csv::trim(std::string_view(line).substr(eq + 1)));
    if (!seen.insert(key).second) {
      throw SchemaError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    auto single = [&]() -> std::string {
      if (value.empty() || value.find(',') != std::string::npos) {
        throw SchemaError("config key '" + key + "' expects a single value");
      }
      return value;
    };

    if (key == "column.cluster") {
      schema.cluster = single();
    } else if (key == "column.treatment") {
      schema.treatment = single();
    } else if (key == "column.delta") {
      schema.delta = single();
    } else if (key == "column.time") {
      schema.time = single();
    } else if (key == "column.cause") {
      schema.cause = single();
    } else if (key == "causes") {
      const auto k = csv::parse_integer(single());
      if (!k || *k < 1) throw SchemaError("config key 'causes' must be a positive integer");
      schema.causes = static_cast<int>(*k);
    } else if (key == "treatment") {
      spec.treatment_cols = parse_list(value);
    } else if (key == "censoring") {
      spec.censoring_cols = parse_list(value);
    } else if (key == "cause") {
      spec.cause_cols = parse_list(value);
    } else if (key == "treatment_free") {
      spec.treatment_free_cols = parse_list(value);
    } else if (key.rfind("treatment_free.", 0) == 0) {
      spec.treatment_free_by_cause[parse_cause_suffix(key, "treatment_free.")] = parse_list(value);
    } else if (key == "blip") {
      spec.blip_cols = parse_list(value);
    } else if (key.rfind("blip.", 0) == 0) {
      spec.blip_by_cause[parse_cause_suffix(key, "blip.")] = parse_list(value);
    } else if (key == "composite.treatment_free") {
      spec.composite_treatment_free_cols = parse_list(value);
    } else if (key == "composite.blip") {
      spec.composite_blip_cols = parse_list(value);
    } else if (key == "interactions") {
      for (const auto& item : parse_list(value)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == item.size() ||
            item.find(':', colon + 1) != std::string::npos) {
          throw SchemaError("interaction '" + item + "' must have the form a:b");
        }
        spec.interactions.push_back({item.substr(0, colon), item.substr(colon + 1)});
      }
    } else if (key == "cost") {
      const auto v = single();
      if (const auto c = csv::parse_double(v)) {
        spec.cost.constant = *c;
      } else {
        spec.cost.column = v;
      }
    } else {
      throw SchemaError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return config;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config file '" + path.string() + "'");
  return parse_model_config(in);
}

}  // namespace critr
