#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "critr/data.hpp"
#include "critr/types.hpp"

namespace critr {

// Pairwise product column, referenced in column lists as "first:second".
struct Interaction {
  std::string first;
  std::string second;

  [[nodiscard]] std::string name() const { return first + ":" + second; }
  bool operator==(const Interaction&) const = default;
};

// Threshold ζ1(x) a benefit must exceed for treatment: a constant or a column.
struct CostThreshold {
  double constant = 0.0;
  std::optional<std::string> column;

  [[nodiscard]] Vector values(const Dataset& d) const;
  bool operator==(const CostThreshold&) const = default;
};

// Column recipes for the nuisance, treatment-free and blip designs. Lists
// never contain the intercept; it is added when the design is built.
// Treatment-free and blip lists can be given once for all causes and
// overridden per cause.
struct ModelSpec {
  std::vector<std::string> treatment_cols;
  std::vector<std::string> censoring_cols;
  std::vector<std::string> cause_cols;
  std::vector<std::string> treatment_free_cols;
  std::vector<std::string> blip_cols;
  std::map<int, std::vector<std::string>> treatment_free_by_cause;
  std::map<int, std::vector<std::string>> blip_by_cause;
  std::optional<std::vector<std::string>> composite_treatment_free_cols;
  std::optional<std::vector<std::string>> composite_blip_cols;
  std::vector<Interaction> interactions;
  CostThreshold cost;

  [[nodiscard]] const std::vector<std::string>& treatment_free(int cause) const;
  [[nodiscard]] const std::vector<std::string>& blip(int cause) const;
  [[nodiscard]] const std::vector<std::string>& composite_treatment_free() const;
  [[nodiscard]] const std::vector<std::string>& composite_blip() const;

  // Throws SchemaError for any column that is neither in `d` nor a declared
  // interaction, and for per-cause overrides beyond d.kappa().
  void validate(const Dataset& d) const;

  bool operator==(const ModelSpec&) const = default;
};

struct DesignOptions {
  // Evaluate the treatment column (and its interactions) at this value.
  std::optional<int> treatment_override;
};

// Dense n × p design: optional leading intercept, then `cols` in order.
// Columns resolve to covariates, the treatment column, or declared
// interactions. Unknown or duplicated names raise SchemaError.
Matrix build_design(const Dataset& d, std::span<const std::string> cols, bool add_intercept,
                    std::span<const Interaction> interactions = {},
                    const DesignOptions& options = {});

// Column labels matching build_design output.
std::vector<std::string> design_names(std::span<const std::string> cols, bool add_intercept);

inline constexpr const char* kInterceptName = "(intercept)";

// Contents of a model configuration file: column roles plus model recipes.
struct ModelConfig {
  CsvSchema schema;
  ModelSpec spec;
};

ModelConfig parse_model_config(std::istream& in);
ModelConfig load_model_config(const std::filesystem::path& path);

}  // namespace critr
