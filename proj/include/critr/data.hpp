#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace critr {

// One subject: covariates X, treatment A, event indicator Δ, observed time
// (the failure time when Δ = 1, the censoring time otherwise), cause K when
// Δ = 1, and cluster membership R.
struct SubjectRecord {
  std::size_t id = 0;  // 1-based; source data row for loaded files
  std::vector<double> covariates;
  int treatment = 0;
  int delta = 0;
  double observed_time = 0.0;
  std::optional<int> cause;
  int cluster = 0;

  bool operator==(const SubjectRecord&) const = default;
};

// Names of the required CSV columns. Every other column is a covariate.
struct CsvSchema {
  std::string cluster = "cluster";
  std::string treatment = "treatment";
  std::string delta = "delta";
  std::string time = "time";
  std::string cause = "cause";
  // When set, causes above this value are rejected instead of widening kappa.
  std::optional<int> causes;
};

// Immutable collection of validated subject records.
class Dataset {
 public:
  Dataset() = default;

  // Validates every record and builds the cluster index. When `kappa` is not
  // given it is the largest observed cause (1 when there are no events).
  Dataset(std::vector<std::string> covariate_names, std::vector<SubjectRecord> records,
          std::optional<int> kappa = std::nullopt, std::string treatment_name = "treatment");

  [[nodiscard]] std::size_t n() const noexcept { return records_.size(); }
  [[nodiscard]] int kappa() const noexcept { return kappa_; }
  [[nodiscard]] const std::vector<std::string>& covariate_names() const noexcept {
    return covariate_names_;
  }
  [[nodiscard]] const std::vector<SubjectRecord>& records() const noexcept { return records_; }
  [[nodiscard]] const SubjectRecord& operator[](std::size_t i) const { return records_[i]; }
  [[nodiscard]] const std::map<int, std::vector<std::size_t>>& cluster_index() const noexcept {
    return cluster_index_;
  }
  [[nodiscard]] std::size_t cluster_count() const noexcept { return cluster_index_.size(); }
  [[nodiscard]] const std::string& treatment_name() const noexcept { return treatment_name_; }
  [[nodiscard]] std::optional<std::size_t> covariate_position(std::string_view name) const;

  // Rows dropped by complete-case filtering at load time.
  [[nodiscard]] std::size_t dropped_rows() const noexcept { return dropped_rows_; }
  void set_dropped_rows(std::size_t n) noexcept { dropped_rows_ = n; }

  // Subset preserving record order, kappa and covariate names.
  [[nodiscard]] Dataset filter(const std::function<bool(const SubjectRecord&)>& keep) const;
  [[nodiscard]] Dataset uncensored() const;

  // Copy with a transformed record set (same names, same kappa).
  [[nodiscard]] Dataset with_records(std::vector<SubjectRecord> records) const;

  [[nodiscard]] std::vector<int> clusters() const;
  [[nodiscard]] std::size_t event_count(std::optional<int> cause = std::nullopt) const;

 private:
  std::vector<std::string> covariate_names_;
  std::vector<SubjectRecord> records_;
  std::map<int, std::vector<std::size_t>> cluster_index_;
  std::string treatment_name_ = "treatment";
  int kappa_ = 1;
  std::size_t dropped_rows_ = 0;
};

// Reads a UTF-8 CSV with a header row. Rows with a missing required field or
// covariate are dropped (complete-case); invalid values raise ValidationError
// naming the data row. Missing schema columns raise SchemaError.
Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset read_dataset(std::istream& in, const CsvSchema& schema = {});

// Writes covariates then the schema columns; finite values round-trip exactly.
void save_dataset(const Dataset& d, const std::filesystem::path& path, const CsvSchema& schema = {});
void write_dataset(const Dataset& d, std::ostream& out, const CsvSchema& schema = {});

}  // namespace critr
