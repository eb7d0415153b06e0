#include "critr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "critr/csv.hpp"
#include "critr/error.hpp"

namespace critr {

namespace {

void validate_record(const SubjectRecord& rec, std::size_t ncov, std::optional<int> kappa) {
  if (rec.covariates.size() != ncov) {
    throw ValidationError(rec.id, "expected " + std::to_string(ncov) + " covariates, got " +
                                      std::to_string(rec.covariates.size()));
  }
  for (const double v : rec.covariates) {
    if (!std::isfinite(v)) throw ValidationError(rec.id, "non-finite covariate value");
  }
  if (rec.treatment != 0 && rec.treatment != 1) {
    throw ValidationError(rec.id, "treatment must be 0 or 1");
  }
  if (rec.delta != 0 && rec.delta != 1) throw ValidationError(rec.id, "delta must be 0 or 1");
  if (!std::isfinite(rec.observed_time)) throw ValidationError(rec.id, "non-finite time");
  if (rec.delta == 1) {
    if (rec.observed_time <= 0.0) {
      throw ValidationError(rec.id, "observed time must be positive when delta = 1");
    }
    if (!rec.cause) throw ValidationError(rec.id, "cause is required when delta = 1");
    if (*rec.cause < 1 || (kappa && *rec.cause > *kappa)) {
      throw ValidationError(rec.id, "cause " + std::to_string(*rec.cause) + " outside {1.." +
                                        (kappa ? std::to_string(*kappa) : std::string("kappa")) +
                                        "}");
    }
  } else if (rec.observed_time < 0.0) {
    throw ValidationError(rec.id, "censoring time must be non-negative");
  }
}

}  // namespace

Dataset::Dataset(std::vector<std::string> covariate_names, std::vector<SubjectRecord> records,
                 std::optional<int> kappa, std::string treatment_name)
    : covariate_names_(std::move(covariate_names)),
      records_(std::move(records)),
      treatment_name_(std::move(treatment_name)) {
  std::set<std::string> seen;
  for (const auto& name : covariate_names_) {
    if (!seen.insert(name).second) throw SchemaError("duplicate covariate column '" + name + "'");
    if (name == treatment_name_) {
      throw SchemaError("covariate '" + name + "' collides with the treatment column");
    }
  }
  if (kappa && *kappa < 1) throw SchemaError("kappa must be at least 1");
  int max_cause = 1;
  for (auto& rec : records_) {
    if (rec.delta == 0) rec.cause.reset();
    validate_record(rec, covariate_names_.size(), kappa);
    if (rec.cause) max_cause = std::max(max_cause, *rec.cause);
  }
  kappa_ = kappa.value_or(max_cause);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    cluster_index_[records_[i].cluster].push_back(i);
  }
}

std::optional<std::size_t> Dataset::covariate_position(std::string_view name) const {
  const auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
  if (it == covariate_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - covariate_names_.begin());
}

Dataset Dataset::filter(const std::function<bool(const SubjectRecord&)>& keep) const {
  std::vector<SubjectRecord> kept;
  kept.reserve(records_.size());
  std::copy_if(records_.begin(), records_.end(), std::back_inserter(kept), keep);
  return with_records(std::move(kept));
}

Dataset Dataset::uncensored() const {
  return filter([](const SubjectRecord& r) { return r.delta == 1; });
}

Dataset Dataset::with_records(std::vector<SubjectRecord> records) const {
  return Dataset(covariate_names_, std::move(records), kappa_, treatment_name_);
}

std::vector<int> Dataset::clusters() const {
  std::vector<int> out(records_.size());
  std::transform(records_.begin(), records_.end(), out.begin(),
                 [](const SubjectRecord& r) { return r.cluster; });
  return out;
}

std::size_t Dataset::event_count(std::optional<int> cause) const {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(), [&](const SubjectRecord& r) {
        return r.delta == 1 && (!cause || r.cause == cause);
      }));
}

Dataset read_dataset(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty input: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = csv::split_line(line);

  auto locate = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing required column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_cluster = locate(schema.cluster);
  const std::size_t c_treat = locate(schema.treatment);
  const std::size_t c_delta = locate(schema.delta);
  const std::size_t c_time = locate(schema.time);
  const std::size_t c_cause = locate(schema.cause);
  const std::set<std::size_t> required{c_cluster, c_treat, c_delta, c_time, c_cause};
  if (required.size() != 5) throw SchemaError("schema maps two roles to the same column");

  std::vector<std::string> covariate_names;
  std::vector<std::size_t> covariate_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (required.count(j)) continue;
    if (header[j].empty()) throw SchemaError("empty column name at position " + std::to_string(j + 1));
    covariate_names.push_back(header[j]);
    covariate_cols.push_back(j);
  }

  std::vector<SubjectRecord> records;
  std::size_t row = 0;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError(row, "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
    }
    auto missing = [&](std::size_t j) { return csv::is_missing(fields[j]); };
    auto number = [&](std::size_t j) {
      const auto v = csv::parse_double(fields[j]);
      if (!v) throw ValidationError(row, "column '" + header[j] + "': not a number: '" + fields[j] + "'");
      return *v;
    };
    auto integer = [&](std::size_t j) {
      const auto v = csv::parse_integer(fields[j]);
      if (!v) throw ValidationError(row, "column '" + header[j] + "': not an integer: '" + fields[j] + "'");
      return static_cast<int>(*v);
    };

    bool complete = !missing(c_cluster) && !missing(c_treat) && !missing(c_delta) && !missing(c_time);
    for (const std::size_t j : covariate_cols) complete = complete && !missing(j);
    if (complete) {
      const int delta = integer(c_delta);
      if (delta == 1 && missing(c_cause)) complete = false;
    }
    if (!complete) {
      ++dropped;
      continue;
    }

    SubjectRecord rec;
    rec.id = row;
    rec.cluster = integer(c_cluster);
    rec.treatment = integer(c_treat);
    rec.delta = integer(c_delta);
    rec.observed_time = number(c_time);
    if (rec.delta == 1) rec.cause = integer(c_cause);
    rec.covariates.reserve(covariate_cols.size());
    for (const std::size_t j : covariate_cols) rec.covariates.push_back(number(j));
    validate_record(rec, covariate_cols.size(), schema.causes);
    records.push_back(std::move(rec));
  }
  Dataset d(std::move(covariate_names), std::move(records), schema.causes, schema.treatment);
  d.set_dropped_rows(dropped);
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open data file '" + path.string() + "'");
  return read_dataset(in, schema);
}

void write_dataset(const Dataset& d, std::ostream& out, const CsvSchema& schema) {
  for (const auto& name : d.covariate_names()) out << csv::escape(name) << ',';
  out << csv::escape(schema.treatment) << ',' << csv::escape(schema.delta) << ','
      << csv::escape(schema.time) << ',' << csv::escape(schema.cause) << ','
      << csv::escape(schema.cluster) << '\n';
  for (const auto& rec : d.records()) {
    for (const double v : rec.covariates) out << csv::format_double(v) << ',';
    out << rec.treatment << ',' << rec.delta << ',' << csv::format_double(rec.observed_time) << ',';
    if (rec.cause) out << *rec.cause;
    out << ',' << rec.cluster << '\n';
  }
}

void save_dataset(const Dataset& d, const std::filesystem::path& path, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_dataset(d, out, schema);
}

}  // namespace critr
