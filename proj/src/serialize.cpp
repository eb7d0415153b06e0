#include "critr/serialize.hpp"

#include <fstream>
#include <json.hpp>

#include "critr/error.hpp"

namespace critr {

namespace {

using nlohmann::json;

json to_json_vector(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector from_json_vector(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void write_regime_json(const RegimeSet& rs, std::ostream& out) {
  json j;
  j["format"] = "critr-regime";
  j["version"] = 1;
  j["scope"] = to_string(rs.scope);
  j["target_cause"] = rs.target_cause;
  j["cost"] = {{"constant", rs.cost.constant}};
  if (rs.cost.column) j["cost"]["column"] = *rs.cost.column;
  j["interactions"] = json::array();
  for (const auto& ix : rs.interactions) j["interactions"].push_back({ix.first, ix.second});
  json cm;
  cm["kappa"] = rs.cause_model.kappa();
  cm["columns"] = rs.cause_model.columns();
  cm["fits"] = json::array();
  for (const auto& f : rs.cause_model.fits()) cm["fits"].push_back(to_json_vector(f.coefficients));
  j["cause_model"] = cm;
  j["blips"] = json::array();
  for (const auto& b : rs.blips) {
    j["blips"].push_back({{"cause", b.cause},
                          {"treatment_free", b.treatment_free_cols},
                          {"blip", b.blip_cols},
                          {"beta", to_json_vector(b.beta)},
                          {"psi", to_json_vector(b.psi)}});
  }
  out << j.dump(2) << '\n';
}

RegimeSet read_regime_json(std::istream& in) {
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "critr-regime") throw SchemaError("not a regime file");
    RegimeSet rs;
    rs.scope = parse_regime_scope(j.at("scope").get<std::string>());
    rs.target_cause = j.value("target_cause", 0);
    rs.cost.constant = j.at("cost").at("constant").get<double>();
    if (j.at("cost").contains("column")) rs.cost.column = j["cost"]["column"].get<std::string>();
    for (const auto& ix : j.at("interactions")) {
      rs.interactions.push_back({ix.at(0).get<std::string>(), ix.at(1).get<std::string>()});
    }
    const auto& cm = j.at("cause_model");
    std::vector<LogisticFit> fits;
    for (const auto& f : cm.at("fits")) {
      LogisticFit fit;
      fit.coefficients = from_json_vector(f);
      fit.converged = true;
      fits.push_back(std::move(fit));
    }
    rs.cause_model = CauseModel(cm.at("kappa").get<int>(), cm.at("columns").get<std::vector<std::string>>(),
                                rs.interactions, std::move(fits));
    for (const auto& b : j.at("blips")) {
      BlipModel m;
      m.cause = b.at("cause").get<int>();
      m.treatment_free_cols = b.at("treatment_free").get<std::vector<std::string>>();
      m.blip_cols = b.at("blip").get<std::vector<std::string>>();
      m.beta = from_json_vector(b.at("beta"));
      m.psi = from_json_vector(b.at("psi"));
      if (m.psi.size() != static_cast<Eigen::Index>(m.blip_cols.size()) + 1) {
        throw SchemaError("blip coefficients do not match the blip columns");
      }
      rs.blips.push_back(std::move(m));
    }
    if (rs.blips.empty()) throw SchemaError("regime file has no blips");
    if (!rs.single_blip() && static_cast<int>(rs.blips.size()) != rs.kappa()) {
      throw SchemaError("regime file has " + std::to_string(rs.blips.size()) + " blips for kappa " +
                        std::to_string(rs.kappa()));
    }
    return rs;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed regime file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("malformed regime file: ") + e.what());
  }
}

void save_regime(const RegimeSet& rs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_regime_json(rs, out);
}

RegimeSet load_regime(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open regime file '" + path.string() + "'");
  return read_regime_json(in);
}

}  // namespace critr
