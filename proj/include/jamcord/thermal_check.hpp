#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "jamcord/errors.hpp"
#include "jamcord/json_util.hpp"

namespace jamcord {

enum class MaterialRole { Structure, Bead, Wire, Seal, Membrane };

inline std::string_view role_name(MaterialRole r) {
  switch (r) {
    case MaterialRole::Structure: return "structure";
    case MaterialRole::Bead: return "bead";
    case MaterialRole::Wire: return "wire";
    case MaterialRole::Seal: return "seal";
    case MaterialRole::Membrane: return "membrane";
  }
  return "?";
}

inline MaterialRole role_from_name(std::string_view s) {
  for (auto r : {MaterialRole::Structure, MaterialRole::Bead, MaterialRole::Wire, MaterialRole::Seal,
                 MaterialRole::Membrane})
    if (role_name(r) == s) return r;
  throw InvalidInput("unknown material role '" + std::string(s) + "'");
}

struct MaterialSpec {
  std::string name;
  double max_service_temp = 0.0;  // degC
  std::set<MaterialRole> roles;
  std::string basis;     // what the limit is: solidus, continuous service, ...
  std::string citation;  // where the number comes from

  bool operator==(const MaterialSpec&) const = default;
};

struct MaterialCatalog {
  std::vector<MaterialSpec> materials;

  const MaterialSpec& find(std::string_view name) const {
    for (const auto& m : materials)
      if (m.name == name) return m;
    throw InvalidInput("material '" + std::string(name) + "' not in catalog");
  }
};

struct BomComponent {
  std::string name;
  MaterialSpec material;
  bool thermally_isolated = false;

  bool operator==(const BomComponent&) const = default;
};

struct BillOfMaterials {
  std::vector<BomComponent> components;
};

struct FireFinding {
  std::string component;
  std::string material;
  double max_service_temp = 0.0;
  double deficit = 0.0;  // environment - limit, > 0
};

inline void check_material(const MaterialSpec& m) {
  if (m.name.empty()) throw InvalidInput("material: empty name");
  if (!std::isfinite(m.max_service_temp))
    throw InvalidInput("material '" + m.name + "': max_service_temp not finite");
}

inline void check_catalog(const MaterialCatalog& c) {
  std::set<std::string> seen;
  for (const auto& m : c.materials) {
    check_material(m);
    if (!seen.insert(m.name).second) throw InvalidInput("catalog: duplicate material '" + m.name + "'");
  }
}

inline void check_bom(const BillOfMaterials& bom) {
  if (bom.components.empty()) throw InvalidInput("bill of materials is empty");
  for (const auto& c : bom.components) {
    if (c.name.empty()) throw InvalidInput("bill of materials: component without a name");
    check_material(c.material);
  }
}

/// Components exposed to `environment_temp` above their service limit, worst first.
inline std::vector<FireFinding> check_fire_exposure(const BillOfMaterials& bom, double environment_temp) {
  std::vector<FireFinding> out;
  for (const auto& c : bom.components) {
    if (c.thermally_isolated || !(environment_temp > c.material.max_service_temp)) continue;
    out.push_back({c.name, c.material.name, c.material.max_service_temp,
                   environment_temp - c.material.max_service_temp});
  }
  std::stable_sort(out.begin(), out.end(), [](const FireFinding& a, const FireFinding& b) {
    if (a.deficit != b.deficit) return a.deficit > b.deficit;
    return a.component < b.component;
  });
  return out;
}

// ---- json ----

inline nlohmann::json to_json(const MaterialSpec& m) {
  nlohmann::json roles = nlohmann::json::array();
  for (auto r : m.roles) roles.push_back(role_name(r));
  return {{"name", m.name},   {"max_service_temp", m.max_service_temp}, {"roles", roles},
          {"basis", m.basis}, {"citation", m.citation}};
}

inline MaterialSpec material_from_json(const nlohmann::json& j) {
  using namespace json_util;
  require_object(j, "material");
  reject_unknown(j, {"name", "max_service_temp", "roles", "basis", "citation"}, "material");
  MaterialSpec m;
  m.name = string(j, "name", "material");
  m.max_service_temp = number(j, "max_service_temp", "material");
  if (j.contains("roles")) {
    if (!j["roles"].is_array()) throw InvalidInput("material.roles: expected an array");
    for (const auto& r : j["roles"]) {
      if (!r.is_string()) throw InvalidInput("material.roles: expected strings");
      m.roles.insert(role_from_name(r.get<std::string>()));
    }
  }
  if (j.contains("basis")) m.basis = string(j, "basis", "material");
  if (j.contains("citation")) m.citation = string(j, "citation", "material");
  check_material(m);
  return m;
}

inline MaterialCatalog catalog_from_json(const nlohmann::json& j) {
  json_util::require_object(j, "catalog");
  json_util::reject_unknown(j, {"materials"}, "catalog");
  const auto& arr = json_util::field(j, "materials", "catalog");
  if (!arr.is_array()) throw InvalidInput("catalog.materials: expected an array");
  MaterialCatalog c;
  for (const auto& m : arr) c.materials.push_back(material_from_json(m));
  check_catalog(c);
  return c;
}

inline nlohmann::json to_json(const MaterialCatalog& c) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : c.materials) arr.push_back(to_json(m));
  return {{"materials", arr}};
}

/// Components give their material inline or by catalog name. `catalog` may be
/// null when every material is inline.
inline BillOfMaterials bom_from_json(const nlohmann::json& j, const MaterialCatalog* catalog) {
  using namespace json_util;
  require_object(j, "bom");
  reject_unknown(j, {"catalog", "components"}, "bom");
  const auto& arr = field(j, "components", "bom");
  if (!arr.is_array()) throw InvalidInput("bom.components: expected an array");
  BillOfMaterials bom;
  for (const auto& e : arr) {
    require_object(e, "bom component");
    reject_unknown(e, {"name", "material", "thermally_isolated"}, "bom component");
    BomComponent c;
    c.name = string(e, "name", "bom component");
    const auto& m = field(e, "material", "bom component");
    if (m.is_string()) {
      if (!catalog) throw InvalidInput("component '" + c.name + "' names a material but no catalog is loaded");
      c.material = catalog->find(m.get<std::string>());
    } else {
      c.material = material_from_json(m);
    }
    c.thermally_isolated = e.contains("thermally_isolated") ? boolean(e, "thermally_isolated", "bom component") : false;
    bom.components.push_back(std::move(c));
  }
  check_bom(bom);
  return bom;
}

/// Loads a BOM file. A "catalog" entry is resolved relative to the BOM's directory.
inline BillOfMaterials load_bom(const std::string& path) {
  const auto j = json_util::load_file(path);
  json_util::require_object(j, "bom");
  if (!j.contains("catalog")) return bom_from_json(j, nullptr);
  if (!j["catalog"].is_string()) throw InvalidInput("bom.catalog: expected a file name");
  const auto cat_path = std::filesystem::path(path).parent_path() / j["catalog"].get<std::string>();
  const auto cat = catalog_from_json(json_util::load_file(cat_path.string()));
  return bom_from_json(j, &cat);
}

}  // namespace jamcord
