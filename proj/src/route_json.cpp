#include "retrobleu/route_json.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace retrobleu {

using nlohmann::json;

namespace {

constexpr std::string_view kMol = "mol";
constexpr std::string_view kReaction = "reaction";

std::string node_type(const json& node) {
  if (!node.is_object()) throw Error(ErrorCode::MalformedJson, "route node is not a JSON object");
  const auto it = node.find("type");
  if (it == node.end()) throw Error(ErrorCode::MissingField, "node without \"type\"");
  if (!it->is_string()) throw Error(ErrorCode::InvalidField, "\"type\" must be a string");
  auto type = it->get<std::string>();
  if (type != kMol && type != kReaction) {
    throw Error(ErrorCode::InvalidField, "unknown node type '" + type + "'");
  }
  return type;
}

const json* children_of(const json& node) {
  const auto it = node.find("children");
  if (it == node.end()) return nullptr;
  if (!it->is_array()) throw Error(ErrorCode::InvalidField, "\"children\" must be an array");
  return &*it;
}

std::string required_smiles(const json& mol) {
  const auto it = mol.find("smiles");
  if (it == mol.end()) throw Error(ErrorCode::MissingField, "mol node without \"smiles\"");
  if (!it->is_string() || it->get_ref<const std::string&>().empty()) {
    throw Error(ErrorCode::InvalidField, "\"smiles\" must be a non-empty string");
  }
  return it->get<std::string>();
}

bool in_stock_flag(const json& mol) {
  const auto it = mol.find("in_stock");
  if (it == mol.end()) return false;
  if (!it->is_boolean()) throw Error(ErrorCode::InvalidField, "\"in_stock\" must be a boolean");
  return it->get<bool>();
}

std::optional<std::string> optional_string(const json& meta, const char* key) {
  const auto it = meta.find(key);
  if (it == meta.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorCode::InvalidField, std::string("metadata \"") + key + "\" must be a string");
  }
  return it->get<std::string>();
}

ReactionData reaction_data(const json& rxn) {
  ReactionData data;
  const auto it = rxn.find("metadata");
  if (it == rxn.end() || it->is_null()) return data;
  if (!it->is_object()) throw Error(ErrorCode::InvalidField, "\"metadata\" must be an object");
  const json& meta = *it;

  data.reaction_smiles = optional_string(meta, "reaction_smiles");
  data.template_smarts = optional_string(meta, "template");
  data.patent_id = optional_string(meta, "patent_id");
  if (const auto r = meta.find("template_radius"); r != meta.end() && !r->is_null()) {
    if (!r->is_number_integer()) {
      throw Error(ErrorCode::InvalidField, "metadata \"template_radius\" must be an integer");
    }
    const auto radius = r->get<std::int64_t>();
    if (radius < 0 || radius > 2) {
      throw Error(ErrorCode::InvalidField,
                  "template_radius " + std::to_string(radius) + " outside 0..2");
    }
    data.template_radius = static_cast<int>(radius);
  }
  if (const auto p = meta.find("policy_probability"); p != meta.end() && !p->is_null()) {
    if (!p->is_number()) {
      throw Error(ErrorCode::InvalidField, "metadata \"policy_probability\" must be a number");
    }
    data.probability = p->get<double>();
  }
  for (const auto& [key, value] : meta.items()) {
    if (key == "reaction_smiles" || key == "template" || key == "template_radius" ||
        key == "policy_probability" || key == "patent_id") {
      continue;
    }
    data.extra_metadata.emplace(key, value.dump());
  }
  return data;
}

RouteTree route_from_json(const json& root) {
  if (node_type(root) != kMol) {
    throw Error(ErrorCode::AlternationViolation, "route root must be a mol node");
  }
  RouteBuilder builder(required_smiles(root), in_stock_flag(root));
  if (const auto it = root.find("route_id"); it != root.end()) {
    if (!it->is_string()) throw Error(ErrorCode::InvalidField, "\"route_id\" must be a string");
    builder.route_id(it->get<std::string>());
  }
  if (const auto it = root.find("patent_ids"); it != root.end()) {
    if (!it->is_array()) throw Error(ErrorCode::InvalidField, "\"patent_ids\" must be an array");
    for (const auto& p : *it) {
      if (!p.is_string()) throw Error(ErrorCode::InvalidField, "\"patent_ids\" entries must be strings");
      builder.add_patent_id(p.get<std::string>());
    }
  }

  // Explicit stack: malformed input must not be able to exhaust the call stack.
  struct Pending {
    const json* mol;
    MoleculeId id;
  };
  std::vector<Pending> stack{{&root, builder.root()}};
  while (!stack.empty()) {
    const Pending item = stack.back();
    stack.pop_back();
    const json* children = children_of(*item.mol);
    if (!children || children->empty()) continue;
    if (children->size() > 1) {
      throw Error(ErrorCode::AlternationViolation,
                  "mol node has " + std::to_string(children->size()) + " reaction children");
    }
    const json& rxn = children->front();
    if (node_type(rxn) != kReaction) {
      throw Error(ErrorCode::AlternationViolation, "mol node has a mol child");
    }
    const ReactionId rid = builder.add_reaction(item.id, reaction_data(rxn));
    const json* reactants = children_of(rxn);
    if (!reactants) throw Error(ErrorCode::MissingField, "reaction node without \"children\"");
    if (reactants->empty()) {
      throw Error(ErrorCode::AlternationViolation, "reaction node without reactants");
    }
    std::vector<Pending> added;
    for (const json& mol : *reactants) {
      if (node_type(mol) != kMol) {
        throw Error(ErrorCode::AlternationViolation, "reaction node has a reaction child");
      }
      added.push_back({&mol, builder.add_reactant(rid, required_smiles(mol), in_stock_flag(mol))});
    }
    stack.insert(stack.end(), added.rbegin(), added.rend());
  }
  return std::move(builder).build();
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, e.what());
  }
}

json reaction_to_json(const ReactionData& data) {
  json meta = json::object();
  if (data.reaction_smiles) meta["reaction_smiles"] = *data.reaction_smiles;
  if (data.template_smarts) meta["template"] = *data.template_smarts;
  if (data.template_radius) meta["template_radius"] = *data.template_radius;
  if (data.probability) meta["policy_probability"] = *data.probability;
  if (data.patent_id) meta["patent_id"] = *data.patent_id;
  for (const auto& [key, value] : data.extra_metadata) meta[key] = json::parse(value);
  json node = {{"type", kReaction}, {"children", json::array()}};
  if (!meta.empty()) node["metadata"] = std::move(meta);
  return node;
}

json mol_to_json(const MoleculeNode& mol) {
  json node = {{"type", kMol}, {"smiles", mol.smiles}, {"in_stock", mol.in_stock}};
  if (mol.reaction) node["children"] = json::array();
  return node;
}

json route_to_json(const RouteTree& route) {
  // Molecules are in pre-order, so rebuilding by appending children in id
  // order reproduces the original nesting.
  const auto mols = route.molecules();
  std::vector<json> mol_json;
  mol_json.reserve(mols.size());
  for (const auto& m : mols) mol_json.push_back(mol_to_json(m));
  for (std::size_t i = route.reactions().size(); i-- > 0;) {
    const auto& rxn = route.reactions()[i];
    json node = reaction_to_json(rxn.data);
    for (MoleculeId m : rxn.reactants) node["children"].push_back(std::move(mol_json[m.value]));
    mol_json[rxn.product.value]["children"].push_back(std::move(node));
  }
  json root = std::move(mol_json.front());
  if (!route.route_id().empty()) root["route_id"] = route.route_id();
  if (!route.source_patent_ids().empty()) root["patent_ids"] = route.source_patent_ids();
  return root;
}

}  // namespace

RouteTree parse_route(std::string_view text) {
  const json doc = parse_document(text);
  if (doc.is_array()) {
    if (doc.size() != 1) {
      throw Error(ErrorCode::InvalidArgument,
                  "expected a single route, found an array of " + std::to_string(doc.size()));
    }
    return route_from_json(doc.front());
  }
  return route_from_json(doc);
}

std::vector<RouteTree> parse_routes(std::string_view text, std::string_view id_prefix) {
  const json doc = parse_document(text);
  std::vector<RouteTree> routes;
  auto add = [&](const json& node, std::size_t index) {
    try {
      routes.push_back(route_from_json(node));
    } catch (const Error& e) {
      throw Error(e.code(), "route " + std::to_string(index) + ": " + e.message());
    }
    if (routes.back().route_id().empty()) {
      routes.back().set_route_id(std::string(id_prefix) + "#" + std::to_string(index));
    }
  };
  if (doc.is_array()) {
    routes.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) add(doc[i], i);
  } else {
    add(doc, 0);
  }
  return routes;
}

std::string serialize_route(const RouteTree& route, int indent) {
  return route_to_json(route).dump(indent);
}

std::string serialize_routes(const std::vector<RouteTree>& routes, int indent) {
  json doc = json::array();
  for (const auto& r : routes) doc.push_back(route_to_json(r));
  return doc.dump(indent);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "read failed for '" + path.string() + "'");
  return std::move(buf).str();
}

std::vector<RouteTree> load_route_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_routes(text, path.filename().string());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

}  // namespace retrobleu
