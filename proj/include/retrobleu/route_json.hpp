#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "retrobleu/route.hpp"

namespace retrobleu {

// Interchange format: nested node objects with "type": "mol" | "reaction".
//
//   mol:      "smiles" (required), "in_stock" (bool, default false),
//             "children" (0 or 1 reaction node)
//   reaction: "children" (>= 1 mol node), optional "metadata" with
//             "reaction_smiles", "template", "template_radius",
//             "policy_probability", "patent_id"; other metadata keys are kept
//   root mol: may also carry "route_id" (string) and "patent_ids" (strings)
//
// A document is one root mol object or an array of them.

/// Parses a document holding exactly one route.
RouteTree parse_route(std::string_view text);

/// Parses a single route or an array of routes. Routes without a
/// "route_id" are named `<id_prefix>#<index>`.
std::vector<RouteTree> parse_routes(std::string_view text, std::string_view id_prefix = "route");

/// Compact JSON (`indent < 0`) or pretty-printed. Keys are emitted sorted, so
/// output is deterministic.
std::string serialize_route(const RouteTree& route, int indent = -1);
std::string serialize_routes(const std::vector<RouteTree>& routes, int indent = -1);

/// Reads and parses a route file; ids default to `<filename>#<index>`.
/// Parse errors are rethrown with the file name prepended.
std::vector<RouteTree> load_route_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace retrobleu
