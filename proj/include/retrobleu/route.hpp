#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retrobleu/error.hpp"

namespace retrobleu {

/// Which reaction attribute is used as the n-gram token.
enum class TokenKind { Reaction, Template };

std::string_view to_string(TokenKind kind);
std::optional<TokenKind> parse_token_kind(std::string_view text);

struct MoleculeId {
  std::uint32_t value = 0;
  auto operator<=>(const MoleculeId&) const = default;
};

struct ReactionId {
  std::uint32_t value = 0;
  auto operator<=>(const ReactionId&) const = default;
};

/// Per-reaction tokens and annotations, all optional.
struct ReactionData {
  std::optional<std::string> reaction_smiles;
  std::optional<std::string> template_smarts;
  std::optional<int> template_radius;
  std::optional<double> probability;
  std::optional<std::string> patent_id;
  // Unrecognised metadata keys, values kept as compact JSON text.
  std::map<std::string, std::string> extra_metadata;

  bool operator==(const ReactionData&) const = default;
};

struct MoleculeNode {
  std::string smiles;
  bool in_stock = false;
  std::optional<ReactionId> reaction;  // absent for starting materials

  bool is_leaf() const { return !reaction.has_value(); }
  bool operator==(const MoleculeNode&) const = default;
};

struct ReactionNode {
  ReactionData data;
  MoleculeId product;
  std::vector<MoleculeId> reactants;

  const std::optional<std::string>& token(TokenKind kind) const {
    return kind == TokenKind::Reaction ? data.reaction_smiles : data.template_smarts;
  }
  bool operator==(const ReactionNode&) const = default;
};

/// A validated retrosynthesis route: molecule and reaction nodes alternate,
/// the root is the target molecule and every molecule has at most one
/// reaction child. Nodes are stored in depth-first pre-order (reactants in
/// the order given), so `reactions()[0]` is the last synthetic step and a
/// reaction's descendants always have larger ids.
class RouteTree {
 public:
  const MoleculeNode& root() const { return molecules_.front(); }
  ReactionId root_reaction() const { return ReactionId{0}; }

  const MoleculeNode& molecule(MoleculeId id) const { return molecules_.at(id.value); }
  const ReactionNode& reaction(ReactionId id) const { return reactions_.at(id.value); }

  std::span<const MoleculeNode> molecules() const { return molecules_; }
  std::span<const ReactionNode> reactions() const { return reactions_; }

  /// Number of reaction nodes.
  std::size_t length() const { return reactions_.size(); }

  const std::string& route_id() const { return route_id_; }
  void set_route_id(std::string id) { route_id_ = std::move(id); }

  /// Explicit route-level patent ids plus every reaction's patent id.
  const std::set<std::string>& source_patent_ids() const { return patent_ids_; }

  /// Reaction children of the reaction's reactants, in reactant order.
  template <typename F>
  void for_each_successor(ReactionId id, F&& f) const {
    for (MoleculeId m : reactions_[id.value].reactants) {
      if (const auto& next = molecules_[m.value].reaction) f(*next);
    }
  }

  bool operator==(const RouteTree&) const = default;

 private:
  friend class RouteBuilder;

  std::vector<MoleculeNode> molecules_;
  std::vector<ReactionNode> reactions_;
  std::string route_id_;
  std::set<std::string> patent_ids_;
};

/// Same molecules, reactions and tokens; ignores route id and patent ids.
bool same_route(const RouteTree& a, const RouteTree& b);

/// Incremental construction of a RouteTree. Node-kind alternation is
/// guaranteed by the API; `build()` checks the remaining invariants and
/// renumbers nodes into canonical pre-order.
class RouteBuilder {
 public:
  explicit RouteBuilder(std::string target_smiles, bool in_stock = false);

  MoleculeId root() const { return MoleculeId{0}; }

  /// Throws AlternationViolation if `product` already has a reaction.
  ReactionId add_reaction(MoleculeId product, ReactionData data = {});
  MoleculeId add_reactant(ReactionId reaction, std::string smiles, bool in_stock = false);

  RouteBuilder& route_id(std::string id);
  RouteBuilder& add_patent_id(std::string id);

  RouteTree build() &&;

 private:
  RouteTree tree_;
};

std::size_t route_length(const RouteTree& route);

/// The token of the requested kind; throws MissingToken when absent or empty.
const std::string& reaction_token(const RouteTree& route, ReactionId id, TokenKind kind);

struct Ngram {
  std::vector<std::string> tokens;  // product-side reaction first
  TokenKind kind = TokenKind::Template;

  std::size_t n() const { return tokens.size(); }
  bool operator==(const Ngram&) const = default;
};

/// Calls `f(std::span<const ReactionId>)` once per descending chain of `n`
/// reactions, where each reaction is followed by the reaction that made one
/// of its reactants. Chains start from reactions in pre-order and branch in
/// reactant order. Windows never combine sibling branches.
template <typename F>
void for_each_chain(const RouteTree& route, std::size_t n, F&& f) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "n-gram order must be >= 2");
  std::vector<ReactionId> path;
  path.reserve(n);
  struct Frame {
    ReactionId reaction;
    std::size_t next_reactant;
  };
  std::vector<Frame> stack;
  stack.reserve(n);
  const auto reactions = route.reactions();
  const auto molecules = route.molecules();
  for (std::uint32_t start = 0; start < reactions.size(); ++start) {
    path.assign(1, ReactionId{start});
    stack.assign(1, Frame{ReactionId{start}, 0});
    while (!stack.empty()) {
      if (path.size() == n) {
        f(std::span<const ReactionId>(path));
        path.pop_back();
        stack.pop_back();
        continue;
      }
      Frame& top = stack.back();
      const auto& reactants = reactions[top.reaction.value].reactants;
      std::optional<ReactionId> next;
      while (top.next_reactant < reactants.size() && !next) {
        next = molecules[reactants[top.next_reactant++].value].reaction;
      }
      if (next) {
        path.push_back(*next);
        stack.push_back(Frame{*next, 0});
      } else {
        path.pop_back();
        stack.pop_back();
      }
    }
  }
}

/// Every chain of `n` reactions as node ids, in `for_each_chain` order.
std::vector<std::vector<ReactionId>> reaction_chains(const RouteTree& route, std::size_t n);

/// Token n-grams, one per chain. Throws MissingToken if a chained reaction
/// lacks the requested token.
std::vector<Ngram> extract_ngrams(const RouteTree& route, std::size_t n, TokenKind kind);

/// Number of n-reaction chains, counted without enumerating them.
std::size_t count_ngrams(const RouteTree& route, std::size_t n);

}  // namespace retrobleu
