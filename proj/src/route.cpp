#include "retrobleu/route.hpp"

#include <algorithm>
#include <utility>

namespace retrobleu {

std::string_view to_string(TokenKind kind) {
  return kind == TokenKind::Reaction ? "reaction" : "template";
}

std::optional<TokenKind> parse_token_kind(std::string_view text) {
  if (text == "reaction") return TokenKind::Reaction;
  if (text == "template") return TokenKind::Template;
  return std::nullopt;
}

bool same_route(const RouteTree& a, const RouteTree& b) {
  return a.molecules().size() == b.molecules().size() &&
         a.reactions().size() == b.reactions().size() &&
         std::equal(a.molecules().begin(), a.molecules().end(), b.molecules().begin()) &&
         std::equal(a.reactions().begin(), a.reactions().end(), b.reactions().begin());
}

RouteBuilder::RouteBuilder(std::string target_smiles, bool in_stock) {
  tree_.molecules_.push_back(MoleculeNode{std::move(target_smiles), in_stock, std::nullopt});
}

ReactionId RouteBuilder::add_reaction(MoleculeId product, ReactionData data) {
  auto& mol = tree_.molecules_.at(product.value);
  if (mol.reaction) {
    throw Error(ErrorCode::AlternationViolation,
                "molecule '" + mol.smiles + "' already has a reaction child");
  }
  const ReactionId id{static_cast<std::uint32_t>(tree_.reactions_.size())};
  mol.reaction = id;
  tree_.reactions_.push_back(ReactionNode{std::move(data), product, {}});
  return id;
}

MoleculeId RouteBuilder::add_reactant(ReactionId reaction, std::string smiles, bool in_stock) {
  const MoleculeId id{static_cast<std::uint32_t>(tree_.molecules_.size())};
  tree_.reactions_.at(reaction.value).reactants.push_back(id);
  tree_.molecules_.push_back(MoleculeNode{std::move(smiles), in_stock, std::nullopt});
  return id;
}

RouteBuilder& RouteBuilder::route_id(std::string id) {
  tree_.route_id_ = std::move(id);
  return *this;
}

RouteBuilder& RouteBuilder::add_patent_id(std::string id) {
  tree_.patent_ids_.insert(std::move(id));
  return *this;
}

RouteTree RouteBuilder::build() && {
  RouteTree& src = tree_;
  if (src.reactions_.empty()) {
    throw Error(ErrorCode::EmptyRoute, "route '" + src.root().smiles + "' has no reactions");
  }
  for (const auto& mol : src.molecules_) {
    if (mol.smiles.empty()) throw Error(ErrorCode::MissingField, "molecule with empty smiles");
  }
  for (const auto& rxn : src.reactions_) {
    if (rxn.reactants.empty()) {
      throw Error(ErrorCode::AlternationViolation, "reaction without reactant molecules");
    }
    if (rxn.data.template_radius && (*rxn.data.template_radius < 0 || *rxn.data.template_radius > 2)) {
      throw Error(ErrorCode::InvalidField,
                  "template_radius " + std::to_string(*rxn.data.template_radius) + " outside 0..2");
    }
  }

  // Renumber into pre-order. Molecules are visited via an explicit stack;
  // reactants are pushed in reverse so they pop in the given order.
  RouteTree out;
  out.route_id_ = std::move(src.route_id_);
  out.patent_ids_ = std::move(src.patent_ids_);
  out.molecules_.reserve(src.molecules_.size());
  out.reactions_.reserve(src.reactions_.size());

  struct Pending {
    MoleculeId old_id;
    std::optional<ReactionId> new_parent;
  };
  std::vector<Pending> stack{{MoleculeId{0}, std::nullopt}};
  while (!stack.empty()) {
    const Pending item = stack.back();
    stack.pop_back();
    MoleculeNode& old_mol = src.molecules_[item.old_id.value];
    const MoleculeId new_id{static_cast<std::uint32_t>(out.molecules_.size())};
    out.molecules_.push_back(MoleculeNode{std::move(old_mol.smiles), old_mol.in_stock, std::nullopt});
    if (item.new_parent) out.reactions_[item.new_parent->value].reactants.push_back(new_id);
    if (!old_mol.reaction) continue;

    ReactionNode& old_rxn = src.reactions_[old_mol.reaction->value];
    const ReactionId new_rxn{static_cast<std::uint32_t>(out.reactions_.size())};
    out.molecules_[new_id.value].reaction = new_rxn;
    if (old_rxn.data.patent_id) out.patent_ids_.insert(*old_rxn.data.patent_id);
    out.reactions_.push_back(ReactionNode{std::move(old_rxn.data), new_id, {}});
    out.reactions_.back().reactants.reserve(old_rxn.reactants.size());
    for (auto it = old_rxn.reactants.rbegin(); it != old_rxn.reactants.rend(); ++it) {
      stack.push_back(Pending{*it, new_rxn});
    }
  }
  return out;
}

std::size_t route_length(const RouteTree& route) { return route.length(); }

const std::string& reaction_token(const RouteTree& route, ReactionId id, TokenKind kind) {
  const auto& token = route.reaction(id).token(kind);
  if (!token || token->empty()) {
    throw Error(ErrorCode::MissingToken,
                "reaction " + std::to_string(id.value) + " of route '" + route.route_id() +
                    "' has no " + std::string(to_string(kind)) + " token");
  }
  return *token;
}

std::vector<std::vector<ReactionId>> reaction_chains(const RouteTree& route, std::size_t n) {
  std::vector<std::vector<ReactionId>> chains;
  for_each_chain(route, n, [&](std::span<const ReactionId> chain) {
    chains.emplace_back(chain.begin(), chain.end());
  });
  return chains;
}

std::vector<Ngram> extract_ngrams(const RouteTree& route, std::size_t n, TokenKind kind) {
  std::vector<Ngram> out;
  for_each_chain(route, n, [&](std::span<const ReactionId> chain) {
    Ngram g;
    g.kind = kind;
    g.tokens.reserve(chain.size());
    for (ReactionId id : chain) g.tokens.push_back(reaction_token(route, id, kind));
    out.push_back(std::move(g));
  });
  return out;
}

std::size_t count_ngrams(const RouteTree& route, std::size_t n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "n-gram order must be >= 2");
  // paths[i] = number of downward chains of the current length starting at
  // reaction i. Successors have larger ids, so one reverse sweep per length.
  const std::size_t k = route.length();
  std::vector<std::size_t> paths(k, 1), next(k);
  for (std::size_t len = 2; len <= n; ++len) {
    for (std::size_t i = k; i-- > 0;) {
      std::size_t sum = 0;
      route.for_each_successor(ReactionId{static_cast<std::uint32_t>(i)},
                               [&](ReactionId s) { sum += paths[s.value]; });
      next[i] = sum;
    }
    paths.swap(next);
  }
  std::size_t total = 0;
  for (std::size_t p : paths) total += p;
  return total;
}

}  // namespace retrobleu
