// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "types.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace graftsim
{

/* ************************************************************************** */
/* Edge requirements.  */

/** Redemption needs an explicit authorisation by every listed participant.  */
struct AuthBy
{
  std::set<ParticipantId> signers;
  bool operator== (const AuthBy&) const = default;
};

/** Redemption needs the preimage of the committed secret with this label.  */
struct RevealOf
{
  std::string label;
  bool operator== (const RevealOf&) const = default;
};

/** Redemption needs `delay` blocks to pass after the parent was appended.  */
struct After
{
  Height delay = 0;
  bool operator== (const After&) const = default;
};

using EdgeRequirement = std::variant<AuthBy, RevealOf, After>;

inline std::string
to_string (const EdgeRequirement& req)
{
  std::ostringstream out;
  std::visit ([&out] (const auto& r) {
      using T = std::decay_t<decltype (r)>;
      if constexpr (std::is_same_v<T, AuthBy>)
        {
          out << "sig(";
          bool first = true;
          for (const auto& p : r.signers)
            {
              out << (first ? "" : ",") << p.name;
              first = false;
            }
          out << ")";
        }
      else if constexpr (std::is_same_v<T, RevealOf>)
        out << "rev(" << r.label << ")";
      else
        out << "wait(" << r.delay << ")";
    }, req);
  return out.str ();
}

/* ************************************************************************** */
/* Tree structure.  */

/** Share of a leaf's balance paid to one participant.  */
struct PayoutShare
{
  ParticipantId to;
  std::uint64_t weight = 0;
  bool operator== (const PayoutShare&) const = default;
};

/** Concrete output of a transaction.  No beneficiary means the output
    carries the contract on to the next transaction.  */
struct OutputSpec
{
  Amount value = 0;
  std::optional<ParticipantId> beneficiary;
  bool operator== (const OutputSpec&) const = default;
};

struct NodeTemplate
{
  NodeId id;
  std::string name;
  /** Requirements for redeeming the parent into this node.  */
  std::vector<EdgeRequirement> edge;
  /** Payout weights, only for leaves.  Inner nodes forward the full balance.  */
  std::vector<PayoutShare> payout;
  std::vector<NodeId> children;
  /** Set on copies produced by extract_subtree.  */
  std::optional<NodeId> provenance;

  bool
  is_leaf () const
  {
    return children.empty ();
  }
};

/** Secret declared by a contract.  No owner means an external oracle.  */
struct SecretDecl
{
  std::string label;
  std::optional<ParticipantId> owner;
};

class ContractError : public std::runtime_error
{

public:

  enum class Kind
  {
    UnknownNode,
    NegativeBalance,
    InvalidTree,
  };

  const Kind kind;

  ContractError (const Kind k, const std::string& msg)
    : std::runtime_error (msg), kind (k)
  {}

};

struct ContractTree
{
  std::vector<ParticipantId> participants;
  std::map<ParticipantId, Amount> deposits;
  Amount fee = 0;
  std::vector<SecretDecl> secrets;
  NodeId root;
  std::vector<NodeTemplate> nodes;

  const NodeTemplate*
  find (const NodeId id) const
  {
    if (id.value < nodes.size () && nodes[id.value].id == id)
      return &nodes[id.value];
    for (const auto& n : nodes)
      if (n.id == id)
        return &n;
    return nullptr;
  }

  const NodeTemplate&
  at (const NodeId id) const
  {
    const auto* n = find (id);
    if (n == nullptr)
      throw ContractError (ContractError::Kind::UnknownNode,
                           "unknown node " + std::to_string (id.value));
    return *n;
  }

  const NodeTemplate*
  find_by_name (const std::string_view name) const
  {
    for (const auto& n : nodes)
      if (n.name == name)
        return &n;
    return nullptr;
  }

  const NodeTemplate&
  by_name (const std::string_view name) const
  {
    const auto* n = find_by_name (name);
    if (n == nullptr)
      throw ContractError (ContractError::Kind::UnknownNode,
                           "unknown node " + std::string (name));
    return *n;
  }

  std::optional<NodeId>
  parent_of (const NodeId id) const
  {
    for (const auto& n : nodes)
      if (std::find (n.children.begin (), n.children.end (), id)
            != n.children.end ())
        return n.id;
    return std::nullopt;
  }

  Amount
  total_deposits () const
  {
    Amount sum = 0;
    for (const auto& [p, v] : deposits)
      sum += v;
    return sum;
  }

  /** Nodes reachable from the root, parents before children, children in
      declaration order.  Assumes a valid tree.  */
  std::vector<NodeId>
  preorder (const std::optional<NodeId> from = std::nullopt) const
  {
    std::vector<NodeId> out;
    std::vector<NodeId> stack{from.value_or (root)};
    while (!stack.empty ())
      {
        const NodeId cur = stack.back ();
        stack.pop_back ();
        out.push_back (cur);
        if (out.size () > nodes.size ())
          throw ContractError (ContractError::Kind::InvalidTree,
                               "node graph is not a tree");
        const auto& ch = at (cur).children;
        for (auto it = ch.rbegin (); it != ch.rend (); ++it)
          stack.push_back (*it);
      }
    return out;
  }

  /** Nodes from the root down to `id`, both inclusive.  */
  std::vector<NodeId>
  path_to (const NodeId id) const
  {
    at (id);
    std::vector<NodeId> path{id};
    auto cur = parent_of (id);
    while (cur.has_value ())
      {
        path.push_back (*cur);
        if (path.size () > nodes.size ())
          throw ContractError (ContractError::Kind::InvalidTree,
                               "node graph is not a tree");
        cur = parent_of (*cur);
      }
    std::reverse (path.begin (), path.end ());
    return path;
  }

  std::vector<NodeId>
  leaves () const
  {
    std::vector<NodeId> out;
    for (const auto id : preorder ())
      if (at (id).is_leaf ())
        out.push_back (id);
    return out;
  }

  bool
  has_participant (const ParticipantId& p) const
  {
    return std::find (participants.begin (), participants.end (), p)
             != participants.end ();
  }

  const SecretDecl*
  find_secret (const std::string_view label) const
  {
    for (const auto& s : secrets)
      if (s.label == label)
        return &s;
    return nullptr;
  }
};

/* ************************************************************************** */
/* Validation.  */

struct StructuralError
{
  enum class Kind
  {
    EmptyParticipants,
    DuplicateParticipant,
    MissingDeposit,
    UnknownParticipant,
    NegativeValue,
    DuplicateId,
    DuplicateName,
    UnknownNode,
    NotATree,
    Cycle,
    Orphan,
    RootHasEdge,
    DuplicateRequirement,
    EmptyAuthorisation,
    UnknownSecret,
    DuplicateSecret,
    BalanceMismatch,
    NegativeBalance,
  };

  Kind kind;
  std::string subject;

  bool operator== (const StructuralError&) const = default;
};

inline std::string
to_string (const StructuralError::Kind k)
{
  using K = StructuralError::Kind;
  switch (k)
    {
    case K::EmptyParticipants: return "EmptyParticipants";
    case K::DuplicateParticipant: return "DuplicateParticipant";
    case K::MissingDeposit: return "MissingDeposit";
    case K::UnknownParticipant: return "UnknownParticipant";
    case K::NegativeValue: return "NegativeValue";
    case K::DuplicateId: return "DuplicateId";
    case K::DuplicateName: return "DuplicateName";
    case K::UnknownNode: return "UnknownNode";
    case K::NotATree: return "NotATree";
    case K::Cycle: return "Cycle";
    case K::Orphan: return "Orphan";
    case K::RootHasEdge: return "RootHasEdge";
    case K::DuplicateRequirement: return "DuplicateRequirement";
    case K::EmptyAuthorisation: return "EmptyAuthorisation";
    case K::UnknownSecret: return "UnknownSecret";
    case K::DuplicateSecret: return "DuplicateSecret";
    case K::BalanceMismatch: return "BalanceMismatch";
    case K::NegativeBalance: return "NegativeBalance";
    }
  return "?";
}

inline std::string
to_string (const StructuralError& e)
{
  return to_string (e.kind) + "(" + e.subject + ")";
}

namespace detail
{

inline std::string
node_label (const ContractTree& tree, const NodeId id)
{
  const auto* n = tree.find (id);
  if (n != nullptr && !n->name.empty ())
    return n->name;
  return "#" + std::to_string (id.value);
}

} // namespace detail

/**
 * Checks every structural invariant of a contract tree and returns one
 * error per violation, in a deterministic order.  An empty result means the
 * tree can be compiled and executed.
 */
inline std::vector<StructuralError>
validate_tree (const ContractTree& tree)
{
  using K = StructuralError::Kind;
  std::vector<StructuralError> errors;
  auto add = [&errors] (const K k, std::string subject) {
    StructuralError e{k, std::move (subject)};
    if (std::find (errors.begin (), errors.end (), e) == errors.end ())
      errors.push_back (std::move (e));
  };

  /* Participants and deposits.  */
  if (tree.participants.empty ())
    add (K::EmptyParticipants, "");
  std::set<ParticipantId> seen;
  for (const auto& p : tree.participants)
    if (!seen.insert (p).second)
      add (K::DuplicateParticipant, p.name);
  for (const auto& p : tree.participants)
    if (tree.deposits.count (p) == 0)
      add (K::MissingDeposit, p.name);
  for (const auto& [p, v] : tree.deposits)
    {
      if (!tree.has_participant (p))
        add (K::UnknownParticipant, p.name);
      if (v < 0)
        add (K::NegativeValue, "deposit " + p.name);
    }
  if (tree.fee < 0)
    add (K::NegativeValue, "fee");

  /* Secrets.  */
  std::set<std::string> labels;
  for (const auto& s : tree.secrets)
    {
      if (!labels.insert (s.label).second)
        add (K::DuplicateSecret, s.label);
      if (s.owner.has_value () && !tree.has_participant (*s.owner))
        add (K::UnknownParticipant, s.owner->name);
    }

  /* Node identities.  */
  std::map<NodeId, const NodeTemplate*> byId;
  std::set<std::string> names;
  for (const auto& n : tree.nodes)
    {
      if (!byId.emplace (n.id, &n).second)
        add (K::DuplicateId, detail::node_label (tree, n.id));
      if (!names.insert (n.name).second)
        add (K::DuplicateName, n.name);
    }

  /* Parent counts.  */
  std::map<NodeId, unsigned> parents;
  for (const auto& n : tree.nodes)
    for (const auto c : n.children)
      {
        if (byId.count (c) == 0)
          {
            add (K::UnknownNode, "#" + std::to_string (c.value));
            continue;
          }
        ++parents[c];
      }
  const bool rootKnown = byId.count (tree.root) > 0;
  if (!rootKnown)
    add (K::UnknownNode, "root #" + std::to_string (tree.root.value));
  for (const auto& [id, count] : parents)
    if (count > 1 || (id == tree.root && count > 0))
      add (K::NotATree, detail::node_label (tree, id));

  /* Reachability and cycles (iterative DFS with an on-stack marker).  */
  std::set<NodeId> reached;
  if (rootKnown)
    {
      std::set<NodeId> onStack;
      std::vector<std::pair<NodeId, std::size_t>> stack{{tree.root, 0}};
      reached.insert (tree.root);
      onStack.insert (tree.root);
      while (!stack.empty ())
        {
          auto& [cur, next] = stack.back ();
          const auto& ch = byId.at (cur)->children;
          if (next >= ch.size ())
            {
              onStack.erase (cur);
              stack.pop_back ();
              continue;
            }
          const NodeId c = ch[next++];
          if (byId.count (c) == 0)
            continue;
          if (onStack.count (c) > 0)
            {
              add (K::Cycle, detail::node_label (tree, c));
              continue;
            }
          if (!reached.insert (c).second)
            continue;
          onStack.insert (c);
          stack.emplace_back (c, 0);
        }
    }
  for (const auto& n : tree.nodes)
    if (rootKnown && reached.count (n.id) == 0)
      add (K::Orphan, detail::node_label (tree, n.id));

  /* Edges and payouts.  */
  for (const auto& n : tree.nodes)
    {
      const auto label = detail::node_label (tree, n.id);
      if (n.id == tree.root && !n.edge.empty ())
        add (K::RootHasEdge, label);
      for (std::size_t i = 0; i < n.edge.size (); ++i)
        {
          for (std::size_t j = 0; j < i; ++j)
            if (n.edge[i] == n.edge[j])
              add (K::DuplicateRequirement, label);
          if (const auto* a = std::get_if<AuthBy> (&n.edge[i]))
            {
              if (a->signers.empty ())
                add (K::EmptyAuthorisation, label);
              for (const auto& p : a->signers)
                if (!tree.has_participant (p))
                  add (K::UnknownParticipant, p.name);
            }
          else if (const auto* r = std::get_if<RevealOf> (&n.edge[i]))
            {
              if (tree.find_secret (r->label) == nullptr)
                add (K::UnknownSecret, r->label);
            }
        }
      if (n.is_leaf ())
        {
          std::uint64_t total = 0;
          for (const auto& s : n.payout)
            {
              total += s.weight;
              if (!tree.has_participant (s.to))
                add (K::UnknownParticipant, s.to.name);
            }
          if (total == 0)
            add (K::BalanceMismatch, label);
        }
      else if (!n.payout.empty ())
        add (K::BalanceMismatch, label);
    }

  /* Balances along every root path (only when the shape is sound).  */
  const bool shapeOk = std::none_of (errors.begin (), errors.end (),
      [] (const StructuralError& e) {
        return e.kind == K::NotATree || e.kind == K::Cycle
                 || e.kind == K::UnknownNode || e.kind == K::DuplicateId;
      });
  if (rootKnown && shapeOk)
    {
      const Amount total = tree.total_deposits ();
      std::vector<std::pair<NodeId, Amount>> stack{{tree.root, 1}};
      while (!stack.empty ())
        {
          const auto [cur, depth] = stack.back ();
          stack.pop_back ();
          if (total - tree.fee * depth < 0)
            add (K::NegativeBalance, detail::node_label (tree, cur));
          for (const auto c : byId.at (cur)->children)
            stack.emplace_back (c, depth + 1);
        }
    }

  return errors;
}

/* ************************************************************************** */
/* Structural queries.  */

/** Number of edges on the longest path from `node` down to a leaf.  */
inline Height
subtree_height (const ContractTree& tree, const NodeId node)
{
  const auto& n = tree.at (node);
  Height best = 0;
  std::vector<std::pair<NodeId, Height>> stack;
  for (const auto c : n.children)
    stack.emplace_back (c, 1);
  std::size_t visited = 0;
  while (!stack.empty ())
    {
      const auto [cur, depth] = stack.back ();
      stack.pop_back ();
      if (++visited > tree.nodes.size ())
        throw ContractError (ContractError::Kind::InvalidTree,
                             "node graph is not a tree");
      best = std::max (best, depth);
      for (const auto c : tree.at (cur).children)
        stack.emplace_back (c, depth + 1);
    }
  return best;
}

/**
 * Spendable balance after `node` has been appended in a pure on-chain run:
 * total deposits minus one fee per transaction on the root path.
 */
inline Amount
balance_at (const ContractTree& tree, const NodeId node)
{
  const auto path = tree.path_to (node);
  const Amount bal = tree.total_deposits ()
                       - tree.fee * static_cast<Amount> (path.size ());
  if (bal < 0)
    throw ContractError (ContractError::Kind::NegativeBalance,
                         "fees exceed deposits at " + tree.at (node).name);
  return bal;
}

/**
 * Deep copy of the subtree rooted at `node`.  Copies get fresh dense ids in
 * preorder and point back to their originals through `provenance`.  The
 * copied root loses its edge requirements.
 */
inline ContractTree
extract_subtree (const ContractTree& tree, const NodeId node)
{
  tree.at (node);
  ContractTree out;
  out.participants = tree.participants;
  out.deposits = tree.deposits;
  out.fee = tree.fee;
  out.secrets = tree.secrets;
  out.root = NodeId{0};

  const auto order = tree.preorder (node);
  std::map<NodeId, NodeId> fresh;
  for (std::uint32_t i = 0; i < order.size (); ++i)
    fresh[order[i]] = NodeId{i};

  for (const auto orig : order)
    {
      const auto& src = tree.at (orig);
      NodeTemplate copy = src;
      copy.id = fresh.at (orig);
      copy.provenance = orig;
      copy.children.clear ();
      for (const auto c : src.children)
        copy.children.push_back (fresh.at (c));
      if (orig == node)
        copy.edge.clear ();
      out.nodes.push_back (std::move (copy));
    }
  return out;
}

/** Renumbers a valid tree so that node ids are dense and in preorder.  */
inline ContractTree
canonicalize (const ContractTree& tree)
{
  ContractTree out = extract_subtree (tree, tree.root);
  for (auto& n : out.nodes)
    n.provenance.reset ();
  out.nodes.front ().edge = tree.at (tree.root).edge;
  return out;
}

/**
 * Resolves a node's outputs given the value left after paying its own fee.
 * Leaves split by weight (floor), remainder going to the lexicographically
 * first recipient.  Inner nodes carry everything to the continuation.
 */
inline std::vector<OutputSpec>
resolve_outputs (const NodeTemplate& node, const Amount available)
{
  if (!node.is_leaf ())
    return {OutputSpec{available, std::nullopt}};

  std::map<ParticipantId, std::uint64_t> weights;
  std::uint64_t total = 0;
  for (const auto& s : node.payout)
    {
      weights[s.to] += s.weight;
      total += s.weight;
    }
  if (total == 0)
    throw ContractError (ContractError::Kind::InvalidTree,
                         "leaf " + node.name + " has no payout weights");

  std::vector<OutputSpec> out;
  Amount assigned = 0;
  for (const auto& [p, w] : weights)
    {
      const auto share = static_cast<Amount> (
          (static_cast<__int128> (available) * w) / total);
      out.push_back (OutputSpec{share, p});
      assigned += share;
    }
  out.front ().value += available - assigned;
  return out;
}

} // namespace graftsim
