// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "contract.hpp"
#include "ledger.hpp"
#include "witness.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace graftsim
{

class ProtocolError : public std::runtime_error
{

public:

  enum class Kind
  {
    InvalidTree,
    InvalidParameter,
    InsufficientFunds,
    StipulationAborted,
    RequirementUnmet,
    Interrupted,
    WrongPhase,
  };

  const Kind kind;
  /** Participant responsible, when there is one.  */
  const std::string who;

  ProtocolError (const Kind k, const std::string& msg, std::string w = "")
    : std::runtime_error (msg), kind (k), who (std::move (w))
  {}

};

inline void
require_valid (const ContractTree& tree)
{
  const auto errors = validate_tree (tree);
  if (!errors.empty ())
    throw ProtocolError (ProtocolError::Kind::InvalidTree,
                         "invalid contract tree: " + to_string (errors.front ()));
}

inline std::string
salt_for (const std::string& what, const std::uint64_t seed)
{
  return what + "/" + std::to_string (seed);
}

/** Zero-input deposit transactions, one per participant.  */
inline std::map<ParticipantId, TxInstance>
make_deposits (const ContractTree& tree, const std::uint64_t seed)
{
  std::map<ParticipantId, TxInstance> out;
  for (const auto& [p, v] : tree.deposits)
    {
      TxInstance tx;
      tx.name = "Dep_" + p.name;
      tx.outputs.push_back (OutputSpec{v, p});
      out.emplace (p, seal_digest (std::move (tx), salt_for ("deposit", seed)));
    }
  return out;
}

inline std::vector<OutPoint>
deposit_outpoints (const std::map<ParticipantId, TxInstance>& deposits)
{
  std::vector<OutPoint> out;
  for (const auto& [p, tx] : deposits)
    out.push_back (OutPoint{tx.digest, 0});
  return out;
}

inline std::set<ParticipantId>
all_participants (const ContractTree& tree)
{
  return {tree.participants.begin (), tree.participants.end ()};
}

inline const SecretCommitment&
find_commitment (const std::vector<SecretCommitment>& commitments,
                 const std::string& label)
{
  for (const auto& c : commitments)
    if (c.label == label)
      return c;
  throw ProtocolError (ProtocolError::Kind::InvalidTree,
                       "no commitment for secret " + label);
}

/**
 * Instantiates the subtree of `tree` rooted at `origin` as concrete
 * transactions.  The origin spends `inputs` (worth `inputValue` in total);
 * every other node spends output 0 of its parent.  Every transaction needs
 * the implicit signatures of all participants; edge requirements become
 * timelocks, edge signers and reveals.  `rootTimelock` overrides the
 * origin's own delay.
 */
inline std::map<NodeId, TxInstance>
instantiate_subtree (const ContractTree& tree, const NodeId origin,
                     const std::vector<OutPoint>& inputs,
                     const Amount inputValue,
                     const std::optional<Height> rootTimelock,
                     const std::vector<SecretCommitment>& commitments,
                     const std::string& salt)
{
  const auto everyone = all_participants (tree);
  std::map<NodeId, TxInstance> out;
  std::map<NodeId, Amount> available;

  for (const auto id : tree.preorder (origin))
    {
      const auto& node = tree.at (id);
      TxInstance tx;
      tx.name = node.name;
      tx.required_signers = everyone;

      Amount inValue = inputValue;
      if (id == origin)
        tx.inputs = inputs;
      else
        {
          const auto parent = *tree.parent_of (id);
          tx.inputs = {OutPoint{out.at (parent).digest, 0}};
          inValue = available.at (parent);
        }

      Height delay = 0;
      for (const auto& req : node.edge)
        {
          if (const auto* a = std::get_if<AuthBy> (&req))
            tx.edge_signers.insert (a->signers.begin (), a->signers.end ());
          else if (const auto* r = std::get_if<RevealOf> (&req))
            tx.required_reveals.push_back (find_commitment (commitments, r->label));
          else
            delay = std::max (delay, std::get<After> (req).delay);
        }
      tx.rel_timelock = (id == origin && rootTimelock) ? *rootTimelock : delay;

      const Amount left = inValue - tree.fee;
      if (left < 0)
        throw ProtocolError (ProtocolError::Kind::InsufficientFunds,
                             "fees exceed the contract balance at " + node.name);
      tx.outputs = resolve_outputs (node, left);
      available[id] = left;
      out.emplace (id, seal_digest (std::move (tx), salt));
    }
  return out;
}

/* ************************************************************************** */
/* On-chain.  */

struct OnchainCompilation
{
  std::map<ParticipantId, TxInstance> deposits;
  std::map<NodeId, TxInstance> instances;
};

inline OnchainCompilation
compile_onchain (const ContractTree& tree,
                 const std::vector<SecretCommitment>& commitments,
                 const std::uint64_t seed = 0)
{
  require_valid (tree);
  OnchainCompilation out;
  out.deposits = make_deposits (tree, seed);
  out.instances = instantiate_subtree (tree, tree.root,
                                       deposit_outpoints (out.deposits),
                                       tree.total_deposits (), std::nullopt,
                                       commitments, salt_for ("onchain", seed));
  return out;
}

/* ************************************************************************** */
/* Off-chain.  */

enum class GraftStatus
{
  PartiallySigned,
  FullySigned,
  /** Was still being signed when Init went on-chain.  */
  Abandoned,
};

inline const char*
to_string (const GraftStatus s)
{
  switch (s)
    {
    case GraftStatus::PartiallySigned: return "PartiallySigned";
    case GraftStatus::FullySigned: return "FullySigned";
    case GraftStatus::Abandoned: return "Abandoned";
    }
  return "?";
}

/**
 * A copy of the subtree at `origin`, re-rooted onto Init with a relative
 * timelock of subtree_height(origin) * t.  Index 0 is the shadow copy of the
 * whole contract created at compilation time.
 */
struct Graft
{
  std::size_t index = 0;
  NodeId origin;
  TxInstance root_instance;
  /** Non-root instances, keyed by the original tree's node ids.  */
  std::map<NodeId, TxInstance> body;
  /** Fragment produced by extract_subtree, with provenance links.  */
  ContractTree fragment;
  GraftStatus status = GraftStatus::PartiallySigned;

  Height
  rel_timelock () const
  {
    return root_instance.rel_timelock;
  }

  /** Root first, then body in preorder of the original tree.  */
  const TxInstance&
  instance (const NodeId id) const
  {
    return id == origin ? root_instance : body.at (id);
  }

  bool
  contains (const NodeId id) const
  {
    return id == origin || body.count (id) > 0;
  }
};

struct OffchainCompilation
{
  std::map<ParticipantId, TxInstance> deposits;
  TxInstance head;
  TxInstance init;
  /** Copy of the whole contract; root spends Init.  */
  std::map<NodeId, TxInstance> shadow;
  Height t = 1;
};

inline OffchainCompilation
compile_offchain (const ContractTree& tree, const Height t,
                  const std::vector<SecretCommitment>& commitments,
                  const std::uint64_t seed = 0)
{
  require_valid (tree);
  if (t < 1)
    throw ProtocolError (ProtocolError::Kind::InvalidParameter,
                         "time unit t must be at least one block");

  OffchainCompilation out;
  out.t = t;
  out.deposits = make_deposits (tree, seed);
  const auto everyone = all_participants (tree);
  const auto salt = salt_for ("offchain", seed);

  const Amount headValue = tree.total_deposits () - tree.fee;
  const Amount initValue = headValue - tree.fee;
  if (initValue < 0)
    throw ProtocolError (ProtocolError::Kind::InsufficientFunds,
                         "deposits cannot pay for Head and Init");

  TxInstance head;
  head.name = "Head";
  head.inputs = deposit_outpoints (out.deposits);
  head.required_signers = everyone;
  head.outputs = {OutputSpec{headValue, std::nullopt}};
  out.head = seal_digest (std::move (head), salt);

  TxInstance init;
  init.name = "Init";
  init.inputs = {OutPoint{out.head.digest, 0}};
  init.required_signers = everyone;
  init.outputs = {OutputSpec{initValue, std::nullopt}};
  out.init = seal_digest (std::move (init), salt);

  out.shadow = instantiate_subtree (
      tree, tree.root, {OutPoint{out.init.digest, 0}}, initValue,
      subtree_height (tree, tree.root) * t, commitments,
      salt_for ("shadow", seed));
  return out;
}

/** Graft 0: the shadow contract viewed as a graft of the root.  */
inline Graft
shadow_graft (const ContractTree& tree, const OffchainCompilation& comp)
{
  Graft g;
  g.index = 0;
  g.origin = tree.root;
  g.fragment = extract_subtree (tree, tree.root);
  g.root_instance = comp.shadow.at (tree.root);
  for (const auto& [id, tx] : comp.shadow)
    if (id != tree.root)
      g.body.emplace (id, tx);
  return g;
}

/** Builds the graft for one off-chain step to `origin`.  */
inline Graft
make_graft (const ContractTree& tree, const OffchainCompilation& comp,
            const NodeId origin, const std::size_t index,
            const std::vector<SecretCommitment>& commitments,
            const std::uint64_t seed = 0)
{
  Graft g;
  g.index = index;
  g.origin = origin;
  g.fragment = extract_subtree (tree, origin);

  const auto copies = instantiate_subtree (
      g.fragment, g.fragment.root, {OutPoint{comp.init.digest, 0}},
      comp.init.outputs.front ().value,
      subtree_height (g.fragment, g.fragment.root) * comp.t, commitments,
      salt_for ("graft/" + std::to_string (index), seed));
  for (const auto& [fresh, tx] : copies)
    {
      const NodeId orig = *g.fragment.at (fresh).provenance;
      if (orig == origin)
        g.root_instance = tx;
      else
        g.body.emplace (orig, tx);
    }
  return g;
}

} // namespace graftsim
