// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

/* Scripted, fully cooperative protocol runs.  These drive a Session directly
   instead of going through strategies and the scheduler.  */

#include "session.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace graftsim
{

/** A stipulation message to drop: (sender, ordinal).  */
using Withheld = std::pair<ParticipantId, std::size_t>;

/**
 * Flushes every outbox (except `skip`) until nothing more can be sent.
 * `silent` sends nothing at all.
 */
inline void
flush_messages (Session& s, const std::optional<Withheld>& skip = std::nullopt,
                const std::optional<ParticipantId>& silent = std::nullopt)
{
  bool progress = true;
  while (progress)
    {
      progress = false;
      for (const auto& p : s.participants ())
        {
          if (silent && p == *silent)
            continue;
          for (const auto& m : s.outbox (p))
            {
              if (skip && skip->first == p && skip->second == m.ordinal)
                continue;
              progress |= s.send (p, m);
            }
        }
    }
}

/**
 * Runs the stipulation (both modes) and appends the root or Head.  Throws
 * StipulationAborted, leaving every deposit unspent, if the root cannot be
 * appended because of the withheld message.
 */
inline void
stipulate (Session& s, const std::optional<Withheld>& skip = std::nullopt)
{
  if (s.stage () != Stage::Stipulating)
    throw ProtocolError (ProtocolError::Kind::WrongPhase, "already stipulated");
  flush_messages (s, skip);

  const TxDigest root = s.mode () == Mode::Onchain
                          ? s.onchain ().instances.at (s.tree ().root).digest
                          : s.offchain ().head.digest;
  for (const auto& p : s.participants ())
    if (!skip || skip->first != p)
      if (s.witness_complete (p, s.tx (root)) && !s.append (p, root))
        return;

  const auto who = skip ? skip->first.name : std::string ();
  const auto& aborter = s.participants ().front () == ParticipantId (who)
                          ? s.participants ().back ()
                          : s.participants ().front ();
  s.abort_stipulation (aborter);
  throw ProtocolError (ProtocolError::Kind::StipulationAborted,
                       "stipulation aborted", who);
}

/** Ticks until the transaction is enabled (no-op if blocked).  */
inline void
wait_until_enabled (Session& s, const TxInstance& t)
{
  const auto en = s.chain ().enabled_at (t);
  if (const auto* h = std::get_if<Height> (&en))
    while (s.height () < *h)
      s.tick ();
}

/**
 * One on-chain step to `child`.  Implicit signatures come from the
 * participants' stores; `w` supplies edge signatures and reveals.
 */
inline std::optional<AppendError>
step_onchain (Session& s, const NodeId child, const AppendWitness& w = {})
{
  if (s.stage () != Stage::Executing)
    throw ProtocolError (ProtocolError::Kind::WrongPhase, "contract not running on-chain");
  const auto& node = s.tree ().at (*s.position ());
  if (std::find (node.children.begin (), node.children.end (), child)
        == node.children.end ())
    throw ProtocolError (ProtocolError::Kind::RequirementUnmet,
                         s.tree ().at (child).name + " is not a child of "
                           + node.name);
  return s.append (s.participants ().front (), s.position_instance (child).digest, w);
}

/** Full witness material for the edge into `child`, from the keeper.  */
inline AppendWitness
edge_witness (const Session& s, const NodeId child, const SecretKeeper& keeper)
{
  AppendWitness w;
  for (const auto& req : s.tree ().at (child).edge)
    {
      if (const auto* r = std::get_if<RevealOf> (&req))
        w.reveals.push_back (keeper.reveal (r->label));
      else if (const auto* a = std::get_if<AuthBy> (&req))
        {
          const auto d = s.mode () == Mode::Onchain || s.stage () == Stage::Executing
                           ? s.position_instance (child).digest
                           : TxDigest{};
          for (const auto& p : a->signers)
            w.signatures.push_back (sign (p, d, SigRole::Edge));
        }
    }
  return w;
}

/** Publishes every reveal carried by `w` as the oracle.  */
inline void
publish_all (Session& s, const AppendWitness& w)
{
  for (const auto& r : w.reveals)
    s.publish ("oracle", r);
}

/**
 * On-chain baseline along `path` (root first).  Reveals come from the
 * keeper right before they are needed; every participant authorises.
 */
inline Trace
run_onchain_baseline (const ContractTree& tree, const std::vector<NodeId>& path,
                      const SecretKeeper& keeper, const std::uint64_t seed = 0)
{
  SessionParams params;
  params.seed = seed;
  Session s (Mode::Onchain, tree, keeper.commitments (), params);
  stipulate (s);
  for (std::size_t i = 1; i < path.size (); ++i)
    {
      const auto child = path[i];
      const auto w = edge_witness (s, child, keeper);
      publish_all (s, w);
      wait_until_enabled (s, s.position_instance (child));
      if (const auto err = step_onchain (s, child, w))
        throw ProtocolError (ProtocolError::Kind::RequirementUnmet,
                             "baseline step failed: " + to_string (*err));
    }
  s.finish ("leaf");
  return s.trace ();
}

/**
 * One off-chain step to `child`: proposal, unanimous agreement and the
 * graft's signature exchange.  `interrupt` sends nothing during the
 * exchange, leaving the graft PartiallySigned.  Returns the graft index.
 */
inline std::size_t
offchain_step (Session& s, const NodeId child, const AppendWitness& edge = {},
               const std::optional<ParticipantId>& interrupt = std::nullopt)
{
  if (s.stage () != Stage::Running)
    throw ProtocolError (ProtocolError::Kind::WrongPhase, "off-chain protocol not running");
  publish_all (s, edge);
  const auto& parts = s.participants ();
  if (const auto why = s.propose (parts.front (), child))
    throw ProtocolError (ProtocolError::Kind::RequirementUnmet, *why);
  for (const auto& p : parts)
    s.respond (p, true);
  const auto idx = s.grafts ().size () - 1;
  flush_messages (s, std::nullopt, interrupt);
  if (s.grafts ()[idx].status != GraftStatus::FullySigned)
    throw ProtocolError (ProtocolError::Kind::Interrupted,
                         "graft exchange interrupted",
                         interrupt ? interrupt->name : "");
  return idx;
}

/** Appends Init unless it is already on-chain.  */
inline void
trigger_failsafe (Session& s, const std::string& reason = "failsafe")
{
  if (s.init_on_chain ())
    return;
  if (s.stage () != Stage::Running)
    throw ProtocolError (ProtocolError::Kind::WrongPhase, "off-chain protocol not running");
  if (const auto err = s.trigger_init (s.participants ().front (), reason))
    throw ProtocolError (ProtocolError::Kind::RequirementUnmet,
                         "Init append failed: " + to_string (*err));
}

/**
 * Waits for the latest fully signed graft's timelock and appends its root.
 * Returns the graft index.
 */
inline std::size_t
finalize (Session& s)
{
  if (!s.init_on_chain ())
    throw ProtocolError (ProtocolError::Kind::WrongPhase, "Init is not on-chain");
  const auto g = *s.sealed_at_init ();
  const auto& root = s.grafts ()[g].root_instance;
  wait_until_enabled (s, root);
  if (const auto err = s.append (s.participants ().front (), root.digest))
    throw ProtocolError (ProtocolError::Kind::RequirementUnmet,
                         "graft append failed: " + to_string (*err));
  return g;
}

/** Continues on-chain along `rest` (children in order) after finalize.  */
inline void
continue_onchain (Session& s, const std::vector<NodeId>& rest,
                  const SecretKeeper& keeper)
{
  for (const auto child : rest)
    {
      const auto w = edge_witness (s, child, keeper);
      publish_all (s, w);
      wait_until_enabled (s, s.position_instance (child));
      if (const auto err = step_onchain (s, child, w))
        throw ProtocolError (ProtocolError::Kind::RequirementUnmet,
                             "on-chain step failed: " + to_string (*err));
    }
}

} // namespace graftsim
