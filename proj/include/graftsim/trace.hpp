// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "ledger.hpp"

#include <json.hpp>

#include <sstream>
#include <string>
#include <vector>

namespace graftsim
{

using nlohmann::ordered_json;

enum class EventKind
{
  OracleReveal,
  TxSetSent,
  SignatureSent,
  AuthSent,
  StepProposed,
  StepAgreed,
  StepRefused,
  StepRejected,
  GraftProposed,
  GraftSealed,
  AppendTx,
  InitAppended,
  GraftAppended,
  FailsafeTriggered,
  StipulationAborted,
  Terminal,
};

inline const char*
to_string (const EventKind k)
{
  switch (k)
    {
    case EventKind::OracleReveal: return "OracleReveal";
    case EventKind::TxSetSent: return "TxSetSent";
    case EventKind::SignatureSent: return "SignatureSent";
    case EventKind::AuthSent: return "AuthSent";
    case EventKind::StepProposed: return "StepProposed";
    case EventKind::StepAgreed: return "StepAgreed";
    case EventKind::StepRefused: return "StepRefused";
    case EventKind::StepRejected: return "StepRejected";
    case EventKind::GraftProposed: return "GraftProposed";
    case EventKind::GraftSealed: return "GraftSealed";
    case EventKind::AppendTx: return "AppendTx";
    case EventKind::InitAppended: return "InitAppended";
    case EventKind::GraftAppended: return "GraftAppended";
    case EventKind::FailsafeTriggered: return "FailsafeTriggered";
    case EventKind::StipulationAborted: return "StipulationAborted";
    case EventKind::Terminal: return "Terminal";
    }
  return "?";
}

inline EventKind
event_kind_from_string (const std::string& s)
{
  for (int k = 0; k <= static_cast<int> (EventKind::Terminal); ++k)
    if (s == to_string (static_cast<EventKind> (k)))
      return static_cast<EventKind> (k);
  throw std::invalid_argument ("unknown event kind " + s);
}

struct Event
{
  Height height = 0;
  std::string actor;
  EventKind kind;
  ordered_json payload = ordered_json::object ();
};

/* ************************************************************************** */
/* Transaction and witness encoding.  */

namespace detail
{

/** Builds an object from key/value pairs, in order, without copying.  */
class ObjectBuilder
{
public:
  explicit ObjectBuilder (const std::size_t n)
    : j_ (ordered_json::object ())
  {
    obj ().reserve (n);
  }

  ObjectBuilder&
  add (const char* key, ordered_json v)
  {
    obj ().emplace_back (key, std::move (v));
    return *this;
  }

  ordered_json
  done ()
  {
    return std::move (j_);
  }

private:
  ordered_json::object_t&
  obj ()
  {
    return j_.get_ref<ordered_json::object_t&> ();
  }

  ordered_json j_;
};

} // namespace detail

inline ordered_json
tx_to_json (const TxInstance& tx)
{
  using detail::ObjectBuilder;
  ordered_json ins = ordered_json::array ();
  for (const auto& in : tx.inputs)
    ins.push_back (ObjectBuilder (2).add ("tx", in.tx.hex ()).add ("index", in.index).done ());
  ordered_json sigs = ordered_json::array ();
  for (const auto& p : tx.required_signers)
    sigs.push_back (p.name);
  ordered_json edge = ordered_json::array ();
  for (const auto& p : tx.edge_signers)
    edge.push_back (p.name);
  ordered_json revs = ordered_json::array ();
  for (const auto& c : tx.required_reveals)
    revs.push_back (ObjectBuilder (3)
                      .add ("label", c.label)
                      .add ("hash", c.hash.hex ())
                      .add ("owner", c.owner ? c.owner->name : "")
                      .done ());
  ordered_json outs = ordered_json::array ();
  for (const auto& o : tx.outputs)
    outs.push_back (ObjectBuilder (2)
                      .add ("value", o.value)
                      .add ("to", o.beneficiary ? o.beneficiary->name : "")
                      .done ());
  return ObjectBuilder (9)
      .add ("name", tx.name)
      .add ("digest", tx.digest.hex ())
      .add ("inputs", std::move (ins))
      .add ("rel_timelock", tx.rel_timelock)
      .add ("signers", std::move (sigs))
      .add ("edge_signers", std::move (edge))
      .add ("reveals", std::move (revs))
      .add ("outputs", std::move (outs))
      .done ();
}

inline TxInstance
tx_from_json (const nlohmann::json& j)
{
  TxInstance tx;
  tx.name = j.at ("name").get<std::string> ();
  tx.digest = digest_from_hex (j.at ("digest").get<std::string> ());
  for (const auto& in : j.at ("inputs"))
    tx.inputs.push_back (OutPoint{digest_from_hex (in.at ("tx").get<std::string> ()),
                                  in.at ("index").get<std::uint32_t> ()});
  tx.rel_timelock = j.at ("rel_timelock").get<Height> ();
  for (const auto& p : j.at ("signers"))
    tx.required_signers.insert (ParticipantId (p.get<std::string> ()));
  for (const auto& p : j.at ("edge_signers"))
    tx.edge_signers.insert (ParticipantId (p.get<std::string> ()));
  for (const auto& r : j.at ("reveals"))
    {
      SecretCommitment c{r.at ("label").get<std::string> (),
                         digest_from_hex (r.at ("hash").get<std::string> ()),
                         std::nullopt};
      const auto owner = r.value ("owner", std::string ());
      if (!owner.empty ())
        c.owner = ParticipantId (owner);
      tx.required_reveals.push_back (c);
    }
  for (const auto& o : j.at ("outputs"))
    {
      OutputSpec spec{o.at ("value").get<Amount> (), std::nullopt};
      const auto to = o.at ("to").get<std::string> ();
      if (!to.empty ())
        spec.beneficiary = ParticipantId (to);
      tx.outputs.push_back (spec);
    }
  return tx;
}

inline ordered_json
witness_to_json (const AppendWitness& w)
{
  using detail::ObjectBuilder;
  ordered_json sigs = ordered_json::array ();
  for (const auto& s : w.signatures)
    sigs.push_back (ObjectBuilder (3)
                      .add ("signer", s.signer.name)
                      .add ("role", to_string (s.role))
                      .add ("digest", s.digest.hex ())
                      .done ());
  ordered_json revs = ordered_json::array ();
  for (const auto& r : w.reveals)
    revs.push_back (ObjectBuilder (2)
                      .add ("label", r.label)
                      .add ("preimage", to_hex (r.preimage))
                      .done ());
  return ObjectBuilder (2)
      .add ("signatures", std::move (sigs))
      .add ("reveals", std::move (revs))
      .done ();
}

inline AppendWitness
witness_from_json (const nlohmann::json& j)
{
  AppendWitness w;
  for (const auto& s : j.at ("signatures"))
    w.signatures.push_back (Signature{
        ParticipantId (s.at ("signer").get<std::string> ()),
        digest_from_hex (s.at ("digest").get<std::string> ()),
        s.at ("role").get<std::string> () == "edge" ? SigRole::Edge
                                                    : SigRole::Implicit});
  for (const auto& r : j.at ("reveals"))
    w.reveals.push_back (Reveal{r.at ("label").get<std::string> (),
                                from_hex (r.at ("preimage").get<std::string> ())});
  return w;
}

/* ************************************************************************** */
/* Trace.  */

struct Trace
{
  std::vector<Event> events;

  void
  add (const Height h, std::string actor, const EventKind kind,
       ordered_json payload = ordered_json::object ())
  {
    events.push_back (Event{h, std::move (actor), kind, std::move (payload)});
  }

  std::size_t
  count (const EventKind kind) const
  {
    std::size_t n = 0;
    for (const auto& e : events)
      if (e.kind == kind)
        ++n;
    return n;
  }

  const Event*
  last (const EventKind kind) const
  {
    for (auto it = events.rbegin (); it != events.rend (); ++it)
      if (it->kind == kind)
        return &*it;
    return nullptr;
  }

  /** Names of successfully appended non-deposit transactions, in order.  */
  std::vector<std::string>
  appended_names (const bool includeDeposits = false) const
  {
    std::vector<std::string> out;
    for (const auto& e : events)
      if (e.kind == EventKind::AppendTx && e.payload.at ("outcome") == "ok"
            && (includeDeposits || !e.payload.at ("tx").at ("inputs").empty ()))
        out.push_back (e.payload.at ("tx").at ("name").get<std::string> ());
    return out;
  }

  /** One JSON record per line, keys in a fixed order.  */
  std::string
  to_jsonl () const
  {
    std::ostringstream out;
    for (const auto& e : events)
      {
        ordered_json j;
        j["height"] = e.height;
        j["actor"] = e.actor;
        j["kind"] = to_string (e.kind);
        j["payload"] = e.payload;
        out << j.dump () << '\n';
      }
    return out.str ();
  }

  static Trace
  from_jsonl (const std::string& text)
  {
    Trace t;
    std::istringstream in (text);
    std::string line;
    while (std::getline (in, line))
      {
        if (line.empty ())
          continue;
        const auto j = ordered_json::parse (line);
        t.events.push_back (Event{j.at ("height").get<Height> (),
                                  j.at ("actor").get<std::string> (),
                                  event_kind_from_string (
                                      j.at ("kind").get<std::string> ()),
                                  j.at ("payload")});
      }
    return t;
  }
};

/**
 * Re-applies every successful AppendTx of a trace to a fresh ledger, ticking
 * up to each recorded height, and finally up to the last event height.
 * Throws if an append that succeeded in the trace fails on replay.
 */
inline ChainState
replay (const Trace& trace, const Amount fee)
{
  ChainState chain (fee);
  Height last = 0;
  for (const auto& e : trace.events)
    {
      last = std::max (last, e.height);
      if (e.kind != EventKind::AppendTx || e.payload.at ("outcome") != "ok")
        continue;
      while (chain.height () < e.height)
        chain.tick ();
      const auto tx = tx_from_json (e.payload.at ("tx"));
      const auto w = witness_from_json (e.payload.at ("witness"));
      if (const auto err = chain.try_append (tx, w))
        throw std::runtime_error ("replay of " + tx.name + " failed: "
                                  + to_string (*err));
    }
  while (chain.height () < last)
    chain.tick ();
  return chain;
}

} // namespace graftsim
