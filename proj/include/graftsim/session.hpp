// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "compile.hpp"
#include "contract.hpp"
#include "ledger.hpp"
#include "trace.hpp"
#include "witness.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace graftsim
{

enum class Mode
{
  Onchain,
  Offchain,
};

inline const char*
to_string (const Mode m)
{
  return m == Mode::Onchain ? "onchain" : "offchain";
}

/**
 * Stipulating: exchanging transactions and signatures, deposits unspent.
 * Running: Head on-chain, contract advancing through off-chain grafts.
 * Failsafe: Init on-chain, waiting for a graft root to redeem it.
 * Executing: contract advancing on-chain, one transaction per step.
 */
enum class Stage
{
  Stipulating,
  Running,
  Failsafe,
  Executing,
  Finalized,
  Aborted,
};

inline const char*
to_string (const Stage s)
{
  switch (s)
    {
    case Stage::Stipulating: return "Stipulating";
    case Stage::Running: return "Running";
    case Stage::Failsafe: return "Failsafe";
    case Stage::Executing: return "Executing";
    case Stage::Finalized: return "Finalized";
    case Stage::Aborted: return "Aborted";
    }
  return "?";
}

struct SessionParams
{
  /** Graft timelock unit in blocks.  */
  Height t = 1;
  /** Blocks an honest participant waits on a silent peer.  */
  Height patience = 2;
  std::uint64_t seed = 0;
};

enum class MessageKind
{
  TxSet,
  Signature,
};

/** A message a participant is currently expected to send.  */
struct OutMessage
{
  MessageKind kind = MessageKind::Signature;
  ParticipantId to;
  TxDigest digest;
  std::string tx;
  /** Part of the root-last batch.  */
  bool last = false;
  /** Position in the sender's complete message sequence for this exchange.  */
  std::size_t ordinal = 0;
};

/** What a transaction means to the protocol.  */
enum class TxRole
{
  Deposit,
  ContractNode,
  Head,
  Init,
  GraftRoot,
  GraftBody,
};

struct Appendable
{
  TxDigest digest;
  std::string name;
  TxRole role;
  std::size_t graft = 0;
  EnabledAt enabled;
  bool enabled_now = false;
  /** The observer holds every signature and reveal needed.  */
  bool witness_complete = false;
};

/** A child of the current contract position.  */
struct StepOption
{
  NodeId child;
  std::string name;
  /** Set when the child is a concrete on-chain transaction.  */
  std::optional<TxDigest> digest;
  bool reveals_ok = false;
  bool delay_ok = false;
  Height enabled_at = 0;
  /** AuthBy signers other than the observer whose authorisation is missing.  */
  std::set<ParticipantId> auth_missing;
  bool needs_my_auth = false;
  bool refused = false;
};

struct ProposalView
{
  ParticipantId proposer;
  NodeId child;
  std::string name;
  bool awaiting_me = false;
  bool refused = false;
  bool agreed = false;
  bool valid = false;
};

/** A participant's local view of the protocol, input to strategies.  */
struct Observation
{
  Height height = 0;
  ParticipantId self;
  Mode mode = Mode::Onchain;
  Stage stage = Stage::Stipulating;
  Height patience = 0;

  std::vector<OutMessage> outbox;
  /** Off-chain steps whose graft is fully signed.  */
  std::size_t steps_sealed = 0;
  /** Graft being signed right now, if any.  */
  std::optional<std::size_t> exchange_graft;
  std::optional<ProposalView> proposal;

  std::optional<NodeId> position;
  bool position_is_leaf = false;
  std::vector<StepOption> options;
  std::vector<Appendable> appendable;

  std::optional<Height> waiting_since;
  bool attempted_this_height = false;
  bool init_on_chain = false;
  std::optional<std::size_t> latest_complete_graft;
  std::optional<std::size_t> oldest_complete_graft;
};

/**
 * Protocol engine shared by the on-chain and off-chain modes.  Holds the
 * ledger, every participant's private signature store, and the protocol
 * state.  Only the scheduler (or the scripted drivers below) mutates it;
 * strategies see it through observe().
 */
class Session
{

public:

  struct TxRef
  {
    TxRole role;
    std::size_t graft = 0;
    std::optional<NodeId> node;
    std::optional<ParticipantId> owner;
  };

private:

  struct Exchange
  {
    std::vector<TxDigest> body;
    std::vector<TxDigest> last;
    bool withTxSet = false;
    std::optional<std::size_t> graft;
    std::size_t delivered = 0;
    bool complete = false;
    /* Per participant: TxSets and body signatures sent, body signatures
       received.  */
    std::map<ParticipantId, std::size_t> txSent, bodySent, bodyHeld;
  };

  struct View
  {
    SignatureStore store;
    std::set<std::tuple<MessageKind, ParticipantId, TxDigest>> sent;
    std::set<ParticipantId> txSetsFrom;
    std::optional<Height> failedAttempt;
    /* Grafts already known complete; stores only grow.  */
    mutable std::set<std::size_t> completeGrafts;
  };

  struct Proposal
  {
    ParticipantId proposer;
    NodeId child;
    std::map<ParticipantId, std::optional<bool>> responses;
    bool refused = false;

    bool
    agreed () const
    {
      return std::all_of (responses.begin (), responses.end (),
                          [] (const auto& r) { return r.second == true; });
    }
  };

  Mode mode_;
  ContractTree tree_;
  std::vector<SecretCommitment> commitments_;
  SessionParams params_;
  std::vector<ParticipantId> parts_;

  ChainState chain_;
  Trace trace_;
  std::map<std::string, Reveal> published_;

  std::optional<OnchainCompilation> on_;
  std::optional<OffchainCompilation> off_;
  std::vector<Graft> grafts_;
  std::map<TxDigest, TxRef> index_;

  Stage stage_ = Stage::Stipulating;
  std::optional<Exchange> exchange_;
  std::map<ParticipantId, View> views_;
  std::optional<Proposal> proposal_;
  std::set<NodeId> refused_;

  /* Off-chain: origin of the last sealed graft.  */
  NodeId head_;
  /* On-chain position: appended node, and the graft whose copies are used.  */
  std::optional<NodeId> cursor_;
  std::optional<std::size_t> cursorGraft_;

  Height lastStepHeight_ = 0;
  Height lastProgress_ = 0;
  std::optional<std::size_t> sealedAtInit_;
  std::optional<std::size_t> initRedeemer_;
  std::optional<std::string> leaf_;

public:

  Session (const Mode mode, const ContractTree& tree,
           std::vector<SecretCommitment> commitments,
           const SessionParams params = {})
    : mode_ (mode), commitments_ (std::move (commitments)), params_ (params)
  {
    require_valid (tree);
    tree_ = canonicalize (tree);
    parts_ = tree_.participants;
    std::sort (parts_.begin (), parts_.end ());
    chain_ = ChainState (tree_.fee);
    for (const auto& p : parts_)
      views_[p];
    head_ = tree_.root;

    const std::map<ParticipantId, TxInstance>* deposits = nullptr;
    if (mode_ == Mode::Onchain)
      {
        on_ = compile_onchain (tree_, commitments_, params_.seed);
        deposits = &on_->deposits;
        for (const auto& [id, tx] : on_->instances)
          index_[tx.digest] = TxRef{TxRole::ContractNode, 0, id, std::nullopt};
      }
    else
      {
        off_ = compile_offchain (tree_, params_.t, commitments_, params_.seed);
        deposits = &off_->deposits;
        index_[off_->head.digest] = TxRef{TxRole::Head, 0, std::nullopt, std::nullopt};
        index_[off_->init.digest] = TxRef{TxRole::Init, 0, std::nullopt, std::nullopt};
        add_graft (shadow_graft (tree_, *off_));
      }

    for (const auto& [p, tx] : *deposits)
      {
        index_[tx.digest] = TxRef{TxRole::Deposit, 0, std::nullopt, p};
        const auto err = chain_.try_append (tx, {});
        record_append (0, "ledger", tx, {}, err);
      }

    Exchange ex;
    ex.withTxSet = true;
    if (mode_ == Mode::Onchain)
      {
        for (const auto id : tree_.preorder ())
          if (id != tree_.root)
            ex.body.push_back (on_->instances.at (id).digest);
        ex.last.push_back (on_->instances.at (tree_.root).digest);
      }
    else
      {
        ex.body.push_back (off_->init.digest);
        for (const auto id : tree_.preorder ())
          ex.body.push_back (off_->shadow.at (id).digest);
        ex.last.push_back (off_->head.digest);
      }
    exchange_ = std::move (ex);
  }

  /* ************************************************************************ */
  /* Accessors.  */

  Mode mode () const { return mode_; }
  Stage stage () const { return stage_; }
  const ContractTree& tree () const { return tree_; }
  const ChainState& chain () const { return chain_; }
  const Trace& trace () const { return trace_; }
  Trace& trace () { return trace_; }
  const SessionParams& params () const { return params_; }
  const std::vector<ParticipantId>& participants () const { return parts_; }
  const std::vector<Graft>& grafts () const { return grafts_; }
  const std::vector<SecretCommitment>& commitments () const { return commitments_; }
  Height height () const { return chain_.height (); }
  NodeId offchain_head () const { return head_; }
  std::optional<NodeId> position () const { return cursor_; }
  std::optional<std::size_t> sealed_at_init () const { return sealedAtInit_; }
  std::optional<std::size_t> init_redeemer () const { return initRedeemer_; }
  std::optional<std::string> terminal_leaf () const { return leaf_; }

  const OnchainCompilation&
  onchain () const
  {
    if (!on_)
      throw ProtocolError (ProtocolError::Kind::WrongPhase, "not an on-chain session");
    return *on_;
  }

  const OffchainCompilation&
  offchain () const
  {
    if (!off_)
      throw ProtocolError (ProtocolError::Kind::WrongPhase, "not an off-chain session");
    return *off_;
  }

  const SignatureStore&
  store (const ParticipantId& p) const
  {
    return views_.at (p).store;
  }

  bool
  is_published (const std::string& label) const
  {
    return published_.count (label) > 0;
  }

  bool
  terminated () const
  {
    return stage_ == Stage::Finalized || stage_ == Stage::Aborted;
  }

  bool
  init_on_chain () const
  {
    return off_.has_value () && chain_.is_appended (off_->init.digest);
  }

  /** Latest graft whose signatures have been exchanged by everyone.  */
  std::optional<std::size_t>
  latest_sealed () const
  {
    for (auto i = grafts_.size (); i > 0; --i)
      if (grafts_[i - 1].status == GraftStatus::FullySigned)
        return i - 1;
    return std::nullopt;
  }

  const TxRef*
  lookup (const TxDigest& d) const
  {
    const auto it = index_.find (d);
    return it == index_.end () ? nullptr : &it->second;
  }

  const TxInstance&
  tx (const TxDigest& d) const
  {
    const auto* ref = lookup (d);
    if (ref == nullptr)
      throw std::out_of_range ("unknown transaction " + d.short_hex ());
    switch (ref->role)
      {
      case TxRole::Deposit:
        return (on_ ? on_->deposits : off_->deposits).at (*ref->owner);
      case TxRole::ContractNode:
        return on_->instances.at (*ref->node);
      case TxRole::Head:
        return off_->head;
      case TxRole::Init:
        return off_->init;
      case TxRole::GraftRoot:
        return grafts_.at (ref->graft).root_instance;
      case TxRole::GraftBody:
        return grafts_.at (ref->graft).body.at (*ref->node);
      }
    throw std::logic_error ("bad tx role");
  }

  /** Instance of `node` in the copy currently executed on-chain.  */
  const TxInstance&
  position_instance (const NodeId node) const
  {
    if (cursorGraft_.has_value ())
      return grafts_.at (*cursorGraft_).instance (node);
    return on_->instances.at (node);
  }

  /** The transaction that spent Init's output, if any.  */
  std::optional<TxDigest>
  init_spender () const
  {
    if (!off_)
      return std::nullopt;
    return chain_.spender (OutPoint{off_->init.digest, 0});
  }

  /* ************************************************************************ */
  /* Oracle.  */

  void
  publish (const std::string& actor, const Reveal& r)
  {
    const auto it = std::find_if (commitments_.begin (), commitments_.end (),
        [&r] (const SecretCommitment& c) { return c.label == r.label; });
    if (it == commitments_.end () || !check_reveal (*it, r))
      throw std::invalid_argument ("invalid reveal for " + r.label);
    if (!published_.emplace (r.label, r).second)
      return;
    trace_.add (height (), actor, EventKind::OracleReveal,
                {{"label", r.label}, {"preimage", to_hex (r.preimage)}});
  }

  /* ************************************************************************ */
  /* Signature exchange.  */

  enum class Phase { Idle, TxSets, Body, Last };

  /** Which part of the current exchange `p` is expected to send now.  */
  Phase
  phase (const ParticipantId& p) const
  {
    if (!exchange_ || exchange_->complete || terminated ())
      return Phase::Idle;
    const auto& ex = *exchange_;
    const std::size_t others = parts_.size () - 1;
    auto count = [&p] (const std::map<ParticipantId, std::size_t>& m) {
      const auto it = m.find (p);
      return it == m.end () ? std::size_t{0} : it->second;
    };
    if (ex.withTxSet)
      {
        if (count (ex.txSent) < others)
          return Phase::TxSets;
        if (views_.at (p).txSetsFrom.size () != others)
          return Phase::Idle;
      }
    if (count (ex.bodySent) < others * ex.body.size ())
      return Phase::Body;
    /* Root-last: only once every body signature from everyone is held.  */
    if (count (ex.bodyHeld) < others * ex.body.size ())
      return Phase::Idle;
    return Phase::Last;
  }

  std::vector<OutMessage>
  outbox (const ParticipantId& p) const
  {
    std::vector<OutMessage> out;
    const auto ph = phase (p);
    if (ph == Phase::Idle)
      return out;
    const auto& ex = *exchange_;
    const auto& v = views_.at (p);
    const auto others = others_of (p);
    const std::size_t nTx = ex.withTxSet ? others.size () : 0;

    if (ph == Phase::TxSets)
      {
        for (std::size_t q = 0; q < others.size (); ++q)
          if (v.sent.count ({MessageKind::TxSet, others[q], TxDigest{}}) == 0)
            out.push_back (OutMessage{MessageKind::TxSet, others[q], TxDigest{},
                                      "", false, q});
        return out;
      }

    const bool last = ph == Phase::Last;
    const auto& ds = last ? ex.last : ex.body;
    const std::size_t base = last ? nTx + others.size () * ex.body.size () : nTx;
    out.reserve (others.size () * ds.size ());
    for (std::size_t q = 0; q < others.size (); ++q)
      for (std::size_t i = 0; i < ds.size (); ++i)
        if (v.sent.count ({MessageKind::Signature, others[q], ds[i]}) == 0)
          out.push_back (OutMessage{MessageKind::Signature, others[q], ds[i],
                                    tx (ds[i]).name, last,
                                    base + q * ds.size () + i});
    return out;
  }

  /** Sends one expected message.  Returns false if it was not expected.  */
  bool
  send (const ParticipantId& p, const OutMessage& msg)
  {
    const auto ph = phase (p);
    if (ph == Phase::Idle || msg.to == p || !views_.count (msg.to))
      return false;
    auto& v = views_.at (p);
    if (v.sent.count ({msg.kind, msg.to, msg.digest}) > 0)
      return false;
    if (msg.kind == MessageKind::TxSet)
      {
        if (ph != Phase::TxSets || msg.digest != TxDigest{})
          return false;
      }
    else
      {
        const auto& ds = ph == Phase::Last ? exchange_->last : exchange_->body;
        if (ph == Phase::TxSets || std::find (ds.begin (), ds.end (), msg.digest) == ds.end ())
          return false;
      }

    v.sent.insert ({msg.kind, msg.to, msg.digest});
    lastProgress_ = height ();
    auto& ex = *exchange_;
    if (msg.kind == MessageKind::TxSet)
      {
        ++ex.txSent[p];
        views_.at (msg.to).txSetsFrom.insert (p);
        trace_.add (height (), p.name, EventKind::TxSetSent, {{"to", msg.to.name}});
        return true;
      }

    const auto sig = sign (p, msg.digest);
    v.store.record (sig);
    views_.at (msg.to).store.record (sig);
    detail::ObjectBuilder payload (5);
    payload.add ("to", msg.to.name)
        .add ("tx", msg.tx)
        .add ("digest", msg.digest.hex ())
        .add ("phase", msg.last ? "last" : "body");
    if (exchange_->graft)
      payload.add ("graft", *exchange_->graft);
    trace_.add (height (), p.name, EventKind::SignatureSent, payload.done ());

    if (!msg.last)
      {
        ++ex.bodySent[p];
        ++ex.bodyHeld[msg.to];
      }
    ++ex.delivered;
    const std::size_t n = parts_.size ();
    if (ex.delivered == n * (n - 1) * (ex.body.size () + ex.last.size ()))
      complete_exchange ();
    return true;
  }

  /* ************************************************************************ */
  /* Step negotiation.  */

  /**
   * Proposes moving to `child`.  Off-chain this starts an off-chain step
   * (every participant must agree); on-chain it asks the AuthBy signers for
   * their authorisation.  Returns a reason if the proposal is rejected.
   */
  std::optional<std::string>
  propose (const ParticipantId& p, const NodeId child)
  {
    auto reject = [&] (const std::string& why) {
      trace_.add (height (), p.name, EventKind::StepRejected,
                  {{"child", node_name (child)}, {"reason", why}});
      return std::optional<std::string> (why);
    };

    if (proposal_)
      return reject ("proposal pending");

    if (mode_ == Mode::Offchain && stage_ == Stage::Running)
      {
        if (exchange_)
          return reject ("signature exchange in progress");
        if (auto why = offchain_unmet (head_, child))
          return reject (*why);
        Proposal prop{p, child, {}, false};
        for (const auto& q : others_of (p))
          prop.responses[q] = std::nullopt;
        proposal_ = std::move (prop);
      }
    else if (stage_ == Stage::Executing)
      {
        const auto& node = tree_.at (*cursor_);
        if (std::find (node.children.begin (), node.children.end (), child)
              == node.children.end ())
          return reject ("not a child of the current position");
        const auto& inst = position_instance (child);
        Proposal prop{p, child, {}, false};
        for (const auto& q : inst.edge_signers)
          if (q != p)
            prop.responses[q] = std::nullopt;
        if (prop.responses.empty ())
          return reject ("no authorisation needed");
        proposal_ = std::move (prop);
      }
    else
      return reject (std::string ("cannot propose in stage ") + to_string (stage_));

    lastProgress_ = height ();
    trace_.add (height (), p.name, EventKind::StepProposed,
                {{"child", node_name (child)}});
    if (mode_ == Mode::Offchain && proposal_->responses.empty ())
      start_graft ();
    return std::nullopt;
  }

  /** Answers the pending proposal.  Returns false if no answer was due.  */
  bool
  respond (const ParticipantId& p, const bool agree)
  {
    if (!proposal_)
      return false;
    const auto it = proposal_->responses.find (p);
    if (it == proposal_->responses.end () || it->second.has_value ())
      return false;
    it->second = agree;
    lastProgress_ = height ();
    const auto child = proposal_->child;
    trace_.add (height (), p.name,
                agree ? EventKind::StepAgreed : EventKind::StepRefused,
                {{"child", node_name (child)}});

    if (!agree)
      {
        proposal_->refused = true;
        if (stage_ == Stage::Executing)
          {
            refused_.insert (child);
            proposal_.reset ();
          }
        return true;
      }

    if (stage_ == Stage::Executing)
      {
        const auto& inst = position_instance (child);
        if (inst.edge_signers.count (p) > 0)
          {
            const auto sig = sign (p, inst.digest, SigRole::Edge);
            for (const auto& q : parts_)
              views_.at (q).store.record (sig);
            trace_.add (height (), p.name, EventKind::AuthSent,
                        {{"tx", inst.name}, {"digest", inst.digest.hex ()}});
          }
      }
    else if (proposal_->agreed ())
      start_graft ();
    return true;
  }

  /** Proposer gives up on an unanswered on-chain proposal.  */
  bool
  withdraw (const ParticipantId& p)
  {
    if (!proposal_ || proposal_->proposer != p || stage_ != Stage::Executing)
      return false;
    refused_.insert (proposal_->child);
    trace_.add (height (), p.name, EventKind::StepRefused,
                {{"child", node_name (proposal_->child)}, {"withdrawn", true}});
    proposal_.reset ();
    lastProgress_ = height ();
    return true;
  }

  void
  abort_stipulation (const ParticipantId& p)
  {
    if (stage_ != Stage::Stipulating)
      return;
    ordered_json missing = ordered_json::array ();
    for (const auto& q : others_of (p))
      if (!holds_everything_from (p, q))
        missing.push_back (q.name);
    trace_.add (height (), p.name, EventKind::StipulationAborted,
                {{"missing_from", missing}});
    stage_ = Stage::Aborted;
    exchange_.reset ();
  }

  /* ************************************************************************ */
  /* Appending.  */

  /** Builds the strongest witness `p` can produce for `t`.  */
  AppendWitness
  witness_for (const ParticipantId& p, const TxInstance& t) const
  {
    AppendWitness w;
    const auto& st = views_.at (p).store;
    for (const auto& q : t.required_signers)
      if (q == p || st.holds (q, t.digest))
        w.signatures.push_back (sign (q, t.digest));
    for (const auto& q : t.edge_signers)
      if (q == p || st.holds (q, t.digest, SigRole::Edge))
        w.signatures.push_back (sign (q, t.digest, SigRole::Edge));
    for (const auto& c : t.required_reveals)
      {
        const auto it = published_.find (c.label);
        if (it != published_.end ())
          w.reveals.push_back (it->second);
      }
    return w;
  }

  bool
  witness_complete (const ParticipantId& p, const TxInstance& t) const
  {
    const auto& st = views_.at (p).store;
    for (const auto& q : t.required_signers)
      if (q != p && !st.holds (q, t.digest))
        return false;
    for (const auto& q : t.edge_signers)
      if (q != p && !st.holds (q, t.digest, SigRole::Edge))
        return false;
    for (const auto& c : t.required_reveals)
      if (published_.count (c.label) == 0)
        return false;
    return true;
  }

  /** `p` holds every implicit signature for the whole graft.  */
  bool
  graft_complete (const ParticipantId& p, const std::size_t g) const
  {
    const auto& graft = grafts_.at (g);
    const auto& view = views_.at (p);
    if (view.completeGrafts.count (g) > 0)
      return true;
    const auto& st = view.store;
    auto held = [&] (const TxInstance& t) {
      for (const auto& q : t.required_signers)
        if (q != p && !st.holds (q, t.digest))
          return false;
      return true;
    };
    if (!held (graft.root_instance))
      return false;
    for (const auto& [id, t] : graft.body)
      if (!held (t))
        return false;
    view.completeGrafts.insert (g);
    return true;
  }

  /**
   * `p` tries to append a known transaction using only what it holds, plus
   * optional extra witness material.
   */
  std::optional<AppendError>
  append (const ParticipantId& p, const TxDigest& d,
          const AppendWitness& extra = {})
  {
    const auto* ref = lookup (d);
    if (ref == nullptr)
      throw std::out_of_range ("unknown transaction " + d.short_hex ());
    const TxRef r = *ref;
    const auto& t = tx (d);
    auto w = witness_for (p, t);
    w.signatures.insert (w.signatures.end (), extra.signatures.begin (),
                         extra.signatures.end ());
    w.reveals.insert (w.reveals.end (), extra.reveals.begin (), extra.reveals.end ());

    const auto err = chain_.try_append (t, w);
    record_append (height (), p.name, t, w, err);
    if (err)
      {
        views_.at (p).failedAttempt = height ();
        return err;
      }
    lastProgress_ = height ();
    on_appended (p, r, t);
    return std::nullopt;
  }

  /** Appends Init.  Anything but protocol completion is logged as a failsafe.  */
  std::optional<AppendError>
  trigger_init (const ParticipantId& p, const std::string& reason)
  {
    if (!off_ || init_on_chain ())
      return std::nullopt;
    if (reason != "completed")
      trace_.add (height (), p.name, EventKind::FailsafeTriggered,
                  {{"reason", reason},
                   {"latest_sealed", latest_sealed ().value_or (0)}});
    return append (p, off_->init.digest);
  }

  void
  tick ()
  {
    chain_.tick ();
  }

  /** Closes the trace with a terminal summary record.  */
  void
  finish (const std::string& status)
  {
    ordered_json txs = ordered_json::array ();
    for (const auto& d : chain_.append_order ())
      if (!chain_.record (d)->tx.is_deposit ())
        txs.push_back (chain_.record (d)->tx.name);
    trace_.add (height (), "harness", EventKind::Terminal,
                {{"status", status},
                 {"leaf", leaf_.value_or ("")},
                 {"stage", to_string (stage_)},
                 {"onchain", txs}});
  }

  /* ************************************************************************ */
  /* Observation.  */

  Observation
  observe (const ParticipantId& p) const
  {
    Observation obs;
    obs.height = height ();
    obs.self = p;
    obs.mode = mode_;
    obs.stage = stage_;
    obs.patience = params_.patience;
    obs.outbox = outbox (p);
    obs.init_on_chain = init_on_chain ();
    const auto& v = views_.at (p);
    obs.attempted_this_height = v.failedAttempt == height ();

    if (off_)
      {
        for (const auto& g : grafts_)
          if (g.index > 0 && g.status == GraftStatus::FullySigned)
            ++obs.steps_sealed;
        for (std::size_t g = 0; g < grafts_.size (); ++g)
          if (graft_complete (p, g))
            {
              if (!obs.oldest_complete_graft)
                obs.oldest_complete_graft = g;
              obs.latest_complete_graft = g;
            }
      }
    if (exchange_ && exchange_->graft && !exchange_->complete)
      obs.exchange_graft = exchange_->graft;

    if (proposal_)
      {
        ProposalView pv;
        pv.proposer = proposal_->proposer;
        pv.child = proposal_->child;
        pv.name = node_name (proposal_->child);
        const auto it = proposal_->responses.find (p);
        pv.awaiting_me = it != proposal_->responses.end () && !it->second;
        pv.refused = proposal_->refused;
        pv.agreed = proposal_->agreed ();
        pv.valid = stage_ == Stage::Running
                     ? !offchain_unmet (head_, proposal_->child).has_value ()
                     : true;
        obs.proposal = pv;
      }

    add_options (p, obs);
    add_appendables (p, obs);
    obs.waiting_since = waiting_since (p, obs);
    return obs;
  }

private:

  std::vector<ParticipantId>
  others_of (const ParticipantId& p) const
  {
    std::vector<ParticipantId> out;
    for (const auto& q : parts_)
      if (q != p)
        out.push_back (q);
    return out;
  }

  std::string
  node_name (const NodeId id) const
  {
    const auto* n = tree_.find (id);
    return n ? n->name : "#" + std::to_string (id.value);
  }

  bool
  holds_everything_from (const ParticipantId& p, const ParticipantId& q) const
  {
    if (!exchange_)
      return true;
    const auto& v = views_.at (p);
    if (exchange_->withTxSet && v.txSetsFrom.count (q) == 0)
      return false;
    for (const auto& d : exchange_->body)
      if (!v.store.holds (q, d))
        return false;
    for (const auto& d : exchange_->last)
      if (!v.store.holds (q, d))
        return false;
    return true;
  }

  void
  add_graft (Graft g)
  {
    const auto idx = grafts_.size ();
    g.index = idx;
    index_[g.root_instance.digest] = TxRef{TxRole::GraftRoot, idx, g.origin, std::nullopt};
    for (const auto& [id, t] : g.body)
      index_[t.digest] = TxRef{TxRole::GraftBody, idx, id, std::nullopt};
    if (idx == 0)
      g.status = GraftStatus::FullySigned;
    grafts_.push_back (std::move (g));
  }

  /** Why the off-chain step from `from` to `child` cannot happen now.  */
  std::optional<std::string>
  offchain_unmet (const NodeId from, const NodeId child) const
  {
    const auto& node = tree_.at (from);
    if (std::find (node.children.begin (), node.children.end (), child)
          == node.children.end ())
      return "not a child of the current off-chain position";
    for (const auto& req : tree_.at (child).edge)
      {
        if (const auto* r = std::get_if<RevealOf> (&req))
          {
            if (published_.count (r->label) == 0)
              return "secret " + r->label + " not revealed";
          }
        else if (const auto* a = std::get_if<After> (&req))
          {
            if (height () < lastStepHeight_ + a->delay)
              return "wait(" + std::to_string (a->delay) + ") not elapsed";
          }
      }
    return std::nullopt;
  }

  void
  start_graft ()
  {
    const auto child = proposal_->child;
    proposal_.reset ();
    const auto idx = grafts_.size ();
    add_graft (make_graft (tree_, *off_, child, idx, commitments_, params_.seed));
    const auto& g = grafts_.back ();

    Exchange ex;
    ex.graft = idx;
    for (const auto id : tree_.preorder (child))
      if (id != child)
        ex.body.push_back (g.body.at (id).digest);
    ex.last.push_back (g.root_instance.digest);
    exchange_ = std::move (ex);

    trace_.add (height (), "protocol", EventKind::GraftProposed,
                {{"index", idx}, {"origin", g.root_instance.name},
                 {"rel_timelock", g.rel_timelock ()},
                 {"instances", g.body.size () + 1}});
    if (parts_.size () == 1)
      complete_exchange ();
  }

  void
  complete_exchange ()
  {
    auto& ex = *exchange_;
    ex.complete = true;
    if (!ex.graft)
      return;
    auto& g = grafts_.at (*ex.graft);
    g.status = GraftStatus::FullySigned;
    head_ = g.origin;
    lastStepHeight_ = height ();
    trace_.add (height (), "protocol", EventKind::GraftSealed,
                {{"index", g.index}, {"origin", g.root_instance.name},
                 {"rel_timelock", g.rel_timelock ()}});
    exchange_.reset ();
  }

  void
  record_append (const Height h, const std::string& actor, const TxInstance& t,
                 const AppendWitness& w, const std::optional<AppendError>& err)
  {
    trace_.add (h, actor, EventKind::AppendTx,
                detail::ObjectBuilder (3)
                  .add ("tx", tx_to_json (t))
                  .add ("witness", witness_to_json (w))
                  .add ("outcome", err ? to_string (*err) : "ok")
                  .done ());
  }

  void
  reach (const NodeId node)
  {
    cursor_ = node;
    refused_.clear ();
    proposal_.reset ();
    lastStepHeight_ = height ();
    if (tree_.at (node).is_leaf ())
      {
        stage_ = Stage::Finalized;
        leaf_ = tree_.at (node).name;
      }
    else
      stage_ = Stage::Executing;
  }

  void
  on_appended (const ParticipantId& p, const TxRef& r, const TxInstance& t)
  {
    switch (r.role)
      {
      case TxRole::Deposit:
        break;

      case TxRole::ContractNode:
        exchange_.reset ();
        reach (*r.node);
        break;

      case TxRole::Head:
        exchange_.reset ();
        stage_ = Stage::Running;
        lastStepHeight_ = height ();
        break;

      case TxRole::Init:
        {
          sealedAtInit_ = latest_sealed ();
          for (auto& g : grafts_)
            if (g.status == GraftStatus::PartiallySigned)
              g.status = GraftStatus::Abandoned;
          exchange_.reset ();
          proposal_.reset ();
          stage_ = Stage::Failsafe;
          trace_.add (height (), p.name, EventKind::InitAppended,
                      {{"digest", t.digest.hex ()},
                       {"latest_sealed", sealedAtInit_.value_or (0)}});
          break;
        }

      case TxRole::GraftRoot:
        initRedeemer_ = r.graft;
        cursorGraft_ = r.graft;
        trace_.add (height (), p.name, EventKind::GraftAppended,
                    {{"index", r.graft}, {"tx", t.name},
                     {"rel_timelock", t.rel_timelock}});
        reach (*r.node);
        break;

      case TxRole::GraftBody:
        cursorGraft_ = r.graft;
        reach (*r.node);
        break;
      }
  }

  void
  add_options (const ParticipantId& p, Observation& obs) const
  {
    const auto& st = views_.at (p).store;
    if (stage_ == Stage::Running)
      {
        obs.position = head_;
        obs.position_is_leaf = tree_.at (head_).is_leaf ();
        for (const auto c : tree_.at (head_).children)
          {
            const auto& node = tree_.at (c);
            StepOption o;
            o.child = c;
            o.name = node.name;
            o.reveals_ok = true;
            Height delay = 0;
            for (const auto& req : node.edge)
              {
                if (const auto* r = std::get_if<RevealOf> (&req))
                  o.reveals_ok &= published_.count (r->label) > 0;
                else if (const auto* a = std::get_if<After> (&req))
                  delay = std::max (delay, a->delay);
                else
                  for (const auto& q : std::get<AuthBy> (req).signers)
                    {
                      if (q == p)
                        o.needs_my_auth = true;
                      else
                        o.auth_missing.insert (q);
                    }
              }
            o.enabled_at = lastStepHeight_ + delay;
            o.delay_ok = height () >= o.enabled_at;
            obs.options.push_back (std::move (o));
          }
      }
    else if (stage_ == Stage::Executing)
      {
        obs.position = cursor_;
        obs.position_is_leaf = tree_.at (*cursor_).is_leaf ();
        for (const auto c : tree_.at (*cursor_).children)
          {
            const auto& inst = position_instance (c);
            StepOption o;
            o.child = c;
            o.name = inst.name;
            o.digest = inst.digest;
            o.reveals_ok = true;
            for (const auto& rc : inst.required_reveals)
              o.reveals_ok &= published_.count (rc.label) > 0;
            const auto en = chain_.enabled_at (inst);
            if (const auto* h = std::get_if<Height> (&en))
              {
                o.enabled_at = *h;
                o.delay_ok = height () >= *h;
              }
            for (const auto& q : inst.edge_signers)
              {
                if (q == p)
                  o.needs_my_auth = true;
                else if (!st.holds (q, inst.digest, SigRole::Edge))
                  o.auth_missing.insert (q);
              }
            o.refused = refused_.count (c) > 0;
            obs.options.push_back (std::move (o));
          }
      }
  }

  Appendable
  make_appendable (const ParticipantId& p, const TxInstance& t, const TxRole role,
                   const std::size_t graft) const
  {
    Appendable a;
    a.digest = t.digest;
    a.name = t.name;
    a.role = role;
    a.graft = graft;
    a.enabled = chain_.enabled_at (t);
    if (const auto* h = std::get_if<Height> (&a.enabled))
      a.enabled_now = height () >= *h;
    a.witness_complete = witness_complete (p, t);
    return a;
  }

  void
  add_appendables (const ParticipantId& p, Observation& obs) const
  {
    switch (stage_)
      {
      case Stage::Stipulating:
        if (on_)
          obs.appendable.push_back (make_appendable (
              p, on_->instances.at (tree_.root), TxRole::ContractNode, 0));
        else
          obs.appendable.push_back (make_appendable (p, off_->head, TxRole::Head, 0));
        break;
      case Stage::Running:
        obs.appendable.push_back (make_appendable (p, off_->init, TxRole::Init, 0));
        break;
      case Stage::Failsafe:
        for (const auto& g : grafts_)
          if (graft_complete (p, g.index))
            obs.appendable.push_back (make_appendable (
                p, g.root_instance, TxRole::GraftRoot, g.index));
        break;
      default:
        break;
      }
  }

  std::optional<Height>
  waiting_since (const ParticipantId& p, const Observation& obs) const
  {
    if (!obs.outbox.empty ())
      return std::nullopt;
    switch (stage_)
      {
      case Stage::Stipulating:
        {
          const auto& a = obs.appendable.front ();
          if (a.witness_complete)
            return std::nullopt;
          return lastProgress_;
        }
      case Stage::Running:
        if (exchange_)
          return lastProgress_;
        if (proposal_ && !obs.proposal->awaiting_me && !proposal_->refused)
          return lastProgress_;
        return std::nullopt;
      case Stage::Executing:
        if (proposal_ && proposal_->proposer == p)
          return lastProgress_;
        return std::nullopt;
      default:
        return std::nullopt;
      }
  }
};

} // namespace graftsim
