// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "session.hpp"

#include <optional>
#include <set>
#include <string>
#include <variant>

namespace graftsim
{

/* ************************************************************************** */
/* Actions.  */

namespace action
{

struct Idle {};
/** Deliberately not sending something that is due.  */
struct Withhold {};
struct Send { OutMessage msg; };
struct Append { TxDigest digest; };
/** Append Init.  `reason` is "completed" for normal termination.  */
struct TriggerInit { std::string reason; };
struct Propose { NodeId child; };
struct Agree {};
struct Refuse {};
struct Withdraw {};
struct Abort {};

} // namespace action

using Action = std::variant<action::Idle, action::Withhold, action::Send,
                            action::Append, action::TriggerInit, action::Propose,
                            action::Agree, action::Refuse, action::Withdraw,
                            action::Abort>;

/* ************************************************************************** */
/* Strategy specifications.  */

namespace strategy
{

/**
 * Follows the protocol.  `consent` names the AuthBy-guarded nodes this
 * participant is willing to authorise (early payouts and the like).
 */
struct Honest
{
  std::set<std::string> consent;
};

/** Agrees to off-chain step `step`, then never sends another message.  */
struct Staller
{
  std::size_t step = 0;
};

/**
 * Appends Init as soon as the graft of off-chain step `step` is being
 * signed.  Without a step, right after Head is on-chain.  Leaves the
 * redemption of Init to the others.
 */
struct PrematureInit
{
  std::optional<std::size_t> step;
};

/**
 * Once Init is on-chain, tries to append the oldest graft root it holds a
 * complete witness for, once per height.  With `trigger_step` it also puts
 * Init on-chain itself like PrematureInit.
 */
struct RollbackAttacker
{
  std::optional<std::size_t> trigger_step;
};

/** Refuses off-chain step `step` and then stays silent.  */
struct SilentAborter
{
  std::size_t step = 0;
};

/**
 * Withholds the stipulation message with the given ordinal.  With
 * `then_append` it still appends the root if it ends up able to.
 */
struct Withholder
{
  std::size_t ordinal = 0;
  bool then_append = false;
};

/**
 * Signs grafts but never releases its root signatures for them, keeping
 * the only complete witness of every new graft to itself.
 */
struct RootHoarder {};

} // namespace strategy

using StrategySpec = std::variant<strategy::Honest, strategy::Staller,
                                  strategy::PrematureInit,
                                  strategy::RollbackAttacker,
                                  strategy::SilentAborter,
                                  strategy::Withholder, strategy::RootHoarder>;

inline std::string
strategy_name (const StrategySpec& s)
{
  struct
  {
    std::string operator() (const strategy::Honest&) const { return "honest"; }
    std::string operator() (const strategy::Staller&) const { return "staller"; }
    std::string operator() (const strategy::PrematureInit&) const { return "premature_init"; }
    std::string operator() (const strategy::RollbackAttacker&) const { return "rollback_attacker"; }
    std::string operator() (const strategy::SilentAborter&) const { return "silent_aborter"; }
    std::string operator() (const strategy::Withholder&) const { return "withholder"; }
    std::string operator() (const strategy::RootHoarder&) const { return "root_hoarder"; }
  } v;
  return std::visit (v, s);
}

inline bool
is_honest (const StrategySpec& s)
{
  return std::holds_alternative<strategy::Honest> (s);
}

/* ************************************************************************** */
/* Decision functions.  */

/**
 * Index of the off-chain step currently under negotiation: step k creates
 * graft k + 1.
 */
inline std::optional<std::size_t>
current_step (const Observation& obs)
{
  if (obs.mode != Mode::Offchain || obs.stage != Stage::Running)
    return std::nullopt;
  if (obs.exchange_graft)
    return *obs.exchange_graft - 1;
  return obs.steps_sealed;
}

inline bool
patience_exceeded (const Observation& obs)
{
  return obs.waiting_since && obs.height >= *obs.waiting_since + obs.patience;
}

inline Action
decide_honest (const Observation& obs, const strategy::Honest& cfg)
{
  using namespace action;
  auto consents = [&cfg] (const std::string& name) {
    return cfg.consent.count (name) > 0;
  };

  switch (obs.stage)
    {
    case Stage::Stipulating:
      {
        if (!obs.outbox.empty ())
          return Send{obs.outbox.front ()};
        const auto& root = obs.appendable.front ();
        if (root.witness_complete && root.enabled_now && !obs.attempted_this_height)
          return Append{root.digest};
        if (patience_exceeded (obs))
          return Abort{};
        return Idle{};
      }

    case Stage::Running:
      {
        if (!obs.outbox.empty ())
          return Send{obs.outbox.front ()};
        if (obs.proposal && obs.proposal->awaiting_me)
          {
            bool ok = obs.proposal->valid;
            for (const auto& o : obs.options)
              if (o.child == obs.proposal->child && o.needs_my_auth)
                ok = ok && consents (o.name);
            return ok ? Action (Agree{}) : Action (Refuse{});
          }
        if (obs.attempted_this_height)
          return Idle{};
        if (obs.proposal && obs.proposal->refused)
          return TriggerInit{"refused"};
        if (patience_exceeded (obs))
          return TriggerInit{"timeout"};
        if (obs.exchange_graft || obs.proposal)
          return Idle{};
        if (obs.position_is_leaf)
          return TriggerInit{"completed"};
        for (const auto& o : obs.options)
          {
            if (!o.reveals_ok || !o.delay_ok)
              continue;
            if ((o.needs_my_auth || !o.auth_missing.empty ()) && !consents (o.name))
              continue;
            return Propose{o.child};
          }
        return Idle{};
      }

    case Stage::Failsafe:
      {
        if (obs.attempted_this_height)
          return Idle{};
        const Appendable* best = nullptr;
        for (const auto& a : obs.appendable)
          if (a.role == TxRole::GraftRoot && a.witness_complete
                && (best == nullptr || a.graft > best->graft))
            best = &a;
        if (best != nullptr && best->enabled_now)
          return Append{best->digest};
        return Idle{};
      }

    case Stage::Executing:
      {
        if (obs.proposal && obs.proposal->awaiting_me)
          {
            for (const auto& o : obs.options)
              if (o.child == obs.proposal->child)
                return consents (o.name) && !o.refused ? Action (Agree{})
                                                       : Action (Refuse{});
            return Refuse{};
          }
        if (obs.proposal && obs.proposal->proposer == obs.self
              && !obs.proposal->agreed && patience_exceeded (obs))
          return Withdraw{};
        if (obs.attempted_this_height)
          return Idle{};
        for (const auto& o : obs.options)
          {
            if (o.refused || !o.reveals_ok)
              continue;
            const bool guarded = o.needs_my_auth || !o.auth_missing.empty ();
            if (guarded && !consents (o.name))
              continue;
            if (!o.auth_missing.empty ())
              {
                if (!obs.proposal)
                  return Propose{o.child};
                continue;
              }
            if (o.delay_ok)
              return Append{*o.digest};
          }
        return Idle{};
      }

    default:
      return Idle{};
    }
}

namespace detail
{

inline const strategy::Honest&
plain_honest ()
{
  static const strategy::Honest h;
  return h;
}

/** Append the oldest complete graft root the observer holds.  */
inline Action
rollback_attempt (const Observation& obs)
{
  if (obs.attempted_this_height)
    return action::Idle{};
  for (const auto& a : obs.appendable)
    if (a.role == TxRole::GraftRoot && a.witness_complete
          && a.graft == obs.oldest_complete_graft)
      return action::Append{a.digest};
  return action::Idle{};
}

/** PrematureInit trigger condition.  */
inline bool
premature_due (const Observation& obs, const std::optional<std::size_t> step)
{
  if (obs.stage != Stage::Running || obs.attempted_this_height)
    return false;
  if (!step)
    return true;
  return obs.exchange_graft && *obs.exchange_graft == *step + 1;
}

} // namespace detail

inline Action
decide (const StrategySpec& spec, const Observation& obs)
{
  using namespace action;
  const auto& honest = detail::plain_honest ();

  if (const auto* h = std::get_if<strategy::Honest> (&spec))
    return decide_honest (obs, *h);

  if (const auto* w = std::get_if<strategy::Withholder> (&spec))
    {
      if (obs.stage != Stage::Stipulating)
        return decide_honest (obs, honest);
      for (const auto& m : obs.outbox)
        if (m.ordinal != w->ordinal)
          return Send{m};
      const auto& root = obs.appendable.front ();
      if (w->then_append && root.witness_complete && !obs.attempted_this_height)
        return Append{root.digest};
      return Withhold{};
    }

  /* Everything below only deviates from the off-chain protocol.  */
  if (obs.mode != Mode::Offchain)
    return decide_honest (obs, honest);

  if (const auto* s = std::get_if<strategy::Staller> (&spec))
    {
      const auto step = current_step (obs);
      const bool stalling
          = obs.stage == Stage::Failsafe || obs.stage == Stage::Executing
              || (step && *step >= s->step);
      if (!stalling || obs.stage == Stage::Stipulating)
        return decide_honest (obs, honest);
      if (obs.stage == Stage::Running && obs.proposal && obs.proposal->awaiting_me
            && *step == s->step)
        return Agree{};
      if (obs.stage == Stage::Executing || obs.stage == Stage::Failsafe)
        return Idle{};
      return obs.outbox.empty () ? Action (Idle{}) : Action (Withhold{});
    }

  if (const auto* p = std::get_if<strategy::PrematureInit> (&spec))
    {
      if (detail::premature_due (obs, p->step))
        return TriggerInit{"premature"};
      if (obs.stage == Stage::Failsafe)
        return Idle{};
      return decide_honest (obs, honest);
    }

  if (const auto* r = std::get_if<strategy::RollbackAttacker> (&spec))
    {
      if (r->trigger_step && detail::premature_due (obs, *r->trigger_step))
        return TriggerInit{"premature"};
      if (obs.stage == Stage::Failsafe)
        return detail::rollback_attempt (obs);
      return decide_honest (obs, honest);
    }

  if (const auto* a = std::get_if<strategy::SilentAborter> (&spec))
    {
      const auto step = current_step (obs);
      if (obs.stage == Stage::Running && step && *step >= a->step)
        {
          if (obs.proposal && obs.proposal->awaiting_me && *step == a->step)
            return Refuse{};
          return Idle{};
        }
      if (obs.stage == Stage::Running || obs.stage == Stage::Stipulating
            || obs.stage == Stage::Executing)
        return decide_honest (obs, honest);
      return Idle{};
    }

  /* RootHoarder.  */
  if (obs.stage == Stage::Running && obs.exchange_graft)
    {
      for (const auto& m : obs.outbox)
        if (!m.last)
          return Send{m};
      return obs.outbox.empty () ? Action (Idle{}) : Action (Withhold{});
    }
  return decide_honest (obs, honest);
}

} // namespace graftsim
