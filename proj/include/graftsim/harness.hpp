// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "contract_io.hpp"
#include "session.hpp"
#include "strategies.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace graftsim
{

struct ScheduledReveal
{
  Height height = 0;
  std::string label;

  bool operator== (const ScheduledReveal&) const = default;
};

struct Scenario
{
  std::string name;
  ContractTree contract;
  Mode mode = Mode::Offchain;
  std::map<ParticipantId, StrategySpec> strategies;
  std::vector<ScheduledReveal> oracle;
  Height t = 1;
  /** Overrides the contract's fee when set.  */
  std::optional<Amount> fee;
  Height patience = 2;
  std::uint64_t seed = 0;
  /** Polling order within a round; lexicographic when empty.  */
  std::vector<ParticipantId> order;
  std::optional<Height> height_cap;
};

class ScenarioError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class IncomparableScenarios : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/* ************************************************************************** */
/* Scenario files.  */

inline StrategySpec
strategy_from_json (const nlohmann::json& j, const std::string& who)
{
  using detail::field;
  const std::string where = "strategy of " + who;
  const auto kind = field<std::string> (j, "kind", where);
  auto optStep = [&] (const char* key) -> std::optional<std::size_t> {
    if (!j.contains (key) || j.at (key).is_null ())
      return std::nullopt;
    return field<std::size_t> (j, key, where);
  };

  if (kind == "honest")
    {
      strategy::Honest h;
      if (j.contains ("consent"))
        for (const auto& c : field<std::vector<std::string>> (j, "consent", where))
          h.consent.insert (c);
      return h;
    }
  if (kind == "staller")
    return strategy::Staller{field<std::size_t> (j, "step", where)};
  if (kind == "premature_init")
    return strategy::PrematureInit{optStep ("step")};
  if (kind == "rollback_attacker")
    return strategy::RollbackAttacker{optStep ("trigger_step")};
  if (kind == "silent_aborter")
    return strategy::SilentAborter{field<std::size_t> (j, "step", where)};
  if (kind == "withholder")
    return strategy::Withholder{field<std::size_t> (j, "ordinal", where),
                                j.value ("then_append", false)};
  if (kind == "root_hoarder")
    return strategy::RootHoarder{};
  throw ParseError (where + ": unknown strategy kind '" + kind + "'");
}

/**
 * Builds a scenario from a document.  A string "contract" is a path,
 * resolved against `baseDir`; an object is an inline contract.
 */
inline Scenario
scenario_from_json (const nlohmann::json& doc, const std::filesystem::path& baseDir)
{
  using detail::field;
  if (!doc.is_object ())
    throw ParseError ("scenario document must be an object");

  Scenario sc;
  sc.name = doc.value ("name", std::string ());
  if (!doc.contains ("contract"))
    throw ParseError ("scenario: missing field 'contract'");
  const auto& c = doc.at ("contract");
  if (c.is_string ())
    sc.contract = load_contract ((baseDir / c.get<std::string> ()).string ());
  else
    sc.contract = contract_from_json (c);

  const auto mode = doc.value ("mode", std::string ("offchain"));
  if (mode == "offchain")
    sc.mode = Mode::Offchain;
  else if (mode == "onchain")
    sc.mode = Mode::Onchain;
  else
    throw ParseError ("scenario: unknown mode '" + mode + "'");

  sc.t = doc.value ("t", Height{1});
  if (doc.contains ("fee"))
    sc.fee = field<Amount> (doc, "fee", "scenario");
  sc.patience = doc.value ("patience", Height{2});
  sc.seed = doc.value ("seed", std::uint64_t{0});
  if (doc.contains ("height_cap"))
    sc.height_cap = field<Height> (doc, "height_cap", "scenario");

  if (doc.contains ("oracle"))
    for (const auto& r : doc.at ("oracle"))
      sc.oracle.push_back (ScheduledReveal{field<Height> (r, "height", "oracle entry"),
                                           field<std::string> (r, "reveal", "oracle entry")});
  if (doc.contains ("strategies"))
    for (const auto& [p, s] : doc.at ("strategies").items ())
      sc.strategies[ParticipantId (p)] = strategy_from_json (s, p);
  if (doc.contains ("order"))
    for (const auto& p : field<std::vector<std::string>> (doc, "order", "scenario"))
      sc.order.emplace_back (p);
  return sc;
}

inline Scenario
load_scenario (const std::string& path)
{
  const auto doc = parse_document (read_file (path));
  return scenario_from_json (doc, std::filesystem::path (path).parent_path ());
}

/** Effective contract of a scenario (fee override applied, canonical ids).  */
inline ContractTree
scenario_contract (const Scenario& sc)
{
  auto tree = sc.contract;
  if (sc.fee)
    tree.fee = *sc.fee;
  return tree;
}

/** Checks everything run() relies on.  Throws ScenarioError.  */
inline void
check_scenario (const Scenario& sc)
{
  const auto tree = scenario_contract (sc);
  const auto errors = validate_tree (tree);
  if (!errors.empty ())
    throw ScenarioError ("invalid contract: " + to_string (errors.front ()));
  if (sc.t < 1)
    throw ScenarioError ("t must be at least 1");
  Height prev = 0;
  for (const auto& r : sc.oracle)
    {
      if (tree.find_secret (r.label) == nullptr)
        throw ScenarioError ("oracle reveals unknown secret " + r.label);
      if (r.height < prev)
        throw ScenarioError ("oracle schedule heights must be nondecreasing");
      prev = r.height;
    }
  for (const auto& [p, s] : sc.strategies)
    if (!tree.has_participant (p))
      throw ScenarioError ("strategy for unknown participant " + p.name);
  for (const auto& p : sc.order)
    if (!tree.has_participant (p))
      throw ScenarioError ("order names unknown participant " + p.name);
  if (!sc.order.empty () && sc.order.size () != tree.participants.size ())
    throw ScenarioError ("order must list every participant exactly once");
}

/* ************************************************************************** */
/* Bounds.  */

/** Largest sum of After delays along any root-to-leaf path.  */
inline Height
max_path_delay (const ContractTree& tree)
{
  Height best = 0;
  for (const auto leaf : tree.leaves ())
    {
      Height sum = 0;
      for (const auto id : tree.path_to (leaf))
        for (const auto& req : tree.at (id).edge)
          if (const auto* a = std::get_if<After> (&req))
            sum += a->delay;
      best = std::max (best, sum);
    }
  return best;
}

/**
 * Height by which a run with at least one honest participant reaches a
 * leaf once every needed reveal is public: stipulation, the contract's
 * own delays, one patience window per possible stall, the longest graft
 * timelock and one block per remaining on-chain step.
 */
inline Height
liveness_bound (const Scenario& sc)
{
  const auto tree = scenario_contract (sc);
  const Height depth = subtree_height (tree, tree.root);
  const Height lastReveal = sc.oracle.empty () ? 0 : sc.oracle.back ().height;
  return 1 + lastReveal + max_path_delay (tree) + sc.patience * (depth + 2)
           + (depth + 1) * sc.t + depth + 1;
}

inline Height
default_height_cap (const Scenario& sc)
{
  return 10 * liveness_bound (sc);
}

/* ************************************************************************** */
/* Reports.  */

struct Report
{
  std::string scenario;
  Mode mode = Mode::Offchain;
  /** "leaf", "aborted" or "height_cap".  */
  std::string status;
  std::string leaf;
  std::size_t onchain_tx_count = 0;
  Amount fees_paid = 0;
  std::optional<Amount> fees_saved_vs_baseline;
  Height completion_height = 0;
  std::optional<std::int64_t> extra_delay_blocks;
  std::size_t message_count = 0;
  std::map<ParticipantId, Amount> payouts;
  Amount total_deposits = 0;
  std::optional<std::size_t> sealed_at_init;
  std::optional<std::size_t> init_redeemer;

  bool
  terminated () const
  {
    return status != "height_cap";
  }

  Amount
  payout_total () const
  {
    Amount sum = 0;
    for (const auto& [p, v] : payouts)
      sum += v;
    return sum;
  }
};

inline ordered_json
report_to_json (const Report& r)
{
  ordered_json j;
  j["scenario"] = r.scenario;
  j["mode"] = to_string (r.mode);
  j["status"] = r.status;
  j["leaf"] = r.leaf;
  j["onchain_tx_count"] = r.onchain_tx_count;
  j["fees_paid"] = r.fees_paid;
  j["fees_saved_vs_baseline"] = r.fees_saved_vs_baseline
                                  ? ordered_json (*r.fees_saved_vs_baseline)
                                  : ordered_json ();
  j["completion_height"] = r.completion_height;
  j["extra_delay_blocks"] = r.extra_delay_blocks
                              ? ordered_json (*r.extra_delay_blocks)
                              : ordered_json ();
  j["message_count"] = r.message_count;
  ordered_json pay = ordered_json::object ();
  for (const auto& [p, v] : r.payouts)
    pay[p.name] = v;
  j["payouts"] = pay;
  j["total_deposits"] = r.total_deposits;
  if (r.mode == Mode::Offchain)
    {
      j["sealed_at_init"] = r.sealed_at_init ? ordered_json (*r.sealed_at_init)
                                             : ordered_json ();
      j["init_redeemer"] = r.init_redeemer ? ordered_json (*r.init_redeemer)
                                           : ordered_json ();
    }
  return j;
}

/** Number of signature messages in a trace.  */
inline std::size_t
message_census (const Trace& trace)
{
  return trace.count (EventKind::SignatureSent);
}

/* ************************************************************************** */
/* Scheduler.  */

struct RunResult
{
  Trace trace;
  Report report;
  ChainState chain;
  /** Digest of the transaction that spent Init, if any.  */
  std::optional<TxDigest> init_spender;
  /** Digest of the latest fully signed graft root when Init was appended.  */
  std::optional<TxDigest> expected_redeemer;
};

namespace detail
{

/** Executes an action.  Returns true if the protocol state moved.  */
inline bool
execute (Session& s, const ParticipantId& p, const Action& a)
{
  if (const auto* m = std::get_if<action::Send> (&a))
    return s.send (p, m->msg);
  if (const auto* ap = std::get_if<action::Append> (&a))
    return !s.append (p, ap->digest).has_value ();
  if (const auto* ti = std::get_if<action::TriggerInit> (&a))
    return !s.init_on_chain () && !s.trigger_init (p, ti->reason).has_value ();
  if (const auto* pr = std::get_if<action::Propose> (&a))
    return !s.propose (p, pr->child).has_value ();
  if (std::holds_alternative<action::Agree> (a))
    return s.respond (p, true);
  if (std::holds_alternative<action::Refuse> (a))
    return s.respond (p, false);
  if (std::holds_alternative<action::Withdraw> (a))
    return s.withdraw (p);
  if (std::holds_alternative<action::Abort> (a))
    {
      s.abort_stipulation (p);
      return true;
    }
  return false;
}

/* Guards against a strategy pair that keeps changing state without end.  */
constexpr std::size_t MAX_ACTIONS_PER_HEIGHT = 1'000'000;

} // namespace detail

inline Report
make_report (const Scenario& sc, const Session& s, const std::string& status)
{
  Report r;
  r.scenario = sc.name;
  r.mode = sc.mode;
  r.status = status;
  r.leaf = s.terminal_leaf ().value_or ("");
  r.onchain_tx_count = s.chain ().non_deposit_count ();
  r.fees_paid = static_cast<Amount> (r.onchain_tx_count) * s.tree ().fee;
  r.completion_height = s.height ();
  r.message_count = message_census (s.trace ());
  r.payouts = s.chain ().holdings ();
  r.total_deposits = s.tree ().total_deposits ();
  if (sc.mode == Mode::Offchain)
    {
      r.sealed_at_init = s.sealed_at_init ();
      r.init_redeemer = s.init_redeemer ();
    }
  return r;
}

/**
 * Runs a scenario.  Each round: scheduled reveals, then participants are
 * polled in order, repeatedly, until a full pass changes nothing; then the
 * chain advances one block.  Stops at a leaf, an aborted stipulation or the
 * height cap.
 */
inline RunResult
run (const Scenario& sc)
{
  check_scenario (sc);
  const auto tree = scenario_contract (sc);
  const SecretKeeper keeper (tree.secrets, sc.seed);
  Session s (sc.mode, tree, keeper.commitments (),
             SessionParams{sc.t, sc.patience, sc.seed});

  std::vector<ParticipantId> order = sc.order;
  if (order.empty ())
    order = s.participants ();
  auto specOf = [&sc] (const ParticipantId& p) -> StrategySpec {
    const auto it = sc.strategies.find (p);
    return it == sc.strategies.end () ? StrategySpec (strategy::Honest{}) : it->second;
  };

  const Height cap = sc.height_cap.value_or (default_height_cap (sc));
  std::size_t nextReveal = 0;
  std::optional<TxDigest> expected;
  std::string status = "height_cap";

  while (true)
    {
      while (nextReveal < sc.oracle.size ()
               && sc.oracle[nextReveal].height <= s.height ())
        {
          const auto& label = sc.oracle[nextReveal++].label;
          const auto* decl = tree.find_secret (label);
          s.publish (decl->owner ? decl->owner->name : "oracle", keeper.reveal (label));
        }

      std::size_t actions = 0;
      bool progress = true;
      while (progress && !s.terminated ())
        {
          progress = false;
          for (const auto& p : order)
            {
              while (!s.terminated ())
                {
                  const bool initBefore = s.init_on_chain ();
                  const auto act = decide (specOf (p), s.observe (p));
                  if (!detail::execute (s, p, act))
                    break;
                  progress = true;
                  if (!initBefore && s.init_on_chain ())
                    {
                      const auto g = s.sealed_at_init ();
                      expected = s.grafts ()[*g].root_instance.digest;
                    }
                  if (++actions > detail::MAX_ACTIONS_PER_HEIGHT)
                    throw std::runtime_error ("scheduler livelock at height "
                                              + std::to_string (s.height ()));
                }
              if (s.terminated ())
                break;
            }
        }

      if (s.stage () == Stage::Finalized)
        {
          status = "leaf";
          break;
        }
      if (s.stage () == Stage::Aborted)
        {
          status = "aborted";
          break;
        }
      if (s.height () >= cap)
        break;
      s.tick ();
    }

  s.finish (status);
  RunResult out;
  out.report = make_report (sc, s, status);
  out.chain = s.chain ();
  out.init_spender = s.init_spender ();
  out.trace = std::move (s.trace ());
  out.expected_redeemer = expected;
  return out;
}

/**
 * Runs an off-chain scenario against its on-chain baseline and fills in
 * the comparison fields of the off-chain report.
 */
inline Report
compare (const Scenario& off, const Scenario& on)
{
  const auto a = scenario_contract (off);
  const auto b = scenario_contract (on);
  if (contract_to_json (canonicalize (a)) != contract_to_json (canonicalize (b)))
    throw IncomparableScenarios ("scenarios use different contracts");
  if (a.fee != b.fee)
    throw IncomparableScenarios ("scenarios use different fees");
  if (off.oracle != on.oracle)
    throw IncomparableScenarios ("scenarios use different oracle schedules");

  const auto offRun = run (off);
  const auto onRun = run (on);
  if (!offRun.report.terminated () || !onRun.report.terminated ())
    throw IncomparableScenarios ("a scenario hit the height cap");
  if (offRun.report.leaf != onRun.report.leaf)
    throw IncomparableScenarios ("scenarios end in different leaves ("
                                 + offRun.report.leaf + " vs "
                                 + onRun.report.leaf + ")");

  auto r = offRun.report;
  r.fees_saved_vs_baseline = onRun.report.fees_paid - offRun.report.fees_paid;
  r.extra_delay_blocks = static_cast<std::int64_t> (offRun.report.completion_height)
                           - static_cast<std::int64_t> (onRun.report.completion_height);
  return r;
}

} // namespace graftsim
