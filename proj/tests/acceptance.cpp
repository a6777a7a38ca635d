// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

/* Acceptance checks.  Prints one PASS/FAIL line per criterion and exits
   non-zero if any fails.  */

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

using namespace graftsim;
using namespace graftsim::testing;

namespace
{

struct Outcome
{
  bool pass = true;
  std::ostringstream detail;

  void
  require (const bool ok, const std::string& what)
  {
    if (!ok && pass)
      detail << what;
    pass = pass && ok;
  }
};

int failures = 0;

void
report (const char* id, const char* title, Outcome& o)
{
  std::printf ("%s criterion %s: %s", o.pass ? "PASS" : "FAIL", id, title);
  const auto d = o.detail.str ();
  if (!d.empty ())
    std::printf ("  [%s]", d.c_str ());
  std::printf ("\n");
  std::fflush (stdout);
  if (!o.pass)
    ++failures;
}

std::vector<Scenario>
bundled ()
{
  std::vector<std::string> paths;
  for (const auto& e : std::filesystem::directory_iterator (source_path ("scenarios")))
    if (e.path ().extension () == ".scn")
      paths.push_back (e.path ().string ());
  std::sort (paths.begin (), paths.end ());
  std::vector<Scenario> out;
  for (const auto& p : paths)
    out.push_back (load_scenario (p));
  return out;
}

/** Node ids from the root to `leaf`, inclusive.  */
std::vector<NodeId>
path_to (const ContractTree& t, const NodeId leaf)
{
  std::vector<NodeId> path{leaf};
  while (path.back () != t.root)
    for (const auto& n : t.nodes)
      if (std::find (n.children.begin (), n.children.end (), path.back ())
            != n.children.end ())
        {
          path.push_back (n.id);
          break;
        }
  std::reverse (path.begin (), path.end ());
  return path;
}

bool
conserved (const Report& r)
{
  Amount paid = 0;
  for (const auto& [p, v] : r.payouts)
    paid += v;
  return paid + r.fees_paid == r.total_deposits;
}

/* ************************************************************************** */

void
criterion_1 ()
{
  Outcome o;
  const auto off = run (bo3_scenario (Mode::Offchain));
  const auto on = run (bo3_scenario (Mode::Onchain));
  o.require (off.trace.appended_names ()
               == std::vector<std::string>{"Head", "Init", "LWL"},
             "off-chain appends differ");
  o.require (on.report.onchain_tx_count == 4, "on-chain count "
                                                + std::to_string (on.report.onchain_tx_count));
  o.detail << (o.pass ? "" : "; ") << "off=" << off.report.onchain_tx_count
           << " on=" << on.report.onchain_tx_count;
  report ("1", "happy path 3 vs 4 transactions", o);
}

void
criterion_2 ()
{
  Outcome o;
  const auto t = bo3 ();
  const SecretKeeper k (t.secrets, 0);
  std::size_t leaves = 0;
  for (const auto& n : t.nodes)
    {
      if (!n.children.empty ())
        continue;
      ++leaves;
      const auto path = path_to (t, n.id);
      Session s (Mode::Offchain, t, k.commitments ());
      stipulate (s);
      trigger_failsafe (s);
      finalize (s);
      continue_onchain (s, std::vector<NodeId> (path.begin () + 1, path.end ()), k);
      o.require (s.stage () == Stage::Finalized && *s.terminal_leaf () == n.name,
                 n.name + " not reached");
      o.require (s.chain ().non_deposit_count () == path.size () + 2,
                 n.name + ": " + std::to_string (s.chain ().non_deposit_count ()));
    }
  o.require (leaves == 10, "leaf count");
  o.detail << (o.pass ? "" : "; ") << leaves << " leaves";
  report ("2", "worst case is path length + 2", o);
}

void
criterion_3 ()
{
  Outcome o;
  const auto t = bo3 ();
  const SecretKeeper k (t.secrets, 0);
  Session s (Mode::Offchain, t, k.commitments ());
  stipulate (s);
  for (const auto* name : {"L??", "LW?"})
    offchain_step (s, id_of (t, name), edge_witness (s, id_of (t, name), k));
  trigger_failsafe (s);
  finalize (s);
  continue_onchain (s, ids_of (t, {"LWL"}), k);
  const auto baseline = run_onchain_baseline (t, ids_of (t, {"Bet", "L??", "LW?", "LWL"}), k)
                          .appended_names ().size ();
  o.require (s.chain ().non_deposit_count () == baseline && baseline == 4,
             std::to_string (s.chain ().non_deposit_count ()) + " vs "
               + std::to_string (baseline));
  report ("3", "break-even after two off-chain steps", o);
}

void
criterion_4 ()
{
  Outcome o;
  const auto t = bo3 ();
  const SecretKeeper k (t.secrets, 0);
  for (const Height tu : {1u, 2u, 5u})
    {
      SessionParams p;
      p.t = tu;
      Session s (Mode::Offchain, t, k.commitments (), p);
      stipulate (s);
      for (const auto* name : {"L??", "LW?", "LWL"})
        offchain_step (s, id_of (t, name), edge_witness (s, id_of (t, name), k));
      const auto& g = s.grafts ();
      const std::vector<Height> want{3 * tu, 2 * tu, tu, 0};
      for (std::size_t i = 0; i < want.size (); ++i)
        o.require (g[i].rel_timelock () == want[i],
                   "t=" + std::to_string (tu) + " graft " + std::to_string (i));
    }
  report ("4", "timelock schedule 3t, 2t, t, 0", o);
}

/* ************************************************************************** */
/* No rollback.  */

struct PropertyCase
{
  Scenario sc;
  /* Root hoarding is checked against the weaker bound only.  */
  bool weak = false;
};

struct PropertyResult
{
  std::size_t runs = 0;
  std::size_t inits = 0;
  std::size_t strictViolations = 0;
  std::size_t weakViolations = 0;
  std::size_t unterminated = 0;
  std::size_t unconserved = 0;
  std::string first;
};

void
check_case (const PropertyCase& c, PropertyResult& r)
{
  ++r.runs;
  const auto res = run (c.sc);
  if (!res.report.terminated ())
    {
      ++r.unterminated;
      if (r.first.empty ())
        r.first = c.sc.name + " did not terminate";
    }
  else if (!conserved (res.report))
    ++r.unconserved;
  if (!res.init_spender)
    return;
  ++r.inits;
  const bool exact = res.init_spender == res.expected_redeemer;
  const bool notOlder = res.report.init_redeemer && res.report.sealed_at_init
                          && *res.report.init_redeemer >= *res.report.sealed_at_init;
  if (!c.weak && !exact)
    {
      ++r.strictViolations;
      if (r.first.empty ())
        r.first = c.sc.name;
    }
  if (!notOlder)
    {
      ++r.weakViolations;
      if (r.first.empty ())
        r.first = c.sc.name + " (older)";
    }
}

/** Every adversary, in every single position, every ordering, t in {1, 2}.  */
void
expand (const std::string& name, const ContractTree& tree,
        const std::vector<ScheduledReveal>& oracle, std::vector<PropertyCase>& out)
{
  const auto h = subtree_height (tree, tree.root);
  auto specs = adversaries (h);
  const auto parts = tree.participants;
  const auto honest = agreeable (tree);
  for (const Height tu : {1u, 2u})
    for (const auto& order : orderings (parts))
      for (std::size_t spec = 0; spec <= specs.size (); ++spec)
        for (const auto& bad : parts)
          {
            PropertyCase c;
            c.sc.contract = tree;
            c.sc.oracle = oracle;
            c.sc.t = tu;
            c.sc.order = order;
            for (const auto& p : parts)
              c.sc.strategies[p] = honest;
            std::ostringstream nm;
            nm << name << " t=" << tu << " order=";
            for (const auto& p : order)
              nm << p.name;
            if (spec < specs.size ())
              {
                c.sc.strategies[bad] = specs[spec];
                nm << " " << bad.name << "=" << strategy_name (specs[spec]) << "#" << spec;
              }
            else
              {
                c.sc.strategies[bad] = strategy::RootHoarder{};
                c.weak = true;
                nm << " " << bad.name << "=root_hoarder";
              }
            c.sc.name = nm.str ();
            out.push_back (std::move (c));
          }
}

PropertyResult
run_parallel (const std::vector<PropertyCase>& cases)
{
  const unsigned nt = std::max (1u, std::thread::hardware_concurrency ());
  std::vector<std::future<PropertyResult>> fs;
  for (unsigned w = 0; w < nt; ++w)
    fs.push_back (std::async (std::launch::async, [&cases, w, nt] {
      PropertyResult r;
      for (std::size_t i = w; i < cases.size (); i += nt)
        check_case (cases[i], r);
      return r;
    }));
  PropertyResult total;
  for (auto& f : fs)
    {
      const auto r = f.get ();
      total.runs += r.runs;
      total.inits += r.inits;
      total.strictViolations += r.strictViolations;
      total.weakViolations += r.weakViolations;
      total.unterminated += r.unterminated;
      total.unconserved += r.unconserved;
      if (total.first.empty ())
        total.first = r.first;
    }
  return total;
}

std::size_t conservationFailures = 0;
std::size_t conservationRuns = 0;

void
criterion_5 ()
{
  const auto start = std::chrono::steady_clock::now ();
  std::vector<PropertyCase> cases;
  expand ("bo3", bo3 (), lwl_schedule (), cases);
  constexpr std::size_t randomTrees = 100;
  for (std::uint64_t seed = 1; seed <= randomTrees; ++seed)
    {
      const auto rc = random_case (seed);
      expand ("random#" + std::to_string (seed), rc.tree, rc.oracle, cases);
    }
  const auto r = run_parallel (cases);
  const double secs = std::chrono::duration<double> (
                          std::chrono::steady_clock::now () - start).count ();
  conservationFailures += r.unconserved;
  conservationRuns += r.runs;

  Outcome o;
  o.require (r.strictViolations == 0,
             std::to_string (r.strictViolations) + " counterexamples, first " + r.first);
  o.require (r.unterminated == 0,
             std::to_string (r.unterminated) + " runs hit the cap, first " + r.first);
  o.require (secs <= 60.0, "runtime " + std::to_string (secs) + " s");
  o.detail << (o.pass ? "" : "; ") << r.runs << " runs, " << r.inits
           << " with Init on-chain, " << randomTrees << " random trees, "
           << static_cast<int> (secs * 10) / 10.0 << " s";
  report ("5", "no rollback with an honest participant", o);

  Outcome w;
  w.require (r.weakViolations == 0, std::to_string (r.weakViolations) + " older redeemers");
  report ("5b", "root hoarding never redeems an older graft", w);
}

void
criterion_6 ()
{
  Outcome o;
  std::size_t rollbacks = 0;
  for (const auto& order : orderings ({ParticipantId ("A"), ParticipantId ("B")}))
    for (const std::size_t k : {0u, 1u, 2u})
      {
        auto sc = bo3_scenario (Mode::Offchain);
        sc.order = order;
        sc.strategies[ParticipantId ("A")] = strategy::RollbackAttacker{k};
        sc.strategies[ParticipantId ("B")] = strategy::RollbackAttacker{std::nullopt};
        const auto r = run (sc);
        if (r.init_spender && r.init_spender != r.expected_redeemer)
          ++rollbacks;
      }
  o.require (rollbacks >= 1, "no rollback without honest participants");
  o.detail << (o.pass ? "" : "; ") << rollbacks << "/6 runs rolled back";
  report ("6", "rollback succeeds with no honest participant", o);
}

void
criterion_7 ()
{
  Outcome o;
  std::vector<double> xs, ys;
  for (const std::size_t n : {2u, 4u, 8u, 16u})
    {
      Scenario off;
      off.contract = chain_tree (n);
      off.mode = Mode::Offchain;
      auto on = off;
      on.mode = Mode::Onchain;
      const auto offCount = run (off).report.message_count;
      const auto onCount = run (on).report.message_count;
      o.require (offCount == ref_chain_census (n, 2),
                 "n=" + std::to_string (n) + ": " + std::to_string (offCount));
      o.require (onCount == 2 * n, "on-chain stipulation n=" + std::to_string (n));
      xs.push_back (static_cast<double> (n));
      ys.push_back (static_cast<double> (offCount) - static_cast<double> (onCount));
    }
  const double k = fit_power_exponent (xs, ys);
  o.require (k >= 1.8 && k <= 2.2, "exponent " + std::to_string (k));

  double lo = 1e9, hi = 0;
  for (std::size_t levels = 2; levels <= 6; ++levels)
    {
      Scenario off;
      off.contract = binary_tree (levels);
      off.mode = Mode::Offchain;
      auto on = off;
      on.mode = Mode::Onchain;
      const auto n = static_cast<double> (off.contract.nodes.size ());
      const double over = static_cast<double> (run (off).report.message_count)
                            - static_cast<double> (run (on).report.message_count);
      lo = std::min (lo, over / n);
      hi = std::max (hi, over / n);
    }
  o.require (lo >= 1.0 && hi <= 3.0, "binary overhead/n outside [1, 3]");
  o.detail << (o.pass ? "" : "; ") << "chain exponent " << static_cast<int> (k * 1000) / 1000.0
           << ", binary overhead/n in [" << static_cast<int> (lo * 100) / 100.0 << ", "
           << static_cast<int> (hi * 100) / 100.0 << "]";
  report ("7", "message complexity", o);
}

void
criterion_8 ()
{
  Outcome o;
  for (const auto& sc : bundled ())
    {
      const auto r = run (sc).report;
      ++conservationRuns;
      if (r.terminated () && !conserved (r))
        {
          ++conservationFailures;
          o.require (false, sc.name);
        }
    }
  o.require (conservationFailures == 0,
             std::to_string (conservationFailures) + " runs leak value");
  o.detail << (o.pass ? "" : "; ") << conservationRuns << " runs";
  report ("8", "conservation of value", o);
}

void
criterion_9 ()
{
  Outcome o;
  std::size_t n = 0;
  for (const auto& sc : bundled ())
    {
      const auto a = run (sc), b = run (sc);
      o.require (a.trace.to_jsonl () == b.trace.to_jsonl (), sc.name + " differs");
      const auto replayed = replay (Trace::from_jsonl (a.trace.to_jsonl ()),
                                    scenario_contract (sc).fee);
      o.require (replayed.same_state (a.chain), sc.name + " replay differs");
      ++n;
    }
  o.detail << (o.pass ? "" : "; ") << n << " bundled scenarios";
  report ("9", "deterministic traces and replay", o);
}

void
criterion_10 ()
{
  Outcome o, w;
  std::size_t cases = 0, selfSpends = 0;
  for (const auto mode : {Mode::Offchain, Mode::Onchain})
    {
      /* Messages each participant sends in an honest stipulation, and the
         first ordinal of its root-spending phase.  */
      const auto honest = run (bo3_scenario (mode));
      std::map<std::string, std::size_t> sent, firstLast;
      for (const auto& e : honest.trace.events)
        if ((e.kind == EventKind::TxSetSent || e.kind == EventKind::SignatureSent)
              && !e.payload.contains ("graft"))
          {
            if (e.kind == EventKind::SignatureSent && e.payload.at ("phase") == "last"
                  && !firstLast.count (e.actor))
              firstLast[e.actor] = sent[e.actor];
            ++sent[e.actor];
          }
      for (const auto& [who, count] : sent)
        for (std::size_t ord = 0; ord < count; ++ord)
          for (const bool thenAppend : {false, true})
            {
              auto sc = bo3_scenario (mode);
              sc.strategies[ParticipantId (who)] = strategy::Withholder{ord, thenAppend};
              const auto r = run (sc);
              const bool safe = r.report.status == "aborted"
                                  && r.chain.non_deposit_count () == 0
                                  && r.chain.utxo_total () == r.report.total_deposits;
              const std::string what = std::string (to_string (mode)) + " " + who
                                         + " ordinal " + std::to_string (ord);
              if (!thenAppend)
                {
                  ++cases;
                  o.require (safe, what);
                  continue;
                }
              if (safe)
                continue;
              /* The withholder spent the deposits alone.  Only possible by
                 keeping back its own root signature, and the others must
                 still reach a leaf.  */
              ++selfSpends;
              w.require (ord >= firstLast.at (who), what + " spent early");
              w.require (r.report.status == "leaf" && conserved (r.report),
                         what + " did not complete");
            }
    }
  o.detail << (o.pass ? "" : "; ") << cases << " withheld messages";
  report ("10", "withholding a stipulation message spends nothing", o);
  w.detail << (w.pass ? "" : "; ") << selfSpends
           << " runs where the withholder appended the root itself";
  report ("10b", "a withholder can only spend by keeping back its root signature", w);
}

} // anonymous namespace

int
main ()
{
  criterion_1 ();
  criterion_2 ();
  criterion_3 ();
  criterion_4 ();
  criterion_5 ();
  criterion_6 ();
  criterion_7 ();
  criterion_8 ();
  criterion_9 ();
  criterion_10 ();
  return failures == 0 ? 0 : 1;
}
