// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "support.hpp"

#include <gtest/gtest.h>

using namespace graftsim;
using namespace graftsim::testing;

namespace
{

const ParticipantId A ("A");
const ParticipantId B ("B");

TxInstance
deposit (const ParticipantId& p, const Amount v)
{
  TxInstance tx;
  tx.name = "Dep_" + p.name;
  tx.outputs = {OutputSpec{v, p}};
  return seal_digest (tx, "test");
}

TxInstance
spend (const std::string& name, const std::vector<OutPoint>& ins,
       const Amount out, const Height lock = 0)
{
  TxInstance tx;
  tx.name = name;
  tx.inputs = ins;
  tx.rel_timelock = lock;
  tx.required_signers = {A, B};
  tx.outputs = {OutputSpec{out, std::nullopt}};
  return seal_digest (tx, "test");
}

AppendWitness
both (const TxInstance& tx)
{
  return AppendWitness{{sign (A, tx.digest), sign (B, tx.digest)}, {}};
}

} // anonymous namespace

TEST (Ledger, DigestDependsOnEveryField)
{
  const auto base = spend ("T", {}, 5);
  auto other = base;
  other.name = "U";
  EXPECT_NE (compute_digest (other, "test"), base.digest);
  other = base;
  other.rel_timelock = 1;
  EXPECT_NE (compute_digest (other, "test"), base.digest);
  other = base;
  other.outputs[0].value = 6;
  EXPECT_NE (compute_digest (other, "test"), base.digest);
  EXPECT_NE (compute_digest (base, "other-salt"), base.digest);
  EXPECT_EQ (compute_digest (base, "test"), base.digest);
}

TEST (Ledger, AppendRulesInOrder)
{
  ChainState c (1);
  const auto da = deposit (A, 10), db = deposit (B, 10);
  ASSERT_FALSE (c.try_append (da, {}));
  ASSERT_FALSE (c.try_append (db, {}));

  const auto root = spend ("Root", {{da.digest, 0}, {db.digest, 0}}, 19);
  const auto child = spend ("Child", {{root.digest, 0}}, 18, 3);

  /* Missing input beats missing signature.  */
  auto err = c.try_append (child, {});
  ASSERT_TRUE (err);
  EXPECT_EQ (err->kind, AppendError::Kind::MissingInput);

  err = c.try_append (root, AppendWitness{{sign (A, root.digest)}, {}});
  ASSERT_TRUE (err);
  EXPECT_EQ (err->kind, AppendError::Kind::MissingSignature);
  EXPECT_EQ (err->subject, "B");

  /* A signature on another digest does not count.  */
  err = c.try_append (root, AppendWitness{{sign (A, root.digest), sign (B, child.digest)}, {}});
  ASSERT_TRUE (err);
  EXPECT_EQ (err->kind, AppendError::Kind::MissingSignature);

  ASSERT_FALSE (c.try_append (root, both (root)));
  err = c.try_append (root, both (root));
  ASSERT_TRUE (err);
  EXPECT_EQ (err->kind, AppendError::Kind::AlreadyAppended);

  err = c.try_append (child, both (child));
  ASSERT_TRUE (err);
  EXPECT_EQ (err->kind, AppendError::Kind::TimelockNotExpired);
  EXPECT_EQ (err->needed_height, 3u);
  EXPECT_EQ (std::get<Height> (c.enabled_at (child)), 3u);

  for (int i = 0; i < 3; ++i)
    c.tick ();
  EXPECT_FALSE (c.try_append (child, both (child)));
  EXPECT_EQ (*c.tx_height (child.digest), 3u);
  EXPECT_EQ (c.non_deposit_count (), 2u);
  EXPECT_EQ (c.utxo_total (), 18);
  EXPECT_EQ (*c.spender ({root.digest, 0}), child.digest);
  EXPECT_EQ (std::get<Blocked> (c.enabled_at (child)).reason,
             AppendError::Kind::AlreadyAppended);
}

TEST (Ledger, RevealAndValueChecks)
{
  ChainState c (1);
  const auto da = deposit (A, 10);
  ASSERT_FALSE (c.try_append (da, {}));

  const SecretKeeper k ({{"s", std::nullopt}}, 1);
  auto tx = spend ("T", {{da.digest, 0}}, 9);
  tx.required_reveals = {k.commitment ("s")};
  tx = seal_digest (tx, "test");
  auto err = c.try_append (tx, both (tx));
  ASSERT_TRUE (err);
  EXPECT_EQ (err->kind, AppendError::Kind::MissingReveal);
  EXPECT_EQ (err->subject, "s");

  auto w = both (tx);
  w.reveals = {Reveal{"s", Bytes{1, 2, 3}}};
  err = c.try_append (tx, w);
  ASSERT_TRUE (err);
  EXPECT_EQ (err->kind, AppendError::Kind::MissingReveal);

  auto bad = spend ("Bad", {{da.digest, 0}}, 8);
  err = c.try_append (bad, both (bad));
  ASSERT_TRUE (err);
  EXPECT_EQ (err->kind, AppendError::Kind::ValueMismatch);

  w.reveals = {k.reveal ("s")};
  EXPECT_FALSE (c.try_append (tx, w));
}

TEST (Ledger, FailedAppendLeavesStateUnchanged)
{
  ChainState c (1);
  const auto da = deposit (A, 10);
  ASSERT_FALSE (c.try_append (da, {}));
  const auto before = c;
  const auto tx = spend ("T", {{da.digest, 0}}, 9, 2);
  ASSERT_TRUE (c.try_append (tx, both (tx)));
  EXPECT_TRUE (c.same_state (before));
}

TEST (Ledger, RelativeTimelockUsesLatestInput)
{
  ChainState c (0);
  const auto da = deposit (A, 5);
  ASSERT_FALSE (c.try_append (da, {}));
  c.tick ();
  c.tick ();
  const auto db = deposit (B, 5);
  ASSERT_FALSE (c.try_append (db, {}));
  const auto tx = spend ("T", {{da.digest, 0}, {db.digest, 0}}, 10, 4);
  EXPECT_EQ (std::get<Height> (c.enabled_at (tx)), 6u);
}

TEST (Ledger, EdgeSignaturesAreDistinct)
{
  ChainState c (0);
  const auto da = deposit (A, 5);
  ASSERT_FALSE (c.try_append (da, {}));
  auto tx = spend ("T", {{da.digest, 0}}, 5);
  tx.edge_signers = {B};
  tx = seal_digest (tx, "test");
  auto err = c.try_append (tx, both (tx));
  ASSERT_TRUE (err);
  EXPECT_EQ (err->kind, AppendError::Kind::MissingSignature);
  auto w = both (tx);
  w.signatures.push_back (sign (B, tx.digest, SigRole::Edge));
  EXPECT_FALSE (c.try_append (tx, w));
}

TEST (Ledger, HoldingsAndReplay)
{
  SessionParams params;
  const auto sc = bo3_scenario (Mode::Onchain);
  const auto res = run (sc);
  const auto replayed = replay (res.trace, sc.contract.fee);
  EXPECT_TRUE (replayed.same_state (res.chain));
  EXPECT_EQ (replayed.holdings (), res.chain.holdings ());
  EXPECT_EQ (replayed.deposit_total (), 100);
}

TEST (Ledger, TraceRoundTrip)
{
  const auto res = run (bo3_scenario (Mode::Offchain));
  const auto text = res.trace.to_jsonl ();
  const auto back = Trace::from_jsonl (text);
  EXPECT_EQ (back.to_jsonl (), text);
  EXPECT_EQ (back.events.size (), res.trace.events.size ());
}
