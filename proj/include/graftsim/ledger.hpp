// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "contract.hpp"
#include "hash.hpp"
#include "witness.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace graftsim
{

struct OutPoint
{
  TxDigest tx;
  std::uint32_t index = 0;

  auto operator<=> (const OutPoint&) const = default;
  bool operator== (const OutPoint&) const = default;
};

/**
 * A concrete transaction.  `required_signers` are the implicit signers (all
 * contract participants), `edge_signers` the AuthBy authorisations.
 */
struct TxInstance
{
  TxDigest digest;
  std::string name;
  std::vector<OutPoint> inputs;
  Height rel_timelock = 0;
  std::set<ParticipantId> required_signers;
  std::set<ParticipantId> edge_signers;
  std::vector<SecretCommitment> required_reveals;
  std::vector<OutputSpec> outputs;

  bool
  is_deposit () const
  {
    return inputs.empty ();
  }

  Amount
  output_total () const
  {
    Amount sum = 0;
    for (const auto& o : outputs)
      sum += o.value;
    return sum;
  }

  bool operator== (const TxInstance&) const = default;
};

/**
 * Digest over the canonical serialisation of the fields that identify a
 * transaction variant: compilation salt, name, inputs, relative timelock
 * and outputs.
 */
inline TxDigest
compute_digest (const TxInstance& tx, const std::string& salt)
{
  Encoder enc;
  enc.str ("graftsim/tx/v1").str (salt).str (tx.name);
  enc.u32 (static_cast<std::uint32_t> (tx.inputs.size ()));
  for (const auto& in : tx.inputs)
    enc.digest (in.tx).u32 (in.index);
  enc.u64 (tx.rel_timelock);
  enc.u32 (static_cast<std::uint32_t> (tx.outputs.size ()));
  for (const auto& o : tx.outputs)
    {
      enc.u64 (static_cast<std::uint64_t> (o.value));
      if (o.beneficiary.has_value ())
        enc.u8 (1).str (o.beneficiary->name);
      else
        enc.u8 (0);
    }
  return enc.finish ();
}

inline TxInstance
seal_digest (TxInstance tx, const std::string& salt)
{
  tx.digest = compute_digest (tx, salt);
  return tx;
}

struct AppendWitness
{
  std::vector<Signature> signatures;
  std::vector<Reveal> reveals;
};

struct AppendError
{
  enum class Kind
  {
    AlreadyAppended,
    MissingInput,
    MissingSignature,
    MissingReveal,
    TimelockNotExpired,
    ValueMismatch,
  };

  Kind kind;
  /** Missing signer, missing secret label, as applicable.  */
  std::string subject;
  /** For TimelockNotExpired: first height at which the tx is valid.  */
  Height needed_height = 0;

  bool operator== (const AppendError&) const = default;
};

inline std::string
to_string (const AppendError::Kind k)
{
  using K = AppendError::Kind;
  switch (k)
    {
    case K::AlreadyAppended: return "AlreadyAppended";
    case K::MissingInput: return "MissingInput";
    case K::MissingSignature: return "MissingSignature";
    case K::MissingReveal: return "MissingReveal";
    case K::TimelockNotExpired: return "TimelockNotExpired";
    case K::ValueMismatch: return "ValueMismatch";
    }
  return "?";
}

inline std::string
to_string (const AppendError& e)
{
  switch (e.kind)
    {
    case AppendError::Kind::MissingSignature:
    case AppendError::Kind::MissingReveal:
      return to_string (e.kind) + "(" + e.subject + ")";
    case AppendError::Kind::TimelockNotExpired:
      return to_string (e.kind) + "(" + std::to_string (e.needed_height) + ")";
    default:
      return to_string (e.kind);
    }
}

/** Reason a transaction is not (yet) appendable regardless of time.  */
struct Blocked
{
  AppendError::Kind reason;
  bool operator== (const Blocked&) const = default;
};

using EnabledAt = std::variant<Height, Blocked>;

/**
 * Simulated single-chain UTxO ledger.  Appends happen at the current height;
 * several appends may share a height.  Deposits are zero-input transactions.
 */
class ChainState
{

public:

  struct Record
  {
    TxInstance tx;
    Height height = 0;
  };

private:

  Amount fee;
  Height currentHeight = 0;
  std::map<TxDigest, Record> appended;
  std::vector<TxDigest> appendOrder;
  std::set<OutPoint> utxos;
  std::map<OutPoint, TxDigest> spentBy;

public:

  explicit ChainState (const Amount f = 0)
    : fee (f)
  {}

  Height
  height () const
  {
    return currentHeight;
  }

  Amount
  fee_per_tx () const
  {
    return fee;
  }

  void
  tick ()
  {
    ++currentHeight;
  }

  std::optional<Height>
  tx_height (const TxDigest& d) const
  {
    const auto it = appended.find (d);
    if (it == appended.end ())
      return std::nullopt;
    return it->second.height;
  }

  const Record*
  record (const TxDigest& d) const
  {
    const auto it = appended.find (d);
    return it == appended.end () ? nullptr : &it->second;
  }

  bool
  is_appended (const TxDigest& d) const
  {
    return appended.count (d) > 0;
  }

  const std::vector<TxDigest>&
  append_order () const
  {
    return appendOrder;
  }

  const std::set<OutPoint>&
  utxo_set () const
  {
    return utxos;
  }

  bool
  is_unspent (const OutPoint& o) const
  {
    return utxos.count (o) > 0;
  }

  std::optional<TxDigest>
  spender (const OutPoint& o) const
  {
    const auto it = spentBy.find (o);
    if (it == spentBy.end ())
      return std::nullopt;
    return it->second;
  }

  std::optional<Amount>
  output_value (const OutPoint& o) const
  {
    const auto* r = record (o.tx);
    if (r == nullptr || o.index >= r->tx.outputs.size ())
      return std::nullopt;
    return r->tx.outputs[o.index].value;
  }

  const OutputSpec*
  output (const OutPoint& o) const
  {
    const auto* r = record (o.tx);
    if (r == nullptr || o.index >= r->tx.outputs.size ())
      return nullptr;
    return &r->tx.outputs[o.index];
  }

  /**
   * Checks the append rules in fixed order (inputs, signatures, reveals,
   * timelock, value) and appends on success.  On failure the state is
   * unchanged and the first violated rule is returned.
   */
  std::optional<AppendError>
  try_append (const TxInstance& tx, const AppendWitness& w)
  {
    if (auto err = check (tx, w))
      return err;

    for (const auto& in : tx.inputs)
      {
        utxos.erase (in);
        spentBy[in] = tx.digest;
      }
    for (std::uint32_t i = 0; i < tx.outputs.size (); ++i)
      utxos.insert (OutPoint{tx.digest, i});
    appended.emplace (tx.digest, Record{tx, currentHeight});
    appendOrder.push_back (tx.digest);
    return std::nullopt;
  }

  std::optional<AppendError>
  check (const TxInstance& tx, const AppendWitness& w) const
  {
    using K = AppendError::Kind;
    if (appended.count (tx.digest) > 0)
      return AppendError{K::AlreadyAppended, tx.name, 0};

    for (const auto& in : tx.inputs)
      if (utxos.count (in) == 0)
        return AppendError{K::MissingInput, "", 0};

    auto hasSig = [&] (const ParticipantId& p, const SigRole role) {
      for (const auto& s : w.signatures)
        if (verify (s, p, tx.digest, role))
          return true;
      return false;
    };
    for (const auto& p : tx.required_signers)
      if (!hasSig (p, SigRole::Implicit))
        return AppendError{K::MissingSignature, p.name, 0};
    for (const auto& p : tx.edge_signers)
      if (!hasSig (p, SigRole::Edge))
        return AppendError{K::MissingSignature, p.name, 0};

    for (const auto& c : tx.required_reveals)
      {
        bool found = false;
        for (const auto& r : w.reveals)
          if (check_reveal (c, r))
            {
              found = true;
              break;
            }
        if (!found)
          return AppendError{K::MissingReveal, c.label, 0};
      }

    Height needed = 0;
    for (const auto& in : tx.inputs)
      needed = std::max (needed, appended.at (in.tx).height + tx.rel_timelock);
    if (currentHeight < needed)
      return AppendError{K::TimelockNotExpired, "", needed};

    if (!tx.is_deposit ())
      {
        Amount inputs = 0;
        for (const auto& in : tx.inputs)
          inputs += *output_value (in);
        if (inputs != tx.output_total () + fee)
          return AppendError{K::ValueMismatch, "", 0};
      }
    for (const auto& o : tx.outputs)
      if (o.value < 0)
        return AppendError{K::ValueMismatch, "", 0};

    return std::nullopt;
  }

  /**
   * First height at which `tx` satisfies its timelock, ignoring witnesses.
   * Blocked if an input is missing or already spent.
   */
  EnabledAt
  enabled_at (const TxInstance& tx) const
  {
    if (appended.count (tx.digest) > 0)
      return Blocked{AppendError::Kind::AlreadyAppended};
    Height at = tx.is_deposit () ? currentHeight : 0;
    for (const auto& in : tx.inputs)
      {
        if (utxos.count (in) == 0)
          return Blocked{AppendError::Kind::MissingInput};
        at = std::max (at, appended.at (in.tx).height + tx.rel_timelock);
      }
    return at;
  }

  /** Sum of the values of all unspent outputs.  */
  Amount
  utxo_total () const
  {
    Amount sum = 0;
    for (const auto& o : utxos)
      sum += *output_value (o);
    return sum;
  }

  std::size_t
  non_deposit_count () const
  {
    std::size_t n = 0;
    for (const auto& d : appendOrder)
      if (!appended.at (d).tx.is_deposit ())
        ++n;
    return n;
  }

  Amount
  deposit_total () const
  {
    Amount sum = 0;
    for (const auto& d : appendOrder)
      {
        const auto& tx = appended.at (d).tx;
        if (tx.is_deposit ())
          sum += tx.output_total ();
      }
    return sum;
  }

  /** Unspent value per beneficiary (contract continuations excluded).  */
  std::map<ParticipantId, Amount>
  holdings () const
  {
    std::map<ParticipantId, Amount> out;
    for (const auto& o : utxos)
      {
        const auto* spec = output (o);
        if (spec->beneficiary.has_value ())
          out[*spec->beneficiary] += spec->value;
      }
    return out;
  }

  bool
  same_state (const ChainState& other) const
  {
    if (currentHeight != other.currentHeight || utxos != other.utxos
          || appendOrder != other.appendOrder)
      return false;
    for (const auto& [d, r] : appended)
      {
        const auto* o = other.record (d);
        if (o == nullptr || o->height != r.height || !(o->tx == r.tx))
          return false;
      }
    return true;
  }
};

} // namespace graftsim
