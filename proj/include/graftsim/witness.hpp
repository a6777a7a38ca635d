// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "contract.hpp"
#include "hash.hpp"

#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace graftsim
{

/* ************************************************************************** */
/* Signatures.  */

/** Implicit signatures are the all-participant ones exchanged up front;
    edge signatures are run-time authorisations demanded by AuthBy edges.  */
enum class SigRole : std::uint8_t
{
  Implicit = 0,
  Edge = 1,
};

inline const char*
to_string (const SigRole r)
{
  return r == SigRole::Implicit ? "implicit" : "edge";
}

/**
 * Simulated signature: a record of who authorised which exact transaction.
 * There is no key material; unforgeability is enforced by the simulator only
 * ever building witnesses from signatures a participant actually holds.
 */
struct Signature
{
  ParticipantId signer;
  TxDigest digest;
  SigRole role = SigRole::Implicit;

  auto operator<=> (const Signature&) const = default;
  bool operator== (const Signature&) const = default;
};

inline Signature
sign (const ParticipantId& p, const TxDigest& d,
      const SigRole role = SigRole::Implicit)
{
  return Signature{p, d, role};
}

inline bool
verify (const Signature& sig, const TxDigest& d)
{
  return sig.digest == d;
}

inline bool
verify (const Signature& sig, const ParticipantId& p, const TxDigest& d,
        const SigRole role = SigRole::Implicit)
{
  return sig.signer == p && sig.role == role && verify (sig, d);
}

/** One participant's collection of signatures.  Only ever grows.  */
class SignatureStore
{

private:

  std::map<std::pair<TxDigest, SigRole>, std::set<ParticipantId>> sigs;
  std::size_t count = 0;

public:

  void
  record (const Signature& sig)
  {
    if (sigs[{sig.digest, sig.role}].insert (sig.signer).second)
      ++count;
  }

  bool
  holds (const ParticipantId& p, const TxDigest& d,
         const SigRole role = SigRole::Implicit) const
  {
    const auto it = sigs.find ({d, role});
    return it != sigs.end () && it->second.count (p) > 0;
  }

  std::set<ParticipantId>
  signers (const TxDigest& d, const SigRole role = SigRole::Implicit) const
  {
    const auto it = sigs.find ({d, role});
    return it == sigs.end () ? std::set<ParticipantId>{} : it->second;
  }

  std::size_t
  size () const
  {
    return count;
  }

  /** True if every signature in `other` is also here.  */
  bool
  contains (const SignatureStore& other) const
  {
    for (const auto& [key, who] : other.sigs)
      for (const auto& p : who)
        if (!holds (p, key.first, key.second))
          return false;
    return true;
  }

  bool operator== (const SignatureStore&) const = default;
};

inline SignatureStore
record_signature (SignatureStore store, const Signature& sig)
{
  store.record (sig);
  return store;
}

/* ************************************************************************** */
/* Secrets.  */

struct SecretCommitment
{
  std::string label;
  Digest hash;
  /** Empty for the external oracle.  */
  std::optional<ParticipantId> owner;

  bool operator== (const SecretCommitment&) const = default;
};

struct Reveal
{
  std::string label;
  Bytes preimage;

  bool operator== (const Reveal&) const = default;
};

constexpr std::size_t NONCE_BYTES = 16;

inline Bytes
secret_preimage (const std::string& label, const Bytes& nonce)
{
  Bytes out (label.begin (), label.end ());
  out.insert (out.end (), nonce.begin (), nonce.end ());
  return out;
}

inline bool
check_reveal (const SecretCommitment& c, const Reveal& r)
{
  return sha256 (r.preimage) == c.hash;
}

/**
 * Holder of the secret nonces (the oracle, and participants owning secrets).
 * Nonces are drawn from a 64-bit Mersenne Twister seeded with the scenario
 * seed, two big-endian words per secret, in declaration order.
 */
class SecretKeeper
{

private:

  struct Entry
  {
    SecretCommitment commitment;
    Bytes nonce;
  };

  std::map<std::string, Entry> entries;
  std::vector<std::string> order;

public:

  SecretKeeper () = default;

  SecretKeeper (const std::vector<SecretDecl>& decls, const std::uint64_t seed)
  {
    std::mt19937_64 rng (seed);
    std::set<Digest> hashes;
    for (const auto& d : decls)
      {
        Bytes nonce;
        for (int w = 0; w < 2; ++w)
          {
            const std::uint64_t v = rng ();
            for (int shift = 56; shift >= 0; shift -= 8)
              nonce.push_back (static_cast<std::uint8_t> (v >> shift));
          }
        SecretCommitment c{d.label, sha256 (secret_preimage (d.label, nonce)),
                           d.owner};
        if (!hashes.insert (c.hash).second)
          throw std::runtime_error ("secret commitment collision for "
                                    + d.label);
        if (!entries.emplace (d.label, Entry{c, nonce}).second)
          throw std::runtime_error ("duplicate secret " + d.label);
        order.push_back (d.label);
      }
  }

  std::vector<SecretCommitment>
  commitments () const
  {
    std::vector<SecretCommitment> out;
    for (const auto& l : order)
      out.push_back (entries.at (l).commitment);
    return out;
  }

  const SecretCommitment&
  commitment (const std::string& label) const
  {
    const auto it = entries.find (label);
    if (it == entries.end ())
      throw std::out_of_range ("unknown secret " + label);
    return it->second.commitment;
  }

  bool
  knows (const std::string& label) const
  {
    return entries.count (label) > 0;
  }

  Reveal
  reveal (const std::string& label) const
  {
    const auto& e = entries.at (label);
    return Reveal{label, secret_preimage (label, e.nonce)};
  }
};

} // namespace graftsim
