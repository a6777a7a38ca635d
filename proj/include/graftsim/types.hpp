// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace graftsim
{

/** Block height (and relative block counts). */
using Height = std::uint64_t;

/** Satoshi-like integer value units. Signed so that fee underflow is detectable. */
using Amount = std::int64_t;

using Bytes = std::vector<std::uint8_t>;

struct ParticipantId
{
  std::string name;

  ParticipantId () = default;
  ParticipantId (std::string n) : name (std::move (n)) {}
  ParticipantId (const char* n) : name (n) {}

  auto operator<=> (const ParticipantId&) const = default;
  bool operator== (const ParticipantId&) const = default;
};

inline std::ostream&
operator<< (std::ostream& os, const ParticipantId& p)
{
  return os << p.name;
}

/** Dense preorder index of a node inside its ContractTree. */
struct NodeId
{
  std::uint32_t value = 0;

  auto operator<=> (const NodeId&) const = default;
  bool operator== (const NodeId&) const = default;
};

inline std::ostream&
operator<< (std::ostream& os, const NodeId& n)
{
  return os << '#' << n.value;
}

/** 32-byte digest (SHA-256 output). */
struct Digest
{
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=> (const Digest&) const = default;
  bool operator== (const Digest&) const = default;

  std::string
  hex () const
  {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve (64);
    for (const auto b : bytes)
      {
        out.push_back (digits[b >> 4]);
        out.push_back (digits[b & 0xf]);
      }
    return out;
  }

  std::string
  short_hex () const
  {
    return hex ().substr (0, 12);
  }
};

using TxDigest = Digest;

inline Bytes
from_hex (std::string_view hex)
{
  auto nibble = [] (char c) -> int {
    if (c >= '0' && c <= '9')
      return c - '0';
    if (c >= 'a' && c <= 'f')
      return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
      return c - 'A' + 10;
    throw std::invalid_argument ("invalid hex character");
  };
  if (hex.size () % 2 != 0)
    throw std::invalid_argument ("odd-length hex string");
  Bytes out;
  out.reserve (hex.size () / 2);
  for (std::size_t i = 0; i < hex.size (); i += 2)
    out.push_back (static_cast<std::uint8_t> (nibble (hex[i]) << 4
                                              | nibble (hex[i + 1])));
  return out;
}

inline std::string
to_hex (const Bytes& data)
{
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve (data.size () * 2);
  for (const auto b : data)
    {
      out.push_back (digits[b >> 4]);
      out.push_back (digits[b & 0xf]);
    }
  return out;
}

inline Digest
digest_from_hex (std::string_view hex)
{
  const auto raw = from_hex (hex);
  if (raw.size () != 32)
    throw std::invalid_argument ("digest must be 32 bytes");
  Digest d;
  std::copy (raw.begin (), raw.end (), d.bytes.begin ());
  return d;
}

} // namespace graftsim

template <>
struct std::hash<graftsim::Digest>
{
  std::size_t
  operator() (const graftsim::Digest& d) const noexcept
  {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i)
      h = (h << 8) | d.bytes[i];
    return h;
  }
};
