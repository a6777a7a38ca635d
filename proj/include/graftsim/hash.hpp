// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "types.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>
#include <string_view>

namespace graftsim
{

inline Digest
sha256 (const std::uint8_t* data, std::size_t len)
{
  Digest out;
  unsigned int outLen = 0;
  if (EVP_Digest (data, len, out.bytes.data (), &outLen, EVP_sha256 (),
                  nullptr) != 1
      || outLen != out.bytes.size ())
    throw std::runtime_error ("SHA-256 computation failed");
  return out;
}

inline Digest
sha256 (const Bytes& data)
{
  return sha256 (data.data (), data.size ());
}

/**
 * Canonical serialisation used for every digest in the simulator:
 * integers are fixed-width big-endian, variable-length fields carry a
 * 32-bit big-endian length prefix, fields are written in a fixed order.
 */
class Encoder
{

private:

  Bytes buf;

public:

  Encoder&
  u8 (const std::uint8_t v)
  {
    buf.push_back (v);
    return *this;
  }

  Encoder&
  u32 (const std::uint32_t v)
  {
    for (int shift = 24; shift >= 0; shift -= 8)
      buf.push_back (static_cast<std::uint8_t> (v >> shift));
    return *this;
  }

  Encoder&
  u64 (const std::uint64_t v)
  {
    for (int shift = 56; shift >= 0; shift -= 8)
      buf.push_back (static_cast<std::uint8_t> (v >> shift));
    return *this;
  }

  Encoder&
  bytes (const std::uint8_t* data, const std::size_t len)
  {
    u32 (static_cast<std::uint32_t> (len));
    buf.insert (buf.end (), data, data + len);
    return *this;
  }

  Encoder&
  bytes (const Bytes& data)
  {
    return bytes (data.data (), data.size ());
  }

  Encoder&
  str (const std::string_view s)
  {
    return bytes (reinterpret_cast<const std::uint8_t*> (s.data ()), s.size ());
  }

  /** Digests are fixed-size and written without a length prefix.  */
  Encoder&
  digest (const Digest& d)
  {
    buf.insert (buf.end (), d.bytes.begin (), d.bytes.end ());
    return *this;
  }

  const Bytes&
  data () const
  {
    return buf;
  }

  Digest
  finish () const
  {
    return sha256 (buf);
  }

};

} // namespace graftsim
