// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

/* Shared fixtures for the test binaries: bundled files, tree builders,
   a random tree generator and independent reference computations.  */

#include <graftsim/graftsim.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace graftsim::testing
{

inline std::string
source_path (const std::string& rel)
{
  return std::string (GRAFTSIM_SOURCE_DIR) + "/" + rel;
}

inline ContractTree
bo3 ()
{
  return load_contract (source_path ("contracts/bo3.contract"));
}

inline ContractTree
three_party ()
{
  return load_contract (source_path ("contracts/three_party.contract"));
}

inline NodeId
id_of (const ContractTree& t, const std::string& name)
{
  return t.by_name (name).id;
}

/** Node ids for a list of names.  */
inline std::vector<NodeId>
ids_of (const ContractTree& t, const std::vector<std::string>& names)
{
  std::vector<NodeId> out;
  for (const auto& n : names)
    out.push_back (id_of (t, n));
  return out;
}

/** The match outcomes of the worked example: L1, W2, L3.  */
inline std::vector<ScheduledReveal>
lwl_schedule ()
{
  return {{1, "L1"}, {2, "W2"}, {3, "L3"}};
}

inline Scenario
bo3_scenario (const Mode mode, const Height t = 1)
{
  Scenario sc;
  sc.name = "bo3";
  sc.contract = bo3 ();
  sc.mode = mode;
  sc.t = t;
  sc.oracle = lwl_schedule ();
  return sc;
}

/* ************************************************************************** */
/* Tree builders.  */

/** Adds a node and returns its id; ids are assigned densely.  */
inline NodeId
add_node (ContractTree& t, const std::string& name,
          std::vector<EdgeRequirement> edge = {},
          std::vector<PayoutShare> payout = {})
{
  NodeTemplate n;
  n.id = NodeId{static_cast<std::uint32_t> (t.nodes.size ())};
  n.name = name;
  n.edge = std::move (edge);
  n.payout = std::move (payout);
  t.nodes.push_back (std::move (n));
  return t.nodes.back ().id;
}

inline void
link (ContractTree& t, const NodeId parent, const NodeId child)
{
  t.nodes[parent.value].children.push_back (child);
}

inline ContractTree
skeleton (const std::vector<std::string>& parts, const Amount deposit,
          const Amount fee)
{
  ContractTree t;
  for (const auto& p : parts)
    {
      t.participants.emplace_back (p);
      t.deposits[ParticipantId (p)] = deposit;
    }
  t.fee = fee;
  t.root = NodeId{0};
  return t;
}

/** N0 -> N1 -> ... -> N(n-1), no edge requirements, last node pays A.  */
inline ContractTree
chain_tree (const std::size_t n, const std::vector<std::string>& parts = {"A", "B"})
{
  auto t = skeleton (parts, 100, 1);
  NodeId prev;
  for (std::size_t i = 0; i < n; ++i)
    {
      const auto id = add_node (t, "N" + std::to_string (i));
      if (i > 0)
        link (t, prev, id);
      prev = id;
    }
  t.nodes.back ().payout = {{ParticipantId (parts.front ()), 1}};
  return canonicalize (t);
}

/** Complete binary tree with `levels` levels (2^levels - 1 nodes).  */
inline ContractTree
binary_tree (const std::size_t levels,
             const std::vector<std::string>& parts = {"A", "B"})
{
  auto t = skeleton (parts, 1000, 1);
  std::function<NodeId (std::size_t, const std::string&)> build
      = [&] (const std::size_t level, const std::string& name) {
          const auto id = add_node (t, name);
          if (level + 1 < levels)
            {
              const auto l = build (level + 1, name + "0");
              const auto r = build (level + 1, name + "1");
              link (t, id, l);
              link (t, id, r);
            }
          else
            t.nodes[id.value].payout = {{ParticipantId (parts.front ()), 1}};
          return id;
        };
  build (0, "B");
  return canonicalize (t);
}

/* ************************************************************************** */
/* Random trees.  */

struct RandomCase
{
  ContractTree tree;
  std::vector<ScheduledReveal> oracle;
};

/**
 * Random valid contract with up to `maxNodes` nodes and 2..`maxParts`
 * participants.  Every inner node keeps at least one child that needs no
 * authorisation, so an honest participant can always make progress.
 */
inline RandomCase
random_case (const std::uint64_t seed, const std::size_t maxNodes = 12,
             const std::size_t maxParts = 3)
{
  std::mt19937_64 rng (seed);
  auto uni = [&rng] (const std::size_t lo, const std::size_t hi) {
    return std::uniform_int_distribution<std::size_t> (lo, hi) (rng);
  };

  static const std::vector<std::string> names{"A", "B", "C"};
  const std::size_t np = uni (2, maxParts);
  std::vector<std::string> parts (names.begin (), names.begin () + np);
  auto t = skeleton (parts, 0, 1);
  for (const auto& p : parts)
    t.deposits[ParticipantId (p)] = static_cast<Amount> (uni (10, 40));

  const std::size_t n = uni (1, maxNodes);
  std::vector<std::size_t> parent (n, 0);
  add_node (t, "R");
  for (std::size_t i = 1; i < n; ++i)
    {
      parent[i] = uni (0, i - 1);
      add_node (t, "N" + std::to_string (i));
      link (t, NodeId{static_cast<std::uint32_t> (parent[i])},
            NodeId{static_cast<std::uint32_t> (i)});
    }

  RandomCase rc;
  std::size_t secrets = 0;
  for (std::size_t i = 1; i < n; ++i)
    {
      auto& node = t.nodes[i];
      const auto& siblings = t.nodes[parent[i]].children;
      const bool firstChild = siblings.front ().value == i;
      const auto roll = uni (0, 9);
      if (roll < 4)
        {
          const auto label = "S" + std::to_string (secrets++);
          SecretDecl d;
          d.label = label;
          if (uni (0, 3) == 0)
            d.owner = ParticipantId (parts[uni (0, np - 1)]);
          t.secrets.push_back (d);
          node.edge.push_back (RevealOf{label});
          rc.oracle.push_back ({static_cast<Height> (uni (0, 6)), label});
        }
      else if (roll < 6)
        node.edge.push_back (After{static_cast<Height> (uni (1, 3))});
      else if (roll < 8 && !firstChild)
        {
          AuthBy a;
          for (const auto& p : parts)
            if (uni (0, 1) == 1)
              a.signers.insert (ParticipantId (p));
          if (a.signers.empty ())
            a.signers.insert (ParticipantId (parts.front ()));
          node.edge.push_back (a);
        }
    }
  for (auto& node : t.nodes)
    if (node.children.empty ())
      for (const auto& p : parts)
        if (uni (0, 1) == 1 || node.payout.empty ())
          node.payout.push_back ({ParticipantId (p), uni (1, 3)});

  std::sort (rc.oracle.begin (), rc.oracle.end (),
             [] (const auto& a, const auto& b) {
               return std::tie (a.height, a.label) < std::tie (b.height, b.label);
             });
  rc.tree = canonicalize (t);
  return rc;
}

/* ************************************************************************** */
/* Reference computations, written independently of the library.  */

/** Height in edges, by plain recursion.  */
inline Height
ref_height (const ContractTree& t, const NodeId id)
{
  Height h = 0;
  for (const auto c : t.at (id).children)
    h = std::max (h, 1 + ref_height (t, c));
  return h;
}

inline std::size_t
ref_size (const ContractTree& t, const NodeId id)
{
  std::size_t s = 1;
  for (const auto c : t.at (id).children)
    s += ref_size (t, c);
  return s;
}

/** Depth of `id` counted in nodes from the root, by walking parents.  */
inline std::size_t
ref_depth_nodes (const ContractTree& t, const NodeId id)
{
  std::size_t d = 1;
  for (auto cur = id; cur != t.root;)
    {
      for (const auto& n : t.nodes)
        if (std::find (n.children.begin (), n.children.end (), cur)
              != n.children.end ())
          {
            cur = n.id;
            break;
          }
      ++d;
    }
  return d;
}

/**
 * Signature messages of a chain of n nodes run fully off-chain by p
 * participants: stipulation covers Head, Init and n shadow copies, and the
 * graft for chain node k (k = 1..n-1) copies the n - k nodes below it.
 */
inline std::size_t
ref_chain_census (const std::size_t n, const std::size_t p)
{
  std::size_t per = n + 2;
  for (std::size_t k = 1; k < n; ++k)
    per += n - k;
  return p * (p - 1) * per;
}

/**
 * Least-squares fit of y = c * x^k (absolute residuals).  For fixed k the
 * best c is closed-form; k is found by golden-section search.
 */
inline double
fit_power_exponent (const std::vector<double>& x, const std::vector<double>& y)
{
  auto sse = [&] (const double k) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size (); ++i)
      {
        num += y[i] * std::pow (x[i], k);
        den += std::pow (x[i], 2 * k);
      }
    const double c = num / den;
    double s = 0;
    for (std::size_t i = 0; i < x.size (); ++i)
      s += std::pow (y[i] - c * std::pow (x[i], k), 2);
    return s;
  };
  double lo = 0.0, hi = 4.0;
  const double g = (std::sqrt (5.0) - 1) / 2;
  for (int i = 0; i < 200; ++i)
    {
      const double a = hi - g * (hi - lo);
      const double b = lo + g * (hi - lo);
      if (sse (a) < sse (b))
        hi = b;
      else
        lo = a;
    }
  return (lo + hi) / 2;
}

/** Every permutation of the participants, lexicographic first.  */
inline std::vector<std::vector<ParticipantId>>
orderings (std::vector<ParticipantId> parts)
{
  std::sort (parts.begin (), parts.end ());
  std::vector<std::vector<ParticipantId>> out;
  do
    out.push_back (parts);
  while (std::next_permutation (parts.begin (), parts.end ()));
  return out;
}

/** Adversarial strategy configurations for a contract of height h.  */
inline std::vector<StrategySpec>
adversaries (const Height h)
{
  std::vector<StrategySpec> out;
  for (std::size_t k = 0; k <= h; ++k)
    {
      out.push_back (strategy::Staller{k});
      out.push_back (strategy::SilentAborter{k});
      out.push_back (strategy::PrematureInit{k});
      out.push_back (strategy::RollbackAttacker{k});
    }
  out.push_back (strategy::PrematureInit{std::nullopt});
  out.push_back (strategy::RollbackAttacker{std::nullopt});
  return out;
}

/** Honest participants that consent to every guarded step.  */
inline strategy::Honest
agreeable (const ContractTree& t)
{
  strategy::Honest h;
  for (const auto& n : t.nodes)
    h.consent.insert (n.name);
  return h;
}

} // namespace graftsim::testing
