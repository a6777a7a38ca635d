// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "contract.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace graftsim
{

/** Raised for unreadable or malformed input documents.  */
class ParseError : public std::runtime_error
{

public:

  /** 1-based position, zero if not applicable (schema errors).  */
  std::size_t line = 0;
  std::size_t column = 0;

  explicit ParseError (const std::string& msg)
    : std::runtime_error (msg)
  {}

  ParseError (const std::string& msg, const std::size_t l, const std::size_t c)
    : std::runtime_error (msg + " at line " + std::to_string (l)
                            + ", column " + std::to_string (c)),
      line (l), column (c)
  {}

};

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline std::string
read_file (const std::string& path)
{
  std::ifstream in (path, std::ios::binary);
  if (!in)
    throw IoError ("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf ();
  return buf.str ();
}

/** Parses JSON (with comments) and maps syntax errors to line/column.  */
inline nlohmann::json
parse_document (const std::string& text)
{
  try
    {
      return nlohmann::json::parse (text, nullptr, true, true);
    }
  catch (const nlohmann::json::parse_error& e)
    {
      std::size_t line = 1, col = 1;
      const std::size_t end = std::min<std::size_t> (e.byte == 0 ? 0 : e.byte - 1,
                                                     text.size ());
      for (std::size_t i = 0; i < end; ++i)
        {
          if (text[i] == '\n')
            {
              ++line;
              col = 1;
            }
          else
            ++col;
        }
      std::string what = e.what ();
      const auto pos = what.find ("syntax error");
      throw ParseError (pos == std::string::npos ? what : what.substr (pos),
                        line, col);
    }
}

namespace detail
{

template <typename T>
T
field (const nlohmann::json& obj, const char* key, const std::string& where)
{
  if (!obj.is_object () || !obj.contains (key))
    throw ParseError (where + ": missing field '" + key + "'");
  try
    {
      return obj.at (key).get<T> ();
    }
  catch (const nlohmann::json::exception&)
    {
      throw ParseError (where + ": field '" + key + "' has the wrong type");
    }
}

inline EdgeRequirement
parse_requirement (const nlohmann::json& j, const std::string& where)
{
  if (!j.is_object () || j.size () != 1)
    throw ParseError (where + ": edge requirement must be a one-key object");
  if (j.contains ("auth"))
    {
      AuthBy a;
      for (const auto& s : field<std::vector<std::string>> (j, "auth", where))
        a.signers.insert (ParticipantId (s));
      return a;
    }
  if (j.contains ("reveal"))
    return RevealOf{field<std::string> (j, "reveal", where)};
  if (j.contains ("after"))
    {
      const auto v = field<std::int64_t> (j, "after", where);
      if (v < 0)
        throw ParseError (where + ": 'after' must be nonnegative");
      return After{static_cast<Height> (v)};
    }
  throw ParseError (where + ": unknown edge requirement " + j.dump ());
}

struct RawNode
{
  NodeTemplate node;
  std::vector<std::string> childRefs;
};

/* Flattens inline child objects; string children are references by name.  */
inline void
flatten_node (const nlohmann::json& j, std::vector<RawNode>& out)
{
  const std::string where = "node '"
      + (j.is_object () && j.contains ("name") && j["name"].is_string ()
           ? j["name"].get<std::string> () : std::string ("?"))
      + "'";
  RawNode raw;
  raw.node.id = NodeId{static_cast<std::uint32_t> (out.size ())};
  raw.node.name = field<std::string> (j, "name", where);
  if (j.contains ("edge"))
    for (const auto& e : j.at ("edge"))
      raw.node.edge.push_back (parse_requirement (e, where));
  if (j.contains ("outputs"))
    for (const auto& o : j.at ("outputs"))
      {
        const auto to = field<std::string> (o, "to", where);
        const auto w = field<std::int64_t> (o, "share", where);
        if (w < 0)
          throw ParseError (where + ": negative payout share");
        raw.node.payout.push_back (
            PayoutShare{ParticipantId (to), static_cast<std::uint64_t> (w)});
      }

  const std::size_t self = out.size ();
  out.push_back (std::move (raw));
  if (j.contains ("children"))
    for (const auto& c : j.at ("children"))
      {
        if (c.is_string ())
          out[self].childRefs.push_back (c.get<std::string> ());
        else
          {
            out[self].childRefs.push_back (field<std::string> (c, "name", where));
            flatten_node (c, out);
          }
      }
}

} // namespace detail

/**
 * Builds a contract from a parsed document.  The result is NOT validated;
 * callers run validate_tree.  Node ids follow document order; a valid tree
 * can be renumbered with canonicalize.
 */
inline ContractTree
contract_from_json (const nlohmann::json& doc)
{
  using detail::field;
  if (!doc.is_object ())
    throw ParseError ("contract document must be an object");

  ContractTree tree;
  for (const auto& p : field<std::vector<std::string>> (doc, "participants",
                                                        "contract"))
    tree.participants.emplace_back (p);
  for (const auto& [p, v] : field<std::map<std::string, std::int64_t>> (
           doc, "deposits", "contract"))
    tree.deposits[ParticipantId (p)] = v;
  tree.fee = doc.value ("fee", std::int64_t{0});
  if (doc.contains ("secrets"))
    for (const auto& s : doc.at ("secrets"))
      {
        SecretDecl decl;
        decl.label = field<std::string> (s, "label", "secret");
        const auto owner = s.value ("owner", std::string ("oracle"));
        if (owner != "oracle")
          decl.owner = ParticipantId (owner);
        tree.secrets.push_back (std::move (decl));
      }

  std::vector<detail::RawNode> raw;
  const auto& nodes = doc.contains ("nodes") ? doc.at ("nodes")
                                             : nlohmann::json::array ();
  if (!nodes.is_array () || nodes.empty ())
    throw ParseError ("contract: 'nodes' must be a nonempty array");
  for (const auto& n : nodes)
    detail::flatten_node (n, raw);

  std::map<std::string, NodeId> byName;
  for (const auto& r : raw)
    byName.emplace (r.node.name, r.node.id);
  for (auto& r : raw)
    {
      for (const auto& ref : r.childRefs)
        {
          const auto it = byName.find (ref);
          if (it == byName.end ())
            throw ParseError ("node '" + r.node.name
                              + "': unknown child '" + ref + "'");
          r.node.children.push_back (it->second);
        }
      tree.nodes.push_back (std::move (r.node));
    }

  if (doc.contains ("root"))
    {
      const auto name = field<std::string> (doc, "root", "contract");
      const auto it = byName.find (name);
      if (it == byName.end ())
        throw ParseError ("contract: unknown root '" + name + "'");
      tree.root = it->second;
    }
  else
    tree.root = NodeId{0};
  return tree;
}

inline ContractTree
parse_contract (const std::string& text)
{
  return contract_from_json (parse_document (text));
}

inline ContractTree
load_contract (const std::string& path)
{
  return parse_contract (read_file (path));
}

/** Serialises a tree as a nested document (inline children).  */
inline nlohmann::ordered_json
contract_to_json (const ContractTree& tree)
{
  using nlohmann::ordered_json;
  ordered_json doc;
  ordered_json parts = ordered_json::array ();
  for (const auto& p : tree.participants)
    parts.push_back (p.name);
  doc["participants"] = parts;
  ordered_json deps = ordered_json::object ();
  for (const auto& [p, v] : tree.deposits)
    deps[p.name] = v;
  doc["deposits"] = deps;
  doc["fee"] = tree.fee;
  ordered_json secrets = ordered_json::array ();
  for (const auto& s : tree.secrets)
    secrets.push_back ({{"label", s.label},
                        {"owner", s.owner ? s.owner->name : "oracle"}});
  doc["secrets"] = secrets;

  const std::function<ordered_json (NodeId)> node = [&] (const NodeId id) {
    const auto& n = tree.at (id);
    ordered_json j;
    j["name"] = n.name;
    ordered_json edge = ordered_json::array ();
    for (const auto& req : n.edge)
      std::visit ([&edge] (const auto& r) {
          using T = std::decay_t<decltype (r)>;
          if constexpr (std::is_same_v<T, AuthBy>)
            {
              ordered_json s = ordered_json::array ();
              for (const auto& p : r.signers)
                s.push_back (p.name);
              edge.push_back ({{"auth", s}});
            }
          else if constexpr (std::is_same_v<T, RevealOf>)
            edge.push_back ({{"reveal", r.label}});
          else
            edge.push_back ({{"after", r.delay}});
        }, req);
    j["edge"] = edge;
    if (!n.payout.empty ())
      {
        ordered_json outs = ordered_json::array ();
        for (const auto& s : n.payout)
          outs.push_back ({{"to", s.to.name}, {"share", s.weight}});
        j["outputs"] = outs;
      }
    if (!n.children.empty ())
      {
        ordered_json ch = ordered_json::array ();
        for (const auto c : n.children)
          ch.push_back (node (c));
        j["children"] = ch;
      }
    return j;
  };
  doc["nodes"] = ordered_json::array ({node (tree.root)});
  return doc;
}

} // namespace graftsim
