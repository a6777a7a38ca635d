// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "bo3_contract.hpp"

#include <graftsim/graftsim.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace graftsim;

namespace
{

enum Exit
{
  EXIT_OK = 0,
  EXIT_INVALID = 1,
  EXIT_IO = 2,
  EXIT_HEIGHT_CAP = 3,
};

void
write_file (const std::string& path, const std::string& data)
{
  std::ofstream out (path, std::ios::binary);
  if (!out)
    throw IoError ("cannot write " + path);
  out << data;
  if (!out)
    throw IoError ("write to " + path + " failed");
}

int
cmd_validate (const std::string& path)
{
  ContractTree tree;
  try
    {
      tree = load_contract (path);
    }
  catch (const IoError& e)
    {
      std::cerr << "error: " << e.what () << '\n';
      return EXIT_IO;
    }
  catch (const ParseError& e)
    {
      std::cerr << path << ": " << e.what () << '\n';
      return EXIT_IO;
    }

  const auto errors = validate_tree (tree);
  for (const auto& e : errors)
    std::cout << path << ": " << to_string (e) << '\n';
  if (!errors.empty ())
    return EXIT_INVALID;

  std::cout << path << ": ok (" << tree.nodes.size () << " nodes, "
            << tree.leaves ().size () << " leaves, height "
            << subtree_height (tree, tree.root) << ")\n";
  return EXIT_OK;
}

int
cmd_run (const std::string& path, const std::string& tracePath,
         const std::string& reportPath, const std::optional<std::uint64_t> seed)
{
  Scenario sc;
  try
    {
      sc = load_scenario (path);
    }
  catch (const IoError& e)
    {
      std::cerr << "error: " << e.what () << '\n';
      return EXIT_IO;
    }
  catch (const ParseError& e)
    {
      std::cerr << path << ": " << e.what () << '\n';
      return EXIT_IO;
    }
  if (seed)
    sc.seed = *seed;
  if (sc.name.empty ())
    sc.name = std::filesystem::path (path).stem ().string ();

  RunResult res;
  try
    {
      res = run (sc);
    }
  catch (const ScenarioError& e)
    {
      std::cerr << path << ": " << e.what () << '\n';
      return EXIT_INVALID;
    }

  try
    {
      if (!tracePath.empty ())
        write_file (tracePath, res.trace.to_jsonl ());
      const auto report = report_to_json (res.report).dump (2) + "\n";
      if (!reportPath.empty ())
        write_file (reportPath, report);
      else
        std::cout << report;
    }
  catch (const IoError& e)
    {
      std::cerr << "error: " << e.what () << '\n';
      return EXIT_IO;
    }

  if (!res.report.terminated ())
    {
      std::cerr << path << ": height cap reached without termination\n";
      return EXIT_HEIGHT_CAP;
    }
  return EXIT_OK;
}

int
cmd_compare (const std::string& offPath, const std::string& onPath)
{
  Scenario off, on;
  try
    {
      off = load_scenario (offPath);
      on = load_scenario (onPath);
    }
  catch (const IoError& e)
    {
      std::cerr << "error: " << e.what () << '\n';
      return EXIT_IO;
    }
  catch (const ParseError& e)
    {
      std::cerr << "error: " << e.what () << '\n';
      return EXIT_IO;
    }
  if (off.name.empty ())
    off.name = std::filesystem::path (offPath).stem ().string ();

  try
    {
      std::cout << report_to_json (compare (off, on)).dump (2) << '\n';
    }
  catch (const IncomparableScenarios& e)
    {
      std::cerr << "incomparable: " << e.what () << '\n';
      return EXIT_INVALID;
    }
  catch (const ScenarioError& e)
    {
      std::cerr << "error: " << e.what () << '\n';
      return EXIT_INVALID;
    }
  return EXIT_OK;
}

/** The bundled best-of-three run: L1, W2, L3 revealed one block apart.  */
Scenario
demo_scenario (const Mode mode)
{
  Scenario sc;
  sc.name = mode == Mode::Offchain ? "demo-offchain" : "demo-onchain";
  sc.contract = parse_contract (bundled::BO3_CONTRACT);
  sc.mode = mode;
  sc.oracle = {{1, "L1"}, {2, "W2"}, {3, "L3"}};
  return sc;
}

std::vector<std::string>
appended_lines (const Trace& trace)
{
  std::vector<std::string> out;
  for (const auto& e : trace.events)
    if (e.kind == EventKind::AppendTx && e.payload.at ("outcome") == "ok"
          && !e.payload.at ("tx").at ("inputs").empty ())
      {
        std::ostringstream line;
        line << "h=" << e.height << ' '
             << e.payload.at ("tx").at ("name").get<std::string> ();
        out.push_back (line.str ());
      }
  return out;
}

int
cmd_demo ()
{
  const auto off = run (demo_scenario (Mode::Offchain));
  const auto on = run (demo_scenario (Mode::Onchain));
  const auto a = appended_lines (off.trace);
  const auto b = appended_lines (on.trace);

  constexpr int W = 24;
  std::cout << std::left;
  std::cout.width (W);
  std::cout << "off-chain" << "on-chain\n";
  for (std::size_t i = 0; i < std::max (a.size (), b.size ()); ++i)
    {
      std::cout.width (W);
      std::cout << (i < a.size () ? a[i] : "") << (i < b.size () ? b[i] : "")
                << '\n';
    }

  auto summary = [] (const Report& r) {
    std::ostringstream s;
    s << r.onchain_tx_count << " txs, leaf " << r.leaf;
    return s.str ();
  };
  std::cout.width (W);
  std::cout << summary (off.report) << summary (on.report) << '\n';
  std::cout.width (W);
  std::cout << ("fees " + std::to_string (off.report.fees_paid))
            << ("fees " + std::to_string (on.report.fees_paid)) << '\n';
  std::cout.width (W);
  std::cout << ("signatures " + std::to_string (off.report.message_count))
            << ("signatures " + std::to_string (on.report.message_count)) << '\n';
  return EXIT_OK;
}

} // anonymous namespace

int
main (int argc, char** argv)
{
  CLI::App app{"Simulator for off-chain execution of Bitcoin contract trees"};
  app.require_subcommand (1);

  std::string validatePath;
  auto* validate = app.add_subcommand ("validate", "Check a contract file");
  validate->add_option ("file", validatePath, "Contract file")->required ();

  std::string runPath, tracePath, reportPath;
  std::optional<std::uint64_t> seed;
  auto* runCmd = app.add_subcommand ("run", "Run a scenario");
  runCmd->add_option ("scenario", runPath, "Scenario file")->required ();
  runCmd->add_option ("--trace", tracePath, "Write the trace (JSON lines)");
  runCmd->add_option ("--report", reportPath, "Write the report (JSON)");
  runCmd->add_option ("--seed", seed, "Override the scenario seed");

  std::string offPath, onPath;
  auto* cmp = app.add_subcommand ("compare", "Compare a run with its on-chain baseline");
  cmp->add_option ("off", offPath, "Off-chain scenario")->required ();
  cmp->add_option ("on", onPath, "On-chain baseline scenario")->required ();

  auto* demo = app.add_subcommand ("demo", "Run the bundled best-of-three example in both modes");

  try
    {
      app.parse (argc, argv);
    }
  catch (const CLI::ParseError& e)
    {
      const int rc = app.exit (e);
      return rc == 0 ? EXIT_OK : EXIT_IO;
    }

  try
    {
      if (validate->parsed ())
        return cmd_validate (validatePath);
      if (runCmd->parsed ())
        return cmd_run (runPath, tracePath, reportPath, seed);
      if (cmp->parsed ())
        return cmd_compare (offPath, onPath);
      if (demo->parsed ())
        return cmd_demo ();
    }
  catch (const std::exception& e)
    {
      std::cerr << "error: " << e.what () << '\n';
      return EXIT_IO;
    }
  return EXIT_OK;
}
