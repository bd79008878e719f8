// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// fusedflow: evaluate, search and cross-check fused-layer mappings.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fusedflow/check.hpp"
#include "fusedflow/fuzz.hpp"
#include "fusedflow/mapper.hpp"

using namespace fusedflow;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kInfeasible = 2;
constexpr int kMismatch = 3;

/// Error tied to an input file; reported as `<path>: <message>`.
struct FileError : Error {
  FileError(const std::string& path, const std::string& what) : Error(path + ": " + what) {}
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
auto load(const std::string& path, F parse) {
  const auto text = read_file(path);
  try {
    return parse(text);
  } catch (const Error& e) {
    throw FileError(path, e.what());
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError(path, "cannot write file");
  out << text;
  spdlog::info("wrote {}", path);
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("fusedflow");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("FUSEDFLOW_LOG")) {
    auto lvl = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept real names.
    if (lvl != spdlog::level::off || std::string(env) == "off") spdlog::set_level(lvl);
    else spdlog::warn("ignoring FUSEDFLOW_LOG={}", env);
  }
}

struct Inputs {
  std::string workload;
  std::string arch;
  std::string mapping;
  std::string mapspace;
  std::string out;
  Count op_limit = 10'000'000;
  std::uint64_t seed = 1;
  int jobs = 0;
};

struct Loaded {
  workload::FusionSet w;
  Architecture a;
  mapping::Mapping m;
};

Loaded load_mapping_inputs(const Inputs& in) {
  auto w = load(in.workload, [](const std::string& t) { return workload::parse_workload(t); });
  auto a = load(in.arch, [](const std::string& t) { return parse_architecture(t); });
  auto m = load(in.mapping, [](const std::string& t) { return mapping::parse_mapping(t); });
  auto problems = mapping::validate_mapping(m, w, a);
  if (!problems.empty()) {
    std::string msg = "invalid mapping";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw FileError(in.mapping, msg);
  }
  return {std::move(w), std::move(a), std::move(m)};
}

int cmd_evaluate(const Inputs& in) {
  auto [w, a, m] = load_mapping_inputs(in);
  auto mt = metrics::evaluate(w, m, a);
  write_output(in.out, metrics::report_json(mt, w, a) + "\n");
  if (!mt.feasible) {
    for (const auto& v : mt.capacity_violations) spdlog::error("infeasible: {}", v);
    return kInfeasible;
  }
  return kOk;
}

std::string text_report(const Loaded& l, const analysis::Evaluation& ev, const metrics::Metrics& mt) {
  const auto& [w, a, m] = l;
  std::ostringstream os;
  os << "fusion set:";
  for (const auto& e : w.einsums()) os << ' ' << e.name;
  os << "\nschedule: " << mapper::schedule_label(m) << " (" << mapper::partitions_label(m) << "), "
     << mapping::to_string(m.parallelism) << ", " << ev.tiles.iterations.size() << " iterations, "
     << ev.classes.size() << " tile classes\n";
  os << "feasible: " << (mt.feasible ? "yes" : "no") << "\n";
  os << "latency: " << mt.latency_cycles << " cycles (compute " << mt.compute_cycles << ")\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", metrics::round_pj(mt.energy.total_pj));
  os << "energy: " << buf << " pJ\n";
  for (const auto& [k, v] : mt.energy.breakdown) {
    std::snprintf(buf, sizeof buf, "%.3f", metrics::round_pj(v));
    os << "  " << k << ": " << buf << "\n";
  }
  os << "off-chip words: " << mt.offchip_words << "\n";
  os << "recompute ops:";
  for (std::size_t k = 0; k < w.size(); ++k) os << ' ' << w.einsum(k).name << '=' << mt.recompute_ops[k];
  os << "\n";
  for (std::size_t l = 1; l < a.levels.size(); ++l) {
    os << "occupancy " << a.levels[l].name << ": " << mt.occupancy.per_level[l];
    if (a.levels[l].capacity) os << " / " << *a.levels[l].capacity;
    os << "\n";
    for (const auto& [t, v] : mt.occupancy.per_tensor[l]) os << "  " << t << ": " << v << "\n";
  }
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    os << "counts " << a.levels[l].name << " (hops " << mt.counts.hops[l] << ")\n";
    for (const auto& [t, c] : mt.counts.levels[l]) {
      os << "  " << t << ": fills " << c.fills << ", reads " << c.reads << ", updates " << c.updates << "\n";
    }
  }
  return os.str();
}

int cmd_report(const Inputs& in) {
  auto l = load_mapping_inputs(in);
  auto ev = analysis::analyze(l.w, l.m, l.a);
  auto mt = metrics::compute_metrics(ev, l.w, l.m, l.a);
  write_output(in.out, text_report(l, ev, mt));
  return mt.feasible ? kOk : kInfeasible;
}

int cmd_search(const Inputs& in, const std::vector<std::string>& objective_names, bool all_rows) {
  auto w = load(in.workload, [](const std::string& t) { return workload::parse_workload(t); });
  auto a = load(in.arch, [](const std::string& t) { return parse_architecture(t); });
  auto spec = load(in.mapspace, [](const std::string& t) { return mapper::parse_mapspace(t); });
  std::vector<mapper::Objective> objectives;
  for (const auto& o : objective_names) objectives.push_back(mapper::parse_objective(o));

  auto mappings = mapper::enumerate_mapspace(spec, w, a);
  if (mappings.empty()) throw FileError(in.mapspace, "empty mapspace");
  spdlog::info("evaluating {} mappings", mappings.size());
  auto results = mapper::evaluate_all(w, a, mappings, in.jobs);

  std::vector<mapper::CsvRow> rows;
  if (all_rows) {
    for (const auto& r : results) rows.push_back(mapper::make_row("search", mapper::schedule_label(r.mapping), r, a));
  } else {
    for (std::size_t i : mapper::pareto_front(results, objectives)) {
      rows.push_back(mapper::make_row("search", mapper::schedule_label(results[i].mapping), results[i], a));
    }
  }
  spdlog::info("{} rows", rows.size());
  write_output(in.out, mapper::csv_header() + mapper::csv_rows(rows));
  return kOk;
}

int cmd_case_study(const Inputs& in, const std::string& name, const std::vector<std::string>& shape_args) {
  std::map<std::string, Coord> shapes;
  for (const auto& s : shape_args) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("--shape expects KEY=VALUE, got \"" + s + "\"");
    try {
      shapes[s.substr(0, eq)] = std::stoll(s.substr(eq + 1));
    } catch (const std::exception&) {
      throw ParseError("--shape value is not an integer: \"" + s + "\"");
    }
  }
  Architecture a = in.arch.empty() ? mapper::default_study_architecture()
                                   : load(in.arch, [](const std::string& t) { return parse_architecture(t); });
  auto cs = mapper::case_study(name, shapes, a, in.jobs);
  write_output(in.out, mapper::csv_header() + mapper::csv_rows(cs.rows));
  return kOk;
}

/// Adds one to the named analytical counter before comparing.
void inject_fault(analysis::Evaluation& ev, metrics::Metrics& mt, const std::string& counter) {
  if (counter == "compute_ops") {
    ev.totals.compute_ops += 1;
    mt.counts.compute_ops += 1;
  } else if (counter == "offchip") {
    mt.offchip_words += 1;
  } else if (counter == "recompute") {
    ev.recompute[0] += 1;
    mt.recompute_ops[0] += 1;
  } else {
    throw ParseError("unknown fault \"" + counter + "\"");
  }
}

std::optional<check::Mismatch> check_one(const workload::FusionSet& w, const Architecture& a,
                                         const mapping::Mapping& m, Count op_limit, const std::string& fault) {
  auto ev = analysis::analyze(w, m, a);
  auto mt = metrics::compute_metrics(ev, w, m, a);
  if (!fault.empty()) inject_fault(ev, mt, fault);
  auto sim = oracle::simulate(w, m, a, op_limit);
  return check::compare(ev, mt, sim, w, a);
}

int cmd_oracle_check(const Inputs& in, int fuzz_cases, const std::string& fault) {
  if (fuzz_cases > 0) {
    for (int i = 0; i < fuzz_cases; ++i) {
      const auto seed = in.seed + static_cast<std::uint64_t>(i);
      auto c = fuzz::random_case(seed);
      spdlog::debug("case {}: {}", seed, c.label);
      if (auto mm = check_one(c.workload, c.arch, c.mapping, in.op_limit, fault)) {
        std::cerr << "mismatch in random case " << seed << " (" << c.label << "): " << mm->describe() << "\n"
                  << "mapping: " << mapping::serialize_mapping(c.mapping) << "\n";
        return kMismatch;
      }
    }
    std::cout << "oracle-check: " << fuzz_cases << " random cases agree\n";
    return kOk;
  }
  auto [w, a, m] = load_mapping_inputs(in);
  if (auto mm = check_one(w, a, m, in.op_limit, fault)) {
    std::cerr << "mismatch: " << mm->describe() << "\n";
    return kMismatch;
  }
  std::cout << "oracle-check: all counters agree\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Analytical model and mapspace explorer for fused-layer accelerators"};
  app.require_subcommand(1);
  Inputs in;

  auto add_model_inputs = [&](CLI::App* sub, bool mapping_required) {
    sub->add_option("--workload", in.workload, "Workload JSON")->required();
    sub->add_option("--arch", in.arch, "Architecture JSON")->required();
    auto* opt = sub->add_option("--mapping", in.mapping, "Mapping JSON");
    if (mapping_required) opt->required();
    sub->add_option("--out", in.out, "Output path (default stdout)");
  };

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate one mapping and write a JSON report");
  add_model_inputs(evaluate, true);

  auto* report = app.add_subcommand("report", "Human-readable summary of one mapping");
  add_model_inputs(report, true);

  std::vector<std::string> objectives{"occupancy", "offchip", "recompute"};
  bool all_rows = false;
  auto* search = app.add_subcommand("search", "Enumerate a mapspace and write the Pareto front as CSV");
  search->add_option("--workload", in.workload, "Workload JSON")->required();
  search->add_option("--arch", in.arch, "Architecture JSON")->required();
  search->add_option("--mapspace", in.mapspace, "Mapspace JSON")->required();
  search->add_option("--out", in.out, "Output CSV (default stdout)");
  search->add_option("--jobs", in.jobs, "Worker threads (0 = OpenMP default)");
  search->add_option("--objectives", objectives, "Front objectives")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::IsMember({"occupancy", "offchip", "recompute", "latency", "energy"}));
  search->add_flag("--all", all_rows, "Write every evaluated mapping, not just the front");

  std::string study;
  std::vector<std::string> shapes;
  auto* cstudy = app.add_subcommand("case-study", "Run a canned study and write its CSV");
  cstudy->add_option("name", study, "Study name")->required()->check(CLI::IsMember(mapper::case_study_names()));
  cstudy->add_option("--arch", in.arch, "Architecture JSON (default: built-in two-level)");
  cstudy->add_option("--shape", shapes, "Template shape override KEY=VALUE");
  cstudy->add_option("--out", in.out, "Output CSV (default stdout)");
  cstudy->add_option("--jobs", in.jobs, "Worker threads (0 = OpenMP default)");

  int fuzz_cases = 0;
  std::string fault;
  auto* ocheck = app.add_subcommand("oracle-check", "Compare the analytical model with the reference simulator");
  ocheck->add_option("--workload", in.workload, "Workload JSON");
  ocheck->add_option("--arch", in.arch, "Architecture JSON");
  ocheck->add_option("--mapping", in.mapping, "Mapping JSON");
  ocheck->add_option("--fuzz", fuzz_cases, "Check this many random cases instead of one mapping");
  ocheck->add_option("--seed", in.seed, "First random seed")->capture_default_str();
  ocheck->add_option("--op-limit", in.op_limit, "Simulator operation limit")->capture_default_str();
  ocheck->add_option("--inject-fault", fault, "Corrupt an analytical counter")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*evaluate) return cmd_evaluate(in);
    if (*report) return cmd_report(in);
    if (*search) return cmd_search(in, objectives, all_rows);
    if (*cstudy) return cmd_case_study(in, study, shapes);
    if (*ocheck) {
      if (fuzz_cases <= 0 && (in.workload.empty() || in.arch.empty() || in.mapping.empty())) {
        throw ParseError("oracle-check needs --workload, --arch and --mapping, or --fuzz N");
      }
      return cmd_oracle_check(in, fuzz_cases, fault);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kInputError;
  }
  return kOk;
}
