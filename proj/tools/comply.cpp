// comply - run, check and batch-run compliance scenarios.
//
// Exit codes: 0 success, 1 validation error, 2 episode failure, 3 timeout.
#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "comply/comply.hpp"

namespace fs = std::filesystem;
using namespace comply;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitFailure = 2;
constexpr int kExitTimeout = 3;

int exit_code(const std::string & outcome)
{
  if (outcome == "success") return kExitOk;
  if (outcome == "failure") return kExitFailure;
  return kExitTimeout;
}

void print(std::ostream & os, const std::vector<Diagnostic> & diags)
{
  for (const auto & d : diags) os << format_diagnostic(d) << "\n";
}

bool write_file(const fs::path & p, const std::string & text, std::ostream & err)
{
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) {
    err << "cannot write " << p.string() << "\n";
    return false;
  }
  return true;
}

struct RunOutput
{
  int code = kExitInvalid;
  std::string trace;
  std::string summary;
  std::vector<Diagnostic> diagnostics;
};

RunOutput run_file(const fs::path & path, std::optional<std::int64_t> max_ticks, std::optional<std::int64_t> seed)
{
  RunOutput out;
  auto parsed = load_scenario(path);
  out.diagnostics = parsed.diagnostics;
  if (!parsed.ok()) return out;
  ScenarioSpec spec = std::move(*parsed.value);
  if (max_ticks) spec.run.max_ticks = *max_ticks;
  if (seed) spec.run.seed = *seed;
  if (spec.run.max_ticks < 1) {
    out.diagnostics.push_back(Diagnostic{Severity::error, spec.file, {}, "maxTicks must be ≥ 1"});
    return out;
  }
  auto result = run_scenario(spec, out.diagnostics);
  if (!result) return out;
  out.trace = format_trace(result->trace);
  out.summary = format_summary(result->summary);
  out.code = exit_code(result->summary.outcome);
  return out;
}

bool is_scenario(const fs::path & p) { return p.extension() == ".scn"; }

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Constraint-compliance agent harness"};
  app.require_subcommand(1);

  std::string scenario;
  std::string trace_path;
  std::string summary_path;
  std::optional<std::int64_t> max_ticks;
  std::optional<std::int64_t> seed;
  auto * run = app.add_subcommand("run", "Run one scenario and print its summary");
  run->add_option("scenario", scenario, "Scenario file")->required();
  run->add_option("--trace", trace_path, "Write the trace here");
  run->add_option("--summary", summary_path, "Write the summary here instead of standard output");
  run->add_option("--max-ticks", max_ticks, "Override maxTicks");
  run->add_option("--seed", seed, "Override the seed");

  std::string check_path;
  auto * check = app.add_subcommand("check", "Parse and validate a constraint or scenario file");
  check->add_option("file", check_path, "Constraint (.cst) or scenario (.scn) file")->required();

  std::string batch_dir;
  std::string out_dir = "batch_out";
  int parallel = 1;
  auto * batch = app.add_subcommand("batch", "Run every .scn file in a directory");
  batch->add_option("dir", batch_dir, "Directory of scenarios")->required();
  batch->add_option("--parallel", parallel, "Concurrent runs")->check(CLI::Range(1, 64));
  batch->add_option("--out", out_dir, "Directory for <name>.trace and <name>.summary files");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    RunOutput r = run_file(scenario, max_ticks, seed);
    print(std::cerr, r.diagnostics);
    if (r.code == kExitInvalid && r.summary.empty()) return kExitInvalid;
    if (!trace_path.empty() && !write_file(trace_path, r.trace, std::cerr)) return kExitInvalid;
    if (!summary_path.empty()) {
      if (!write_file(summary_path, r.summary, std::cerr)) return kExitInvalid;
    } else {
      std::cout << r.summary;
    }
    return r.code;
  }

  if (*check) {
    const fs::path p = check_path;
    std::vector<Diagnostic> diags;
    if (is_scenario(p)) {
      auto parsed = load_scenario(p);
      diags = parsed.diagnostics;
      if (parsed.ok()) make_environment(*parsed.value, diags);
    } else {
      auto text = read_text_file(p);
      if (!text) {
        diags.push_back(Diagnostic{Severity::error, p.string(), {}, "cannot read file"});
      } else {
        diags = parse_constraint_file(*text, p.string()).diagnostics;
      }
    }
    print(std::cerr, diags);
    return has_errors(diags) ? kExitInvalid : kExitOk;
  }

  // batch
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto & e : fs::directory_iterator(batch_dir, ec)) {
    if (e.is_regular_file() && is_scenario(e.path())) files.push_back(e.path());
  }
  if (ec) {
    std::cerr << "cannot list " << batch_dir << ": " << ec.message() << "\n";
    return kExitInvalid;
  }
  std::sort(files.begin(), files.end());
  fs::create_directories(out_dir, ec);
  std::vector<RunOutput> results(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < files.size(); i = next++) results[i] = run_file(files[i], std::nullopt, std::nullopt);
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < parallel; ++i) pool.emplace_back(worker);
  for (auto & t : pool) t.join();
  int worst = kExitOk;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const RunOutput & r = results[i];
    print(std::cerr, r.diagnostics);
    const std::string stem = files[i].stem().string();
    if (!r.summary.empty()) {
      write_file(fs::path(out_dir) / (stem + ".trace"), r.trace, std::cerr);
      write_file(fs::path(out_dir) / (stem + ".summary"), r.summary, std::cerr);
    }
    std::cout << stem << ": " << (r.summary.empty() ? "invalid" : std::to_string(r.code)) << "\n";
    worst = std::max(worst, r.code);
  }
  return worst;
}
