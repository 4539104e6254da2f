// icelab command-line front end.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "icelab/icelab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace icelab;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitWarnings = 1;
constexpr int kExitError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

std::string default_out_dir() {
  if (const char* env = std::getenv("ICELAB_OUT_DIR"); env && *env) return env;
  return "icelab_out";
}

struct Common {
  std::string config;
  std::string spec;
  std::optional<std::uint64_t> seed;
  unsigned jobs = default_jobs();
  long n_oracle = oracle::kDefaultOracleN;
};

sim::ScenarioConfig load_config(const Common& o) {
  auto c = sim::load_scenario(o.config);
  if (o.seed) c.seed = *o.seed;
  return c;
}

void print_report(const ValidationReport& r, bool as_json) {
  if (as_json) std::cout << to_json(r).dump(2) << '\n';
  else std::cout << to_text(r);
}

/// Validation gate shared by the commands that run a plan.
bool gate(const ValidationReport& r, bool strict, int& code) {
  if (!r.ok()) {
    std::cerr << to_text(r);
    code = kExitError;
    return false;
  }
  for (const auto& w : r.warnings) std::cerr << "warning [" << w.rule << "] (" << w.context << "): " << w.message << '\n';
  if (strict && !r.warnings.empty()) {
    code = kExitWarnings;
    return false;
  }
  return true;
}

int cmd_validate(const std::string& spec_path, const std::string& config_path, bool strict, bool as_json) {
  std::optional<sim::ScenarioConfig> scenario;
  if (!config_path.empty()) scenario = sim::load_scenario(config_path);
  const auto report = validate_spec(load_spec(spec_path), scenario);
  print_report(report, as_json);
  if (!report.ok()) return kExitError;
  if (strict && !report.warnings.empty()) return kExitWarnings;
  return kExitOk;
}

/// Truths for the primary plan, each sensitivity, and every distinct
/// strategy in the spec file applied to all causes.
json truths_json(const sim::ScenarioConfig& c, const EstimandSpec& spec, long n_oracle, std::uint64_t seed, unsigned jobs) {
  std::vector<EstimandTarget> targets;
  std::vector<std::string> names, strategies;
  for (const auto& p : analysis_plans(spec)) {
    targets.push_back(to_target(p.plan, p.name));
    names.push_back(p.name);
    strategies.push_back(strategy_text(p.plan));
  }
  std::vector<EstimandStrategy> distinct;
  auto note = [&](const EstimandStrategy& s) {
    if (s.kind == EstimandStrategy::Kind::Composite || s.kind == EstimandStrategy::Kind::PrincipalStratum) return;
    if (std::find(distinct.begin(), distinct.end(), s) == distinct.end()) distinct.push_back(s);
  };
  for (const auto& p : analysis_plans(spec)) {
    for (const auto& [k, s] : p.plan.strategies.by_cause) note(s);
    for (const auto& [k, s] : p.plan.strategies.by_kind) note(s);
  }
  for (const auto& s : distinct) {
    EstimandTarget t{to_string(s), StrategyAssignment::uniform(s), spec.population, spec.endpoint};
    t.assignment.regimen_causes = spec.strategies.regimen_causes;
    t.assignment.regimen_kinds = spec.strategies.regimen_kinds;
    targets.push_back(t);
    names.push_back("uniform");
    strategies.push_back(to_string(s));
  }
  const auto truths = oracle::evaluate(c, targets, n_oracle, {seed, jobs});
  json out = json::array();
  for (std::size_t i = 0; i < truths.size(); ++i) {
    json j = to_json(truths[i]);
    j["strategy"] = strategies[i];
    j["estimand"] = names[i];
    if (names[i] == "uniform") j["estimand"] = "uniform:" + strategies[i];
    out.push_back(j);
  }
  return out;
}

int cmd_truth(const Common& o, const std::string& out_path) {
  const auto c = load_config(o);
  const auto spec = load_spec(o.spec);
  int code = kExitOk;
  if (!gate(validate_spec(spec, c), false, code)) return code;
  const std::string text = truths_json(c, spec, o.n_oracle, c.seed, o.jobs).dump(2) + "\n";
  if (out_path.empty()) std::cout << text;
  else write_text(out_path, text);
  return kExitOk;
}

int cmd_simulate(const Common& o, int R, int m, const std::string& out_dir, bool keep, bool strict, double budget) {
  const auto c = load_config(o);
  const auto spec = load_spec(o.spec);
  int code = kExitOk;
  if (!gate(validate_spec(spec, c), strict, code)) return code;

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  json manifest{{"tool", "icelab"},
                {"version", kVersion},
                {"command", "simulate"},
                {"config", o.config},
                {"config_sha256", sha256_hex(read_file(o.config))},
                {"spec", o.spec},
                {"spec_sha256", sha256_hex(read_file(o.spec))},
                {"seed", c.seed},
                {"replicates", R},
                {"imputations", m},
                {"n_oracle", o.n_oracle},
                {"failure_budget", budget},
                {"keep_replicates", keep},
                {"output_directory", out_dir}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  StudyOptions so;
  so.replicates = R;
  so.m = m;
  so.seed = c.seed;
  so.jobs = o.jobs;
  so.n_oracle = o.n_oracle;
  so.failure_budget = budget;
  const auto result = run_study(c, spec, so);

  std::vector<std::string> names;
  for (const auto& p : analysis_plans(spec)) names.push_back(p.name);
  if (keep || result.aborted) {
    std::ostringstream rs;
    write_replicates_csv(rs, result, names);
    write_text(dir / "replicates.csv", rs.str());
  }
  if (result.aborted) {
    std::size_t completed = result.per_replicate.empty() ? 0 : result.per_replicate.front().size();
    json partial{{"aborted", true}, {"reason", result.abort_reason}, {"completed_replicates", completed}};
    write_text(dir / "partial.json", partial.dump(2) + "\n");
    std::cerr << "error: " << result.abort_reason << '\n';
    return kExitError;
  }
  const std::string scenario = fs::path(o.config).stem().string();
  write_text(dir / "summary.json", summary_json(result, scenario).dump(2) + "\n");
  std::ostringstream csv;
  write_summary_csv(csv, result, scenario);
  write_text(dir / "summary.csv", csv.str());
  json truth = json::array();
  for (const auto& s : result.summaries) {
    json t = to_json(s.truth);
    t["estimand"] = s.name;
    t["strategy"] = s.strategy;
    truth.push_back(t);
  }
  write_text(dir / "truth.json", truth.dump(2) + "\n");
  for (const auto& s : result.summaries)
    std::cout << s.name << ": truth " << format_double(s.truth.value) << ", bias " << format_double(s.bias)
              << ", coverage " << format_double(s.coverage) << ", failed " << s.n_failed << '\n';
  return kExitOk;
}

int cmd_generate(const Common& o, std::uint64_t first, int count, const std::string& out_path) {
  const auto c = load_config(o);
  sim::validate(c);
  std::ostringstream os;
  for (int k = 0; k < count; ++k) {
    const auto r = first + static_cast<std::uint64_t>(k);
    write_dataset_csv(os, r, observe(sim::generate_replicate(c, r)), k == 0);
  }
  if (out_path.empty()) std::cout << os.str();
  else write_text(out_path, os.str());
  return kExitOk;
}

int cmd_impute(const Common& o, std::uint64_t replicate, int m, bool strict, const std::string& out_path) {
  const auto c = load_config(o);
  const auto spec = load_spec(o.spec);
  int code = kExitOk;
  if (!gate(validate_spec(spec, c), strict, code)) return code;
  ImputeOptions io;
  io.m = m;
  io.seed = c.seed;
  io.replicate = replicate;
  const auto set = impute(observe(sim::generate_replicate(c, replicate)), analysis_plans(spec).front().plan, io);
  std::ostringstream os;
  write_imputed_csv(os, replicate, set);
  if (out_path.empty()) std::cout << os.str();
  else write_text(out_path, os.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"icelab: intercurrent-event estimand simulation laboratory"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common o;
  std::string out;
  bool strict = false, as_json = false, keep = false;
  int R = 1000, m = 20, count = 1;
  std::uint64_t replicate = 0;
  double budget = 0.01;

  auto add_seed = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "Master seed; defaults to the scenario's seed");
  };
  auto add_jobs = [&](CLI::App* s) {
    s->add_option("--jobs", o.jobs, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  };
  auto add_oracle = [&](CLI::App* s) {
    s->add_option("--oracle-n", o.n_oracle, "Oracle sample size for true values")->check(CLI::PositiveNumber);
  };

  auto* validate = app.add_subcommand("validate-spec", "Check an estimand spec against the planning rules");
  validate->add_option("--spec", o.spec, "Estimand spec file")->required()->check(CLI::ExistingFile);
  validate->add_option("--config", o.config, "Scenario file; enables scenario-dependent checks")->check(CLI::ExistingFile);
  validate->add_flag("--strict", strict, "Exit 1 when there are warnings");
  validate->add_flag("--json", as_json, "Print the report as JSON");

  auto* truth = app.add_subcommand("truth", "Oracle true values for every strategy in a spec");
  truth->add_option("--config", o.config, "Scenario file")->required()->check(CLI::ExistingFile);
  truth->add_option("--spec", o.spec, "Estimand spec file")->required()->check(CLI::ExistingFile);
  truth->add_option("--out", out, "Write JSON here instead of stdout");
  add_seed(truth);
  add_jobs(truth);
  add_oracle(truth);

  auto* simulate = app.add_subcommand("simulate", "Run the simulation study and write summaries");
  simulate->add_option("--config", o.config, "Scenario file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--spec", o.spec, "Estimand spec file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--replicates", R, "Number of simulated trials")->check(CLI::PositiveNumber);
  simulate->add_option("--imputations", m, "Imputations per trial")->check(CLI::Range(2, 100000));
  simulate->add_option("--out", out, "Output directory (default: $ICELAB_OUT_DIR or ./icelab_out)");
  simulate->add_flag("--keep-replicates", keep, "Also write per-replicate results");
  simulate->add_flag("--strict", strict, "Refuse to run a spec with warnings");
  simulate->add_option("--failure-budget", budget, "Fraction of replicates allowed to fail")->check(CLI::Range(0.0, 1.0));
  add_seed(simulate);
  add_jobs(simulate);
  add_oracle(simulate);

  auto* generate = app.add_subcommand("generate", "Write simulated observed data as CSV");
  generate->add_option("--config", o.config, "Scenario file")->required()->check(CLI::ExistingFile);
  generate->add_option("--replicate", replicate, "First replicate index");
  generate->add_option("--count", count, "Number of replicates")->check(CLI::PositiveNumber);
  generate->add_option("--out", out, "Write CSV here instead of stdout");
  add_seed(generate);

  auto* imp = app.add_subcommand("impute", "Write the imputed copies of one replicate as CSV");
  imp->add_option("--config", o.config, "Scenario file")->required()->check(CLI::ExistingFile);
  imp->add_option("--spec", o.spec, "Estimand spec file")->required()->check(CLI::ExistingFile);
  imp->add_option("--replicate", replicate, "Replicate index");
  imp->add_option("--imputations", m, "Number of imputed copies")->check(CLI::PositiveNumber);
  imp->add_option("--out", out, "Write CSV here instead of stdout");
  imp->add_flag("--strict", strict, "Refuse to run a spec with warnings");
  add_seed(imp);

  auto* defaults = app.add_subcommand("default-plan", "Print the default cause-based plan as a spec file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*validate) return cmd_validate(o.spec, o.config, strict, as_json);
    if (*truth) return cmd_truth(o, out);
    if (*simulate) return cmd_simulate(o, R, m, out.empty() ? default_out_dir() : out, keep, strict, budget);
    if (*generate) return cmd_generate(o, replicate, count, out);
    if (*imp) return cmd_impute(o, replicate, m, strict, out);
    if (*defaults) {
      std::cout << "# Default cause-based plan; alternates are sensitivity sections.\n" << serialize(default_plan());
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
