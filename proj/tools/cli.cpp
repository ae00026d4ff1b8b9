#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hyperproto/concentration.hpp"
#include "hyperproto/errors.hpp"
#include "hyperproto/fewshot.hpp"
#include "hyperproto/report.hpp"
#include "hyperproto/run_config.hpp"
#include "hyperproto/verify.hpp"

namespace hyperproto::cli {

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<int> dims;
  double k = -1.0;
  double r = 1.0;
  double tolerance_scale = 1.0;
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

RunConfig load_single(const Options& o) {
  RunConfig cfg = parse_run_config(read_text_file(o.config));
  if (o.seed) {
    cfg.experiment.seed = *o.seed;
    cfg.experiment.validate();
  }
  return cfg;
}

int cmd_verify(const Options& o, std::ostream& out) {
  VerifyOptions opts;
  opts.tolerance_scale = o.tolerance_scale;
  if (o.seed) opts.seed = *o.seed;
  const auto results = run_verification(opts);
  std::size_t failed = 0;
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-24s %s  %ld/%ld checks passed  (%.2f s)\n", r.name.c_str(),
                  r.passed() ? "PASS" : "FAIL", r.checks - r.failures, r.checks, r.seconds);
    out << line;
    for (const auto& sample : r.failure_samples) out << "    failing case: " << sample << '\n';
    if (!r.passed()) ++failed;
  }
  if (failed == 0) {
    out << "all " << results.size() << " suites passed\n";
    return kSuccess;
  }
  out << failed << " of " << results.size() << " suites failed\n";
  return kInvariantFailure;
}

int cmd_concentration(const Options& o, std::ostream& out) {
  emit(concentration_csv(concentration_sweep(o.dims, o.k, o.r)), o.out, out);
  return kSuccess;
}

int cmd_train(const Options& o, std::ostream& out) {
  const RunConfig cfg = load_single(o);
  const RunReport report = run_experiment(cfg.experiment);
  emit(report_document(report, saturation_of(report, cfg.experiment)), o.out, out);
  if (!cfg.output.empty()) append_csv_row(cfg.output, kTrainCsvHeader, train_csv_row(report));
  return kSuccess;
}

int cmd_compare(const Options& o, std::ostream& out) {
  std::vector<RunConfig> configs = parse_compare_configs(read_text_file(o.config));
  if (o.seed) {
    for (auto& c : configs) {
      c.experiment.seed = *o.seed;
      c.experiment.validate();
    }
  }
  std::string csv = std::string(kCompareCsvHeader) + '\n';
  for (const auto& c : configs) {
    const RunReport report = run_experiment(c.experiment);
    csv += compare_csv_row(report, saturation_of(report, c.experiment)) + '\n';
  }
  emit(csv, o.out, out);
  return kSuccess;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperbolic and fixed-radius prototypical few-shot experiments"};
  app.require_subcommand(1);
  Options o;

  auto* verify = app.add_subcommand("verify", "Run the geometric and loss invariant suites");
  verify->add_option("--tolerance-scale", o.tolerance_scale, "Multiply every tolerance (testing aid)")
      ->check(CLI::NonNegativeNumber);
  verify->add_option("--seed", o.seed, "Seed for the random test cases");

  auto* conc = app.add_subcommand("concentration", "Volume-to-area ratio sweep as CSV");
  conc->add_option("--d", o.dims, "Dimensions, comma separated")->required()->delimiter(',');
  conc->add_option("--k", o.k, "Curvature (negative)")->capture_default_str();
  conc->add_option("--r", o.r, "Hyperbolic ball radius")->capture_default_str();
  conc->add_option("--out", o.out, "CSV path (stdout when omitted)");

  auto* train = app.add_subcommand("train", "Train and evaluate one configuration");
  train->add_option("--config", o.config, "key:value configuration file")->required();
  train->add_option("--out", o.out, "Report path (stdout when omitted)");
  train->add_option("--seed", o.seed, "Override the configured seed");

  auto* compare = app.add_subcommand("compare", "Run several spaces on identical episodes");
  compare->add_option("--config", o.config, "Configuration documents separated by ---")->required();
  compare->add_option("--out", o.out, "CSV path (stdout when omitted)");
  compare->add_option("--seed", o.seed, "Override the seed of every document");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (verify->parsed()) return cmd_verify(o, out);
    if (conc->parsed()) return cmd_concentration(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (compare->parsed()) return cmd_compare(o, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kConfigError;
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const DomainError& e) {
    // Sweep arguments outside their domain are usage errors.
    err << "invalid argument: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInvariantFailure;
  }
  return kConfigError;
}

}  // namespace hyperproto::cli
