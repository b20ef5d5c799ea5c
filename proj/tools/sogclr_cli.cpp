// Command-line front end: gen, train, sweep, gradcheck, bimodal-train.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sogclr/config.hpp"
#include "sogclr/errors.hpp"
#include "sogclr/gradcheck.hpp"
#include "sogclr/metrics.hpp"
#include "sogclr/sweep.hpp"
#include "sogclr/synthetic.hpp"
#include "sogclr/text_io.hpp"
#include "sogclr/train.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "config file (key = value)")->required();
  cmd->add_option("-s,--set", c.overrides, "override, key=value (repeatable)");
}

void print_last(const std::vector<sogclr::MetricsRecord>& records) {
  if (records.empty()) return;
  const auto& r = records.back();
  std::cout << "step " << r.step;
  if (r.objective_value) std::cout << "  objective " << sogclr::text::format_double(*r.objective_value);
  if (r.oracle_grad_norm_sq) std::cout << "  grad_norm_sq " << sogclr::text::format_double(*r.oracle_grad_norm_sq);
  std::cout << '\n';
}

template <class T>
std::vector<T> parse_list(const std::string& csv) {
  std::vector<T> out;
  for (auto tok : sogclr::text::split(csv, ',')) {
    const long long v = sogclr::text::parse_int(tok);
    if (v < 0) sogclr::fail(sogclr::ErrorKind::config, "list entries must be non-negative");
    out.push_back(static_cast<T>(v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sogclr: global contrastive learning experiments"};
  app.require_subcommand(1);

  Common gen_opts;
  std::string gen_out;
  bool gen_paired = false;
  auto* gen = app.add_subcommand("gen", "write the configured synthetic dataset as CSV");
  add_common(gen, gen_opts);
  gen->add_option("-o,--out", gen_out, "output CSV")->required();
  gen->add_flag("--paired", gen_paired, "write paired image/text data");

  Common train_opts;
  auto* train = app.add_subcommand("train", "train a unimodal encoder");
  add_common(train, train_opts);

  Common bimodal_opts;
  auto* bimodal = app.add_subcommand("bimodal-train", "train image and text encoders with two-way SogCLR");
  add_common(bimodal, bimodal_opts);

  Common sweep_opts;
  std::string sweep_b = "4,16,64";
  std::string sweep_seeds = "1,2,3";
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "plateau gradient norm across batch sizes and seeds");
  add_common(sweep, sweep_opts);
  sweep->add_option("--batch-sizes", sweep_b, "comma-separated batch sizes")->capture_default_str();
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds")->capture_default_str();
  sweep->add_option("-o,--out", sweep_out, "write the sweep table here instead of stdout");

  Common check_opts;
  auto* check = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  add_common(check, check_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto cfg = sogclr::load_run_config(gen_opts.config, gen_opts.overrides);
      if (gen_paired) {
        sogclr::write_paired_csv(sogclr::make_paired_dataset(cfg), gen_out);
      } else {
        sogclr::write_dataset_csv(sogclr::make_dataset(cfg), gen_out);
      }
    } else if (train->parsed()) {
      const auto cfg = sogclr::load_run_config(train_opts.config, train_opts.overrides);
      print_last(sogclr::train(cfg).records);
    } else if (bimodal->parsed()) {
      const auto cfg = sogclr::load_run_config(bimodal_opts.config, bimodal_opts.overrides);
      print_last(sogclr::train_bimodal(cfg).records);
    } else if (sweep->parsed()) {
      const auto cfg = sogclr::load_run_config(sweep_opts.config, sweep_opts.overrides);
      const auto result = sogclr::sweep_batch_size(cfg, parse_list<std::size_t>(sweep_b),
                                                   parse_list<std::uint64_t>(sweep_seeds));
      const auto table = sogclr::format_sweep_csv(result);
      if (sweep_out.empty()) {
        std::cout << table;
      } else {
        sogclr::text::write_file(sweep_out, table);
      }
    } else if (check->parsed()) {
      const auto cfg = sogclr::load_run_config(check_opts.config, check_opts.overrides);
      const auto report = sogclr::gradcheck(cfg);
      std::cout << report.format();
      return report.pass() ? 0 : 1;
    }
  } catch (const sogclr::Error& e) {
    std::cerr << "error (" << sogclr::to_string(e.kind()) << "): " << e.what() << '\n';
    return sogclr::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
