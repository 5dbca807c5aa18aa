// Command-line front end: one subcommand per pipeline stage plus `pipeline`.
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "pixinfo/pixinfo.hpp"

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

pixinfo::PipelineConfig load_config(const Options& o) {
  pixinfo::PipelineConfig cfg;
  if (!o.config.empty()) {
    std::string text;
    try {
      text = pixinfo::read_file(o.config);
    } catch (const std::exception& e) {
      pixinfo::fail(pixinfo::ErrorKind::config, "cannot read config " + o.config + ": " + e.what());
    }
    cfg = pixinfo::parse_config(text);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pixinfo: entropy-guided contrastive pixel embeddings for one-shot landmark matching"};
  app.require_subcommand(1);
  Options opt;

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"synth", "generate the synthetic corpus"},
      {"entropy-map", "compute image information entropy maps"},
      {"categorize", "label pixels low / medium / high"},
      {"weights", "build sampling weight maps"},
      {"estimate-aug", "estimate per-group augmentation intensity"},
      {"train", "train the patch encoder"},
      {"match", "match template landmarks into held-out subjects"},
      {"eval", "score predictions (MRE / SDR)"},
      {"pipeline", "run every stage in order"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opt.config, "JSON configuration file");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--seed", opt.seed, "root seed (overrides config)");
    sub->add_option("--workers", opt.workers, "worker threads (overrides config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    pixinfo::RunContext ctx(load_config(opt), opt.out);
    if (cmd == "synth") pixinfo::run_synth(ctx);
    else if (cmd == "entropy-map") pixinfo::run_entropy_map(ctx);
    else if (cmd == "categorize") pixinfo::run_categorize(ctx);
    else if (cmd == "weights") pixinfo::run_weights(ctx);
    else if (cmd == "estimate-aug") {
      for (const auto& g : pixinfo::run_estimate_aug(ctx))
        std::printf("%-7s a_br=%.4f a_ct=%.4f target_mi=%.4f%s%s\n", pixinfo::to_string(g.group), g.params.a_br,
                    g.params.a_ct, g.target.value, g.estimate.unreachable ? " (unreachable)" : "",
                    g.fallback ? " (fallback)" : "");
    } else if (cmd == "train") {
      const auto rep = pixinfo::run_train(ctx);
      if (!rep.steps.empty())
        std::printf("loss: first %.4f  last %.4f\n", rep.steps.front().total, rep.steps.back().total);
    } else if (cmd == "match") pixinfo::run_match(ctx);
    else if (cmd == "eval") std::fputs(pixinfo::format_report_table(pixinfo::run_eval(ctx)).c_str(), stdout);
    else if (cmd == "pipeline") std::fputs(pixinfo::format_report_table(pixinfo::run_pipeline(ctx)).c_str(), stdout);
  } catch (const pixinfo::Error& e) {
    std::fprintf(stderr, "pixinfo %s: %s\n", cmd.c_str(), e.what());
    return pixinfo::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pixinfo %s: %s\n", cmd.c_str(), e.what());
    return 3;
  }
  return 0;
}
