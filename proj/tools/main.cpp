// alent: alignment-entropy toolkit command line.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "alent/pipeline.hpp"

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("ALENT_OUTPUT_DIR");
  return env && *env ? env : ".";
}

}  // namespace

int main(int argc, char** argv) {
  alent::RunConfig cfg;
  cfg.out_dir = default_out_dir();
  std::string kind = "frame";

  CLI::App app{"Alignment lattices, alignment entropy, entropy-regularized toy training and decoding"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", cfg.out_dir, "Output directory (default: $ALENT_OUTPUT_DIR or .)")
      ->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--kind", kind, "Lattice kind: frame (ctc), label-frame (rnnt, hat) or label (las)")
      ->capture_default_str();

  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus and its reference timings");
  gen->add_option("--num-utts", cfg.num_utts)->capture_default_str();
  gen->add_option("--t-min", cfg.t_min)->capture_default_str();
  gen->add_option("--t-max", cfg.t_max)->capture_default_str();
  gen->add_option("--u-min", cfg.u_min)->capture_default_str();
  gen->add_option("--u-max", cfg.u_max)->capture_default_str();
  gen->add_option("--noise", cfg.noise)->capture_default_str();
  gen->add_option("--vocab", cfg.vocab)->capture_default_str();
  gen->add_option("--feature-dim", cfg.feature_dim)->capture_default_str();
  gen->add_option("--embedding-seed", cfg.embedding_seed)->capture_default_str();
  gen->add_option("--id-prefix", cfg.id_prefix)->capture_default_str();
  gen->add_option("--frame-shift-ms", cfg.frame_shift_ms)->capture_default_str();

  auto* train = app.add_subcommand("train", "Train the toy model; writes model.txt and curve.csv");
  train->add_option("--corpus", cfg.corpus)->required();
  train->add_option("--lambda", cfg.lambda, "Entropy regularization weight")->capture_default_str();
  train->add_option("--lambda-sweep", cfg.lambda_sweep, "Train once per value")->delimiter(',');
  train->add_option("--steps", cfg.steps)->capture_default_str();
  train->add_option("--step-size", cfg.step_size)->capture_default_str();
  train->add_option("--init-scale", cfg.init_scale)->capture_default_str();
  train->add_option("--context", cfg.context, "Label context size c")->capture_default_str();
  train->add_option("--hidden", cfg.hidden)->capture_default_str();
  train->add_option("--left", cfg.left, "Left frames in the input window")->capture_default_str();
  train->add_option("--right", cfg.right, "Right frames in the input window (0: streaming)")
      ->capture_default_str();

  auto* entropy = app.add_subcommand("entropy", "Per-utterance alignment entropy; writes entropy.csv");
  entropy->add_option("--corpus", cfg.corpus)->required();
  entropy->add_option("--model", cfg.model)->required();

  auto* decode = app.add_subcommand("decode", "Decode with max-search and/or sum-search; writes decode.tsv");
  decode->add_option("--corpus", cfg.corpus)->required();
  decode->add_option("--model", cfg.model)->required();
  decode->add_option("--rule", cfg.rule, "max, sum or both")->capture_default_str();
  decode->add_option("--beam", cfg.beam)->capture_default_str();
  decode->add_option("--max-labels", cfg.max_labels, "Label cap per utterance (0: none)")
      ->capture_default_str();

  auto* eval = app.add_subcommand("eval", "WER and ACC(tau); writes wer.csv and acc.csv");
  eval->add_option("--hyp", cfg.hyp, "Decode TSV")->required();
  eval->add_option("--ref", cfg.ref, "Reference timing TSV")->required();
  eval->add_option("--taus", cfg.taus, "Thresholds in ms")->delimiter(',')->capture_default_str();
  eval->add_option("--frame-shift-ms", cfg.frame_shift_ms)->capture_default_str();
  eval->add_option("--boundary", cfg.boundary, "Word boundary symbol");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "InvalidArgument: " << e.what() << '\n';
    return 2;
  }

  try {
    cfg.kind = alent::parse_lattice_kind(kind);
    cfg.command = app.get_subcommands().front()->get_name();
    for (const auto& p : alent::run(cfg)) std::cout << p.string() << '\n';
  } catch (const alent::Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "Io: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "Error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
