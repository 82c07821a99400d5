#include <iostream>

#include <CLI11.hpp>

#include "mtd/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace mtd::cli;
  CLI::App app{"mtd: spatio-temporal graph attention for relation prediction on dynamic scenes"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic kinetic-scenes dataset");
  g->add_option("--config", gen.config, "Generator config (JSON)");
  g->add_option("--seed", gen.seed, "Dataset seed");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--profile", gen.profile, "benchmark | ci | smoke");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a dataset");
  t->add_option("--config", tr.config, "Run config (JSON)");
  t->add_option("--seed", tr.seed, "Model and shuffle seed");
  t->add_option("--out", tr.out, "Output directory");
  t->add_option("--profile", tr.profile, "benchmark | ci | smoke");
  t->add_option("--dataset", tr.dataset, "Dataset directory");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint.json written by train, or its run directory")->required();
  e->add_option("--dataset", ev.dataset, "Dataset directory")->required();
  e->add_option("--split", ev.split, "train | val | test")->capture_default_str();
  e->add_option("--threshold", ev.threshold, "F1 decision threshold")->capture_default_str();
  e->add_option("--out", ev.out, "CSV path (default: stdout)");

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Run an ablation sweep");
  a->add_option("--config", ab.config, "Sweep spec (JSON)")->required();
  a->add_option("--seed", ab.seed, "Seed shared by every cell");
  a->add_option("--out", ab.out, "Output directory");
  a->add_option("--profile", ab.profile, "benchmark | ci | smoke");

  VerifyArgs ve;
  auto* v = app.add_subcommand("verify", "Run the property suite");
  v->add_option("--seed", ve.seed, "Seed of the random instances")->capture_default_str();
  v->add_option("--mutate", ve.mutate, "Inject a sign fault into one primitive's backward rule");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }
  if (g->parsed()) return cmd_generate(gen, std::cout, std::cerr);
  if (t->parsed()) return cmd_train(tr, std::cout, std::cerr);
  if (e->parsed()) return cmd_eval(ev, std::cout, std::cerr);
  if (a->parsed()) return cmd_ablate(ab, std::cout, std::cerr);
  return cmd_verify(ve, std::cout, std::cerr);
}
