// Command-line driver: train, evaluate, explain, global-importance, synth-gen.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vmask/checkpoint.hpp"
#include "vmask/config.hpp"
#include "vmask/explainers.hpp"
#include "vmask/mask.hpp"
#include "vmask/metrics.hpp"
#include "vmask/trainer.hpp"

namespace fs = std::filesystem;
using namespace vmask;

namespace {

constexpr int kExitUsage = 2;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

GlobalImportance importance_of(const models::Model& model, const corpus::DatasetSplit& ds) {
  switch (model.strategy()) {
    case models::Strategy::vmask:
      return mask::global_importance(model.mask_net(), model.embedding(), ds.vocab);
    case models::Strategy::iba:
      return baselines::iba_global_importance(model.gate(), model.embedding(), ds.train, ds.vocab);
    default:
      throw std::runtime_error("strategy '" + to_string(model.strategy()) +
                               "' defines no global importance table (vmask and iba only)");
  }
}

metrics::Explainer make_explainer(const std::string& name, const config::EvalConfig& eval) {
  if (name == "lime") {
    explainers::LimeOptions opts{eval.n_samples, eval.kernel_width, eval.ridge_alpha};
    return [opts, seed = eval.seed](const models::Model& m, const corpus::Example& ex) {
      return explainers::lime_explain(m, ex, opts, seed);
    };
  }
  if (name == "shapley") {
    return [perms = eval.shapley_permutations, seed = eval.seed](const models::Model& m,
                                                                 const corpus::Example& ex) {
      return explainers::sample_shapley(m, ex, perms, seed);
    };
  }
  if (name == "exact") {
    return [](const models::Model& m, const corpus::Example& ex) {
      return explainers::exact_shapley(m, ex);
    };
  }
  throw std::runtime_error("unknown explainer '" + name + "'");
}

int cmd_train(const std::string& config_path, const std::string& out_dir, int64_t seed_override) {
  config::RunConfig cfg = config::RunConfig::parse_file(config_path);
  if (seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(seed_override);

  corpus::DatasetSplit ds = config::load_dataset(cfg.data);
  cfg.model.num_classes = ds.num_classes;

  models::Model model(cfg.model, cfg.train.strategy, ds.vocab.size(), cfg.init_seed);
  if (!cfg.pretrained_path.empty()) {
    models::PretrainedLoad load =
        models::load_pretrained_embeddings(cfg.pretrained_path, ds.vocab, cfg.model.embed_dim,
                                           cfg.init_seed);
    model.set_embedding(load.table);
    std::cerr << "pretrained embeddings: " << load.coverage << "/" << ds.vocab.size() - 2
              << " tokens covered\n";
  }

  trainer::TrainResult res = trainer::train(model, ds, cfg.train);
  res.best.vocab_fingerprint = ds.vocab.fingerprint();

  fs::create_directories(out_dir);
  const nlohmann::json echoed = cfg.echo();
  ckpt::save(out_dir + "/checkpoint.vmsk", res.best, echoed);
  write_file(out_dir + "/echoed-config.json", echoed.dump(2) + "\n");

  std::string history;
  for (const trainer::EpochStats& e : res.history) {
    nlohmann::json line = {{"epoch", e.epoch},   {"step", e.step}, {"loss", e.loss},
                           {"ce", e.ce},         {"reg", e.reg},   {"beta_t", e.beta_t},
                           {"dev_acc", e.dev_acc}};
    history += line.dump() + "\n";
  }
  write_file(out_dir + "/history.jsonl", history);

  std::cout << "trained " << to_string(cfg.train.strategy) << " for " << res.history.size()
            << " epochs; best dev accuracy " << res.best.dev_accuracy << "% (epoch "
            << res.best.epoch << ")\n"
            << "checkpoint: " << out_dir << "/checkpoint.vmsk\n";
  return 0;
}

struct LoadedRun {
  ckpt::CheckpointFile file;
  corpus::DatasetSplit ds;
  models::Model model;
  config::RunConfig cfg;
};

LoadedRun load_run(const std::string& checkpoint_path, const std::string& config_override) {
  ckpt::CheckpointFile file = ckpt::load(checkpoint_path);
  config::RunConfig cfg = config_override.empty()
                              ? config::RunConfig::parse(file.run_config)
                              : config::RunConfig::parse_file(config_override);
  corpus::DatasetSplit ds = config::load_dataset(cfg.data);
  if (ds.vocab.fingerprint() != file.state.vocab_fingerprint) {
    throw std::runtime_error("vocab fingerprint mismatch: checkpoint " +
                             config::fingerprint_hex(file.state.vocab_fingerprint) + " vs data " +
                             config::fingerprint_hex(ds.vocab.fingerprint()));
  }
  models::Model model = ckpt::rebuild_model(file);
  return {std::move(file), std::move(ds), std::move(model), std::move(cfg)};
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& config_override,
                 int aopc_n, const std::string& explainer_name, const std::vector<int>& posthoc_ks,
                 bool pearson, int slice_size, int64_t seed_override, const std::string& out_path) {
  LoadedRun run = load_run(checkpoint_path, config_override);
  config::EvalConfig eval = run.cfg.eval;
  if (seed_override >= 0) eval.seed = static_cast<uint64_t>(seed_override);

  metrics::MetricsReport report;
  report.seed = eval.seed;
  report.vocab_fingerprint = config::fingerprint_hex(run.ds.vocab.fingerprint());
  report.config_fingerprint =
      config::fingerprint_hex(corpus::fnv1a64(run.cfg.echo().dump()));

  report.accuracy = metrics::accuracy(run.model, run.ds.test);

  const int slice = slice_size > 0 ? slice_size : eval.slice_size;
  std::vector<corpus::Example> eval_slice(
      run.ds.test.begin(),
      run.ds.test.begin() + std::min<size_t>(run.ds.test.size(), static_cast<size_t>(slice)));

  if (aopc_n > 0) {
    const std::string name = explainer_name.empty() ? eval.explainer : explainer_name;
    report.aopc[name] = metrics::aopc(run.model, eval_slice, make_explainer(name, eval), aopc_n);
  }

  if (!posthoc_ks.empty() || pearson) {
    GlobalImportance gi = importance_of(run.model, run.ds);
    for (int k : posthoc_ks) {
      report.posthoc_acc[k] = metrics::post_hoc_accuracy(run.model, eval_slice, gi, k);
    }
    if (pearson) {
      report.pearson_r = metrics::pearson_freq_importance(run.ds.vocab, gi);
      report.has_pearson = true;
    }
    report.top_words = metrics::top_k_words(gi, 10);
  }

  std::cout << report.to_table();
  if (!out_path.empty()) write_file(out_path, report.to_json() + "\n");
  return 0;
}

int cmd_explain(const std::string& checkpoint_path, const std::string& text, int64_t index,
                const std::string& method, int n_samples, int perms, int64_t seed,
                const std::string& out_path) {
  LoadedRun run = load_run(checkpoint_path, "");

  corpus::Example ex;
  if (!text.empty()) {
    ex = corpus::encode(corpus::tokenize(text), run.ds.vocab, run.ds.max_len);
  } else {
    if (index < 0 || index >= static_cast<int64_t>(run.ds.test.size())) {
      throw std::runtime_error("explain: --index out of range (test split has " +
                               std::to_string(run.ds.test.size()) + " examples)");
    }
    ex = run.ds.test[index];
  }

  explainers::Attribution att;
  if (method == "lime") {
    explainers::LimeOptions opts{n_samples, run.cfg.eval.kernel_width, run.cfg.eval.ridge_alpha};
    att = explainers::lime_explain(run.model, ex, opts, static_cast<uint64_t>(seed));
  } else if (method == "shapley") {
    att = explainers::sample_shapley(run.model, ex, perms, static_cast<uint64_t>(seed));
  } else if (method == "exact") {
    att = explainers::exact_shapley(run.model, ex);
  } else {
    throw std::runtime_error("explain: method must be lime, shapley or exact");
  }

  std::vector<int> order(att.scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return att.scores[a] > att.scores[b]; });
  std::cout << "target class: " << att.target_class << "\n";
  for (int i : order) {
    std::printf("%-20s %+.6f\n", run.ds.vocab.token(att.token_ids[i]).c_str(), att.scores[i]);
  }
  if (!out_path.empty()) write_file(out_path, att.to_json(run.ds.vocab) + "\n");
  return 0;
}

int cmd_global_importance(const std::string& checkpoint_path, const std::string& out_path) {
  LoadedRun run = load_run(checkpoint_path, "");
  GlobalImportance gi = importance_of(run.model, run.ds);
  std::string tsv = gi.to_tsv();
  char footer[64];
  std::snprintf(footer, sizeof(footer), "# pearson_r\t%.6f\n",
                metrics::pearson_freq_importance(run.ds.vocab, gi));
  tsv += footer;
  if (out_path.empty()) {
    std::cout << tsv;
  } else {
    write_file(out_path, tsv);
    std::cout << "wrote " << gi.entries().size() << " word scores to " << out_path << "\n";
  }
  return 0;
}

int cmd_synth_gen(const std::string& config_path, const std::string& out_dir) {
  config::RunConfig cfg = config::RunConfig::parse_file(config_path);
  if (!cfg.data.use_synth) throw std::runtime_error("synth-gen: config has no data.synth section");
  corpus::DatasetSplit ds = config::load_dataset(cfg.data);

  fs::create_directories(out_dir);
  auto dump_split = [&](const std::vector<corpus::Example>& split, const std::string& name) {
    std::string out;
    for (const corpus::Example& ex : split) {
      out += std::to_string(ex.label);
      out += '\t';
      for (int t = 0; t < ex.true_length; ++t) {
        if (t) out += ' ';
        out += ds.vocab.token(ex.token_ids[t]);
      }
      out += '\n';
    }
    write_file(out_dir + "/" + name + ".tsv", out);
  };
  dump_split(ds.train, "train");
  dump_split(ds.dev, "dev");
  dump_split(ds.test, "test");
  write_file(out_dir + "/vocab.json", ds.vocab.to_json() + "\n");

  std::string kw;
  for (int c = 0; c < ds.num_classes; ++c) {
    for (int j = 0; j < cfg.data.synth.keywords_per_class; ++j) {
      kw += std::to_string(c) + "\tkw" + std::to_string(c) + "x" + std::to_string(j) + "\n";
    }
  }
  write_file(out_dir + "/keywords.tsv", kw);
  std::cout << "wrote " << ds.train.size() << "/" << ds.dev.size() << "/" << ds.test.size()
            << " train/dev/test docs to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable text classification with variational word masks"};
  app.require_subcommand(1);

  std::string config_path, out_path, checkpoint_path, text, explainer_name, method = "lime";
  int64_t seed = -1, index = -1;
  int aopc_n = 0, n_samples = 1000, perms = 200, slice = 0;
  std::vector<int> posthoc_ks;
  bool pearson = false;

  CLI::App* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--out", out_path, "output directory")->required();
  train->add_option("--seed", seed, "override train.seed");

  CLI::App* evaluate = app.add_subcommand("evaluate", "metrics for a trained checkpoint");
  evaluate->add_option("--checkpoint", checkpoint_path)->required();
  evaluate->add_option("--config", config_path, "override the embedded run config");
  evaluate->add_option("--aopc", aopc_n, "AOPC top-n deletions (0 disables)");
  evaluate->add_option("--explainer", explainer_name, "lime | shapley | exact");
  evaluate->add_option("--posthoc", posthoc_ks, "post-hoc accuracy k values");
  evaluate->add_flag("--pearson", pearson, "frequency-importance Pearson r");
  evaluate->add_option("--slice", slice, "evaluation slice size for AOPC/post-hoc");
  evaluate->add_option("--seed", seed, "override eval.seed");
  evaluate->add_option("--out", out_path, "write the report JSON here");

  CLI::App* explain = app.add_subcommand("explain", "attribution for one example");
  explain->add_option("--checkpoint", checkpoint_path)->required();
  explain->add_option("--text", text, "raw text to explain");
  explain->add_option("--index", index, "test-split example index");
  explain->add_option("--method", method, "lime | shapley | exact");
  explain->add_option("--samples", n_samples, "LIME samples");
  explain->add_option("--perms", perms, "Shapley permutations");
  explain->add_option("--seed", seed, "sampling seed");
  explain->add_option("--out", out_path, "write the attribution JSON here");

  CLI::App* glob = app.add_subcommand("global-importance", "per-word importance table (TSV)");
  glob->add_option("--checkpoint", checkpoint_path)->required();
  glob->add_option("--out", out_path, "TSV output path (stdout if omitted)");

  CLI::App* synth = app.add_subcommand("synth-gen", "write a synthetic corpus to disk");
  synth->add_option("--config", config_path, "run config JSON with a data.synth section")
      ->required();
  synth->add_option("--out", out_path, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, out_path, seed);
    if (evaluate->parsed()) {
      return cmd_evaluate(checkpoint_path, config_path, aopc_n, explainer_name, posthoc_ks,
                          pearson, slice, seed, out_path);
    }
    if (explain->parsed()) {
      if (text.empty() && index < 0) {
        std::cerr << "error: explain needs --text or --index\n";
        return kExitUsage;
      }
      if (seed < 0) seed = 0;
      return cmd_explain(checkpoint_path, text, index, method, n_samples, perms, seed, out_path);
    }
    if (glob->parsed()) return cmd_global_importance(checkpoint_path, out_path);
    if (synth->parsed()) return cmd_synth_gen(config_path, out_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string what = e.what();
    if (what.find("cannot open") != std::string::npos) return kExitUsage;
    return 1;
  }
  return kExitUsage;
}
