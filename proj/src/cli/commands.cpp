#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <ostream>

#include "cir/cli/cli.hpp"
#include "cir/eval/metrics.hpp"
#include "cir/io.hpp"

namespace cir::cli {

namespace fs = std::filesystem;
using sim::ConfigError;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct SplitData {
  std::vector<tfa::Image> noisy;
  std::vector<tfa::Image> clean;
  std::vector<int> labels;  // -1 for unknown classes
};

SplitData load_data(const fs::path& dir, const sim::Manifest& m, sim::Split split, bool require_clean) {
  SplitData d;
  for (auto& r : sim::load_split(dir, m, split, require_clean)) {
    const auto k = std::find(m.known.begin(), m.known.end(), r.label);
    int label = -1;
    if (k != m.known.end()) {
      label = static_cast<int>(k - m.known.begin());
    } else if (std::find(m.unknown.begin(), m.unknown.end(), r.label) == m.unknown.end()) {
      throw sim::ManifestError("manifest: record label '" + r.label + "' is neither known nor unknown");
    }
    d.noisy.push_back(std::move(r.noisy));
    d.clean.push_back(std::move(r.clean));
    d.labels.push_back(label);
  }
  if (d.noisy.empty()) throw sim::ManifestError("manifest: split " + std::string(sim::split_name(split)) + " is empty");
  return d;
}

sim::Split parse_split(const std::string& s) {
  if (s == "train") return sim::Split::Train;
  if (s == "test") return sim::Split::Test;
  throw ConfigError("--split must be train or test, got '" + s + "'");
}

struct Options {
  std::string config, out, data, ckpt, report, confusion, split = "test";
  std::uint64_t seed = 0;
  std::size_t epochs = 0, batch = 0, d_z = 0, grid = 0;
  float lr = 0, lambda_mi = 0, gamma = 0;
  bool no_ccv = false;
};

ExperimentConfig base_config(const Options& o) { return o.config.empty() ? default_config() : load_config(o.config); }

int cmd_gen_data(const Options& o, const CLI::App& sub, std::ostream& out) {
  ExperimentConfig c = base_config(o);
  if (sub.count("--seed")) c.seed = o.seed;
  if (!c.seed) throw ConfigError("config: seed is mandatory (set \"seed\" in the config or pass --seed)");
  const sim::Manifest m = sim::build_dataset(c.data, *c.seed, o.out);
  std::size_t train = 0;
  for (const auto& r : m.records) train += r.split == sim::Split::Train;
  out << "wrote " << m.records.size() << " records (" << train << " train, " << m.records.size() - train
      << " test) for " << m.known.size() + m.unknown.size() << " classes to " << o.out << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, const CLI::App& sub, std::ostream& out) {
  ExperimentConfig c = base_config(o);
  if (sub.count("--seed")) c.seed = o.seed;
  if (sub.count("--epochs")) c.train.epochs = o.epochs;
  if (sub.count("--batch")) c.train.batch = o.batch;
  if (sub.count("--lr")) c.train.lr_ae = o.lr;
  if (sub.count("--lambda-mi")) c.model.lambda_mi = o.lambda_mi;
  if (sub.count("--gamma")) c.model.gamma = o.gamma;
  if (sub.count("--d-z")) c.model.d_z = o.d_z;
  if (o.no_ccv) c.model.use_ccv = false;
  if (!c.seed) throw ConfigError("config: seed is mandatory (set \"seed\" in the config or pass --seed)");
  if (c.train.epochs == 0 || c.train.batch < 2 || c.model.d_z == 0 || !(c.model.gamma > 0) || !(c.model.lambda_mi >= 0) ||
      !(c.train.lr_ae > 0)) {
    throw ConfigError("train: epochs, batch, d_z, gamma, lambda_mi or lr out of range");
  }
  c.train.seed = *c.seed;

  const sim::Manifest m = sim::load_manifest(o.data);
  const SplitData d = load_data(o.data, m, sim::Split::Train, true);
  pipeline::TrainingSet set;
  for (std::size_t i = 0; i < d.noisy.size(); ++i) {
    if (d.labels[i] < 0) continue;
    set.noisy.push_back(d.noisy[i]);
    set.clean.push_back(d.clean[i]);
    set.labels.push_back(static_cast<std::size_t>(d.labels[i]));
  }
  c.model.classes = m.known.size();
  c.model.height = m.height;
  c.model.width = m.width;
  out << "training on " << set.noisy.size() << " samples, " << m.known.size() << " known classes, "
      << c.train.epochs << " epochs\n";
  const auto ckpt = pipeline::train(set, c.model, m.known, c.train, [&](const pipeline::EpochStats& s) {
    out << "epoch " << s.epoch << "/" << c.train.epochs << " L_De=" << num(s.l_de) << " L_Re=" << num(s.l_re)
        << " L_MI=" << num(s.l_mi) << " ub=" << num(s.ub) << " lb=" << num(s.lb) << "\n"
        << std::flush;
  });
  pipeline::save_checkpoint(ckpt, o.out);
  out << "tau=" << num(*ckpt.tau) << "\n"
      << "checkpoint written to " << o.out << "\n";
  return kExitOk;
}

struct Scored {
  std::vector<pipeline::Prediction> preds;
  std::vector<int> truth;
  sim::Manifest manifest;
};

Scored score(const Options& o, const pipeline::Checkpoint& ckpt) {
  Scored s;
  s.manifest = sim::load_manifest(o.data);
  pipeline::check_classes(ckpt, s.manifest.known);
  const SplitData d = load_data(o.data, s.manifest, parse_split(o.split), false);
  s.preds = pipeline::infer(ckpt, d.noisy);
  s.truth = d.labels;
  return s;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto ckpt = pipeline::load_checkpoint(o.ckpt);
  const Scored s = score(o, ckpt);
  std::vector<int> predicted;
  for (const auto& p : s.preds) predicted.push_back(p.label);
  const eval::EvalReport r = eval::compute_report(predicted, s.truth, s.manifest.known.size(), s.manifest.unknown.size());
  atomic_write(o.report, eval::report_json(r, s.manifest.known));
  if (!o.confusion.empty()) atomic_write(o.confusion, eval::confusion_csv(r, s.manifest.known));
  std::size_t flagged = 0;
  for (int p : predicted) flagged += p < 0;
  out << o.split << " split, " << r.test_size << " samples: AKS=" << num(r.aks) << " AUS=" << num(r.aus)
      << " NA=" << num(r.na) << " F=" << num(r.f) << " openness=" << num(r.openness) << " unknown-flag rate="
      << num(static_cast<double>(flagged) / static_cast<double>(r.test_size)) << "\n";
  out << "report written to " << o.report << "\n";
  return kExitOk;
}

int cmd_roc(const Options& o, std::ostream& out) {
  const auto ckpt = pipeline::load_checkpoint(o.ckpt);
  const Scored s = score(o, ckpt);
  std::vector<double> known, unknown;
  for (std::size_t i = 0; i < s.preds.size(); ++i) (s.truth[i] < 0 ? unknown : known).push_back(s.preds[i].r_min);
  const eval::RocCurve c = eval::roc_sweep(known, unknown, o.grid);
  atomic_write(o.out, eval::roc_csv(c));
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", c.auc);
  out << "auc=" << buf << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-set modulation recognition with class-conditioned reconstruction", "cir"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Simulate pulses and write TFI pairs plus a manifest");
  gen->add_option("--config", o.config, "JSON experiment config")->required();
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--seed", o.seed, "Override the config seed");

  auto* tr = app.add_subcommand("train", "Train a model on the train split of a dataset");
  tr->add_option("--data", o.data, "Dataset directory")->required();
  tr->add_option("--out", o.out, "Checkpoint path")->required();
  tr->add_option("--config", o.config, "JSON experiment config");
  tr->add_option("--seed", o.seed, "Training seed");
  tr->add_option("--epochs", o.epochs);
  tr->add_option("--batch", o.batch);
  tr->add_option("--lr", o.lr, "Autoencoder learning rate");
  tr->add_option("--lambda-mi", o.lambda_mi);
  tr->add_option("--gamma", o.gamma);
  tr->add_option("--d-z", o.d_z);
  tr->add_flag("--no-ccv", o.no_ccv, "Decode z directly (ablation)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint and write a JSON report");
  ev->add_option("--data", o.data, "Dataset directory")->required();
  ev->add_option("--ckpt", o.ckpt, "Checkpoint path")->required();
  ev->add_option("--report", o.report, "Report path")->required();
  ev->add_option("--split", o.split, "train or test")->capture_default_str();
  ev->add_option("--confusion", o.confusion, "Optional confusion-matrix CSV path");

  auto* roc = app.add_subcommand("roc", "Sweep the threshold and write an ROC CSV");
  roc->add_option("--data", o.data, "Dataset directory")->required();
  roc->add_option("--ckpt", o.ckpt, "Checkpoint path")->required();
  roc->add_option("--out", o.out, "CSV path")->required();
  roc->add_option("--split", o.split, "train or test")->capture_default_str();
  roc->add_option("--grid", o.grid, "Maximum number of thresholds (0 = all)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
    return kExitInput;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, *gen, out);
    if (tr->parsed()) return cmd_train(o, *tr, out);
    if (ev->parsed()) return cmd_eval(o, out);
    return cmd_roc(o, out);
  } catch (const pipeline::TrainingDiverged& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sim::ManifestError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const pipeline::CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == pipeline::CheckpointError::Kind::io && !fs::exists(o.ckpt) ? kExitInput
           : e.kind() == pipeline::CheckpointError::Kind::io                    ? kExitRuntime
                                                                                : kExitInput;
  } catch (const tfa::TfiFormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace cir::cli
