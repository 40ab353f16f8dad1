// Copyright 2026 The cystseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cystseg/cystseg.hpp"
#include "cystseg/testing/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace cystseg;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

int report_error(const char* kind, const std::string& message, int code) {
  std::cerr << "error: code=" << kind << " message=" << nlohmann::json(message).dump() << "\n";
  return code;
}

struct Options {
  int threads = 0;
  std::uint64_t seed = 0;
  fs::path spec, manifest, config, out, patches, ckpt, pred, metrics, baselines, log;
  std::optional<int> epochs, batch_size, stride;
  std::string rules = "grader1,grader2,intersection";
  int grad_seeds = 10;
  int nlm_fixtures = 100;
};

RunConfig config_or_default(const fs::path& path) { return path.empty() ? RunConfig{} : load_run_config(path); }

int run_synth(const Options& o) {
  SynthSpec spec;
  if (!o.spec.empty()) {
    try {
      spec = read_json_file(o.spec).get<SynthSpec>();
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::InvalidConfig, o.spec.string() + ": " + e.what());
    }
  }
  const Manifest m = generate(spec, o.out);
  std::size_t frames = 0;
  for (const auto& v : m.volumes) frames += v.frames.size();
  std::printf("wrote %zu volumes, %zu frames to %s\n", m.volumes.size(), frames, o.out.string().c_str());
  return 0;
}

int run_preprocess(const Options& o) {
  const RunConfig cfg = config_or_default(o.config);
  const Manifest in = load_manifest(o.manifest);
  const Manifest out = preprocess_dataset(in, cfg.preprocess, o.out);
  std::printf("preprocessed %zu volumes into %s\n", out.volumes.size(), o.out.string().c_str());
  return 0;
}

int run_patches(const Options& o) {
  const RunConfig cfg = config_or_default(o.config);
  const Manifest m = load_manifest(o.manifest);
  const BalancedSet set = build_patch_dataset(m, cfg.patches, o.seed);
  write_patch_cache(set.records, o.out);
  std::size_t pos = 0;
  for (const auto& r : set.records) pos += r.label;
  std::printf("patches %zu positive %zu negative %zu (available positive %zu negative %zu)\n", set.records.size(), pos,
              set.records.size() - pos, set.available_positives, set.available_negatives);
  for (const auto& [vendor, c] : set.per_vendor)
    std::printf("vendor %s positive %zu negative %zu\n", std::string(to_string(vendor)).c_str(), c.positive, c.negative);
  return 0;
}

int run_train(const Options& o) {
  RunConfig cfg = config_or_default(o.config);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (cfg.train.epochs < 0 || cfg.train.batch_size < 1) fail(Errc::InvalidConfig, "invalid epochs or batch size");
  const auto records = read_patch_cache(o.patches);
  auto result = nn::train(cfg.model, records, cfg.train, o.seed, [](const nn::EpochLog& e) {
    std::printf("epoch %d loss %.6f accuracy %.4f", e.epoch, e.loss, e.accuracy);
    if (e.val_accuracy) std::printf(" val_loss %.6f val_accuracy %.4f", *e.val_loss, *e.val_accuracy);
    std::printf("\n");
    std::fflush(stdout);
  });
  const nlohmann::json meta = {{"seed", o.seed},
                               {"best_epoch", result.best_epoch},
                               {"patches", records.size()},
                               {"train", cfg.train},
                               {"patch_config", cfg.patches}};
  save_checkpoint(result.model, meta, o.out);
  fs::path log = o.log;
  if (log.empty()) log = fs::path(o.out).replace_extension(".log.csv");
  write_text(nn::history_csv(result.history), log);
  std::printf("saved %s (best epoch %d), log %s\n", o.out.string().c_str(), result.best_epoch, log.string().c_str());
  return 0;
}

int run_predict(const Options& o) {
  RunConfig cfg = config_or_default(o.config);
  if (o.stride) cfg.predict.stride = *o.stride;
  if (o.batch_size) cfg.predict.batch_size = *o.batch_size;
  if (cfg.predict.stride < 1 || cfg.predict.batch_size < 1) fail(Errc::InvalidConfig, "stride must be >= 1");
  auto ck = nn::load_checkpoint(o.ckpt);
  cfg.predict.patch_size = ck.model.spec().input_size;
  const Manifest m = load_manifest(o.manifest);
  const std::size_t n = predict_dataset(ck.model, m, o.out, cfg.predict);
  std::printf("predicted %zu frames into %s\n", n, o.out.string().c_str());
  return 0;
}

int run_evaluate(const Options& o) {
  const auto rules = parse_rules(o.rules);
  const Manifest m = load_manifest(o.manifest);
  const auto rows = evaluate_predictions(o.pred, m, rules);
  write_metrics_csv(rows, o.out);
  for (const auto& a : aggregate(rows))
    if (a.vendor == "overall")
      std::printf("%s mean dice %.4f std %.4f over %zu volumes\n", a.grader_rule.c_str(), a.dice.mean, a.dice.std,
                  a.dice.n);
  return 0;
}

int run_report(const Options& o) {
  const auto rows = read_metrics_csv(o.metrics);
  std::vector<BaselineRow> baselines;
  if (!o.baselines.empty()) baselines = read_baselines_csv(o.baselines);
  render_report(rows, baselines, o.out);
  std::printf("wrote report to %s\n", o.out.string().c_str());
  return 0;
}

int run_selfcheck(const Options& o) {
  bool ok = true;
  for (const auto& r : selfcheck::run_all(o.grad_seeds, o.nlm_fixtures)) {
    std::printf("%s %s: %s\n", r.ok ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.ok;
  }
  return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-wise retinal cyst segmentation"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "Worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--spec", o.spec, "Synthetic spec JSON");
  synth->add_option("--out", o.out, "Output directory")->required();

  auto* pre = app.add_subcommand("preprocess", "Preprocess frames and masks");
  pre->add_option("--manifest", o.manifest)->required();
  pre->add_option("--config", o.config, "Run configuration JSON");
  pre->add_option("--out", o.out)->required();

  auto* pat = app.add_subcommand("patches", "Build the balanced patch cache");
  pat->add_option("--manifest", o.manifest, "Preprocessed manifest")->required();
  pat->add_option("--config", o.config);
  pat->add_option("--seed", o.seed)->required();
  pat->add_option("--out", o.out, "Patch cache file")->required();

  auto* tr = app.add_subcommand("train", "Train the patch classifier");
  tr->add_option("--patches", o.patches)->required();
  tr->add_option("--config", o.config);
  tr->add_option("--seed", o.seed)->required();
  tr->add_option("--out", o.out, "Checkpoint file")->required();
  tr->add_option("--epochs", o.epochs);
  tr->add_option("--batch-size", o.batch_size);
  tr->add_option("--log", o.log, "Training log CSV (default: <out>.log.csv)");

  auto* pr = app.add_subcommand("predict", "Segment every test frame");
  pr->add_option("--ckpt", o.ckpt)->required();
  pr->add_option("--manifest", o.manifest, "Preprocessed manifest")->required();
  pr->add_option("--out", o.out)->required();
  pr->add_option("--config", o.config);
  pr->add_option("--stride", o.stride);
  pr->add_option("--batch-size", o.batch_size);

  auto* ev = app.add_subcommand("evaluate", "Score predictions against the graders");
  ev->add_option("--pred", o.pred)->required();
  ev->add_option("--manifest", o.manifest, "Preprocessed manifest")->required();
  ev->add_option("--rules", o.rules, "Comma-separated: grader1, grader2, intersection, union");
  ev->add_option("--out", o.out, "Metrics CSV")->required();

  auto* rep = app.add_subcommand("report", "Render per-volume and comparison tables");
  rep->add_option("--metrics", o.metrics)->required();
  rep->add_option("--baselines", o.baselines);
  rep->add_option("--out", o.out)->required();

  auto* sc = app.add_subcommand("selfcheck", "Run the built-in property checks");
  sc->add_option("--grad-seeds", o.grad_seeds)->check(CLI::PositiveNumber);
  sc->add_option("--nlm-fixtures", o.nlm_fixtures)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("Usage", e.what(), kExitUsage);
  }

  set_max_threads(o.threads);
  try {
    if (*synth) return run_synth(o);
    if (*pre) return run_preprocess(o);
    if (*pat) return run_patches(o);
    if (*tr) return run_train(o);
    if (*pr) return run_predict(o);
    if (*ev) return run_evaluate(o);
    if (*rep) return run_report(o);
    if (*sc) return run_selfcheck(o);
  } catch (const Error& e) {
    return report_error(to_string(e.code()).data(), e.what(), is_input_error(e.code()) ? kExitInput : kExitRuntime);
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), kExitRuntime);
  }
  return kExitUsage;
}
