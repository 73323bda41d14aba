#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgtraj/metrics.hpp"
#include "sgtraj/pipeline.hpp"
#include "sgtraj/synth.hpp"
#include "sgtraj/train.hpp"

namespace sgtraj::cli {

namespace fs = std::filesystem;

// Every key is both a flag and a key of the flat `key = value` config file.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string variant = "two_channel";
  std::string mode = "stp";
  std::size_t synthetic = 0;
  bool deterministic = true;
  std::size_t workers = 1;
  bool dump_predictions = false;

  std::vector<std::string> input;  // raw NGSIM tables
  std::string out = "sgtraj_out";
  std::string train_data;
  std::string val_data;
  std::string data;
  std::string checkpoint;
  std::size_t validation_size = 0;  // 0: automatic
  bool drop_incomplete_neighbors = false;

  std::size_t epochs = 50;
  std::size_t batch = 128;
  double lr = 1e-3;
  double clip_norm = 0.0;
  bool resume = true;

  std::size_t emb_dim = 32;
  std::size_t gru_hidden = 32;
  std::size_t gat_head_dim = 32;
  std::size_t dec_hidden = 64;
  double lateral_scale = 2.0;
  double longitudinal_scale = 10.0;
};

// Files created by the running command; removed if it fails.
class OutputSet {
 public:
  std::string add(const fs::path& p) {
    paths_.push_back(p);
    return p.string();
  }
  void discard() noexcept {
    std::error_code ec;
    for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) fs::remove(*it, ec);
    paths_.clear();
  }
  void keep() { paths_.clear(); }

 private:
  std::vector<fs::path> paths_;
};

namespace detail {

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing --") + what);
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

inline bool is_mtp(const RunConfig& c) {
  if (c.mode == "stp") return false;
  if (c.mode == "mtp") return true;
  throw ConfigError("unknown mode '" + c.mode + "' (stp, mtp)");
}

inline std::vector<Sample> load_checked(const std::string& path, const RunConfig& c, const char* what) {
  require_file(path, what);
  std::vector<Sample> s;
  try {
    s = load_dataset(path);
  } catch (const std::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (s.empty()) throw ConfigError(path + ": dataset is empty");
  const bool mtp = is_mtp(c);
  for (const auto& x : s)
    if (x.is_stp() == mtp)
      throw ConfigError(path + ": dataset holds " + (mtp ? "STP" : "MTP") + " records but --mode is " + c.mode);
  return s;
}

inline ModelConfig model_config(const RunConfig& c) {
  ModelConfig m;
  m.emb_dim = c.emb_dim;
  m.gru_hidden = c.gru_hidden;
  m.gat_head_dim = c.gat_head_dim;
  m.dec_hidden = c.dec_hidden;
  m.lateral_scale = c.lateral_scale;
  m.longitudinal_scale = c.longitudinal_scale;
  return m;
}

inline ModelParams load_model(const std::string& path) {
  require_file(path, "checkpoint");
  Checkpoint ck;
  try {
    ck = load_checkpoint(path);
  } catch (const std::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return ModelParams::from_checkpoint(ck);
}

inline void write_text(OutputSet& outs, const fs::path& p, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(outs.add(p));
  if (!os) throw ConfigError("cannot write " + p.string());
  body(os);
  if (!os) throw ConfigError("write failed: " + p.string());
}

inline std::size_t auto_validation_size(std::size_t n) {
  return n > 2 * kDefaultValidationSize ? kDefaultValidationSize : n / 5;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline void cmd_preprocess(const RunConfig& c, const std::string& config_text, OutputSet& outs, std::ostream& log) {
  const bool mtp = detail::is_mtp(c);
  if (c.synthetic == 0 && c.input.empty()) throw ConfigError("preprocess needs --input files or --synthetic N");
  for (const auto& p : c.input) detail::require_file(p, "input");
  fs::create_directories(c.out);

  std::vector<Sample> all;
  std::vector<std::string> summary;  // TSV rows
  if (c.synthetic > 0) {
    all = mtp ? synth_mtp_dataset(c.synthetic, c.seed) : synth_dataset(c.synthetic, c.seed);
    summary.push_back("synthetic\t-\t" + std::to_string(all.size()));
  } else {
    ExtractOptions opt;
    opt.drop_incomplete_neighbors = c.drop_incomplete_neighbors;
    for (const auto& path : c.input) {
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open " + path);
      IngestResult ing;
      try {
        ing = ingest(in);
      } catch (const std::exception& e) {
        throw FormatError(path + ": " + e.what());
      }
      for (const auto& w : ing.warnings) log << path << ": warning: " << w << '\n';
      const std::string segment = fs::path(path).stem().string();
      TrackIndex idx(ing.tracks);
      const auto targets = select_targets(ing.tracks, opt.rules);
      std::size_t count = 0;
      for (VehicleId t : targets) {
        auto s = mtp ? extract_mtp_samples(idx, t, segment, opt) : extract_samples(idx, t, segment, opt);
        count += s.size();
        for (auto& x : s) all.push_back(std::move(x));
      }
      summary.push_back(segment + '\t' + std::to_string(targets.size()) + '\t' + std::to_string(count));
    }
  }

  const std::size_t val = c.validation_size ? c.validation_size : detail::auto_validation_size(all.size());
  const std::size_t total = all.size();
  const auto train_path = outs.add(fs::path(c.out) / "train.sgds");
  const auto val_path = outs.add(fs::path(c.out) / "val.sgds");
  const auto sp = split_and_serialize(std::move(all), c.seed, train_path, val_path, val);

  detail::write_text(outs, fs::path(c.out) / "summary.tsv", [&](std::ostream& os) {
    os << "segment\ttargets\tsamples\n";
    for (const auto& r : summary) os << r << '\n';
    os << "total\t-\t" << total << '\n';
  });
  detail::write_text(outs, fs::path(c.out) / "preprocess.ini", [&](std::ostream& os) { os << config_text; });

  log << "segment\ttargets\tsamples\n";
  for (const auto& r : summary) log << r << '\n';
  log << "total samples " << total << " (train " << sp.train.size() << ", validation " << sp.validation.size()
      << ")\n";
}

inline void cmd_train(const RunConfig& c, const std::string& config_text, OutputSet& outs, std::ostream& log) {
  const Variant variant = parse_variant(c.variant);
  const std::string train_path = c.train_data.empty() ? (fs::path(c.out) / "train.sgds").string() : c.train_data;
  const std::string val_path = c.val_data.empty() ? (fs::path(c.out) / "val.sgds").string() : c.val_data;
  const auto train_set = detail::load_checked(train_path, c, "train-data");
  std::optional<std::vector<Sample>> val_set;
  if (fs::exists(val_path)) val_set = detail::load_checked(val_path, c, "val-data");
  fs::create_directories(c.out);

  const fs::path base = fs::path(c.out) / variant_name(variant);
  const fs::path last_path = base.string() + ".last.sgtr";
  const fs::path best_path = base.string() + ".best.sgtr";
  const fs::path curve_path = base.string() + ".loss.csv";

  TrainState st;
  if (c.resume && fs::exists(last_path)) {
    std::optional<ModelParams> best;
    if (fs::exists(best_path)) best = ModelParams::from_checkpoint(load_checkpoint(best_path.string()));
    st = resume_training(load_checkpoint(last_path.string()), std::move(best));
    if (st.params.variant != variant)
      throw ConfigError(last_path.string() + " holds variant " + variant_name(st.params.variant) + ", not " +
                        c.variant);
    log << "resuming " << last_path.string() << " after epoch " << st.epochs_done << '\n';
  } else {
    st = start_training(ModelParams::init(variant, c.seed, detail::model_config(c)));
  }

  TrainOptions opt;
  opt.epochs = c.epochs;
  opt.batch = c.batch;
  opt.seed = c.seed;
  opt.workers = c.workers;
  opt.deterministic = c.deterministic;
  opt.clip_norm = c.clip_norm;
  opt.adam.lr = c.lr;

  // Checkpoints from earlier epochs are valid on their own; only the files
  // of an epoch that fails midway are discarded.
  auto save = [&](const fs::path& p, const Checkpoint& ck) {
    const fs::path tmp = p.string() + ".tmp";
    outs.add(tmp);
    save_checkpoint(tmp.string(), ck);
    fs::rename(tmp, p);
  };
  train(st, train_set, val_set ? &*val_set : nullptr, opt, [&](const TrainState& s) {
    save(last_path, training_checkpoint(s));
    if (s.best && s.best_epoch == s.epochs_done) save(best_path, s.best->to_checkpoint());
    const auto& e = s.curve.back();
    log << variant_name(variant) << " epoch " << e.epoch << " train_loss " << e.train_loss;
    if (e.val_rmse_5s) log << " val_rmse_5s " << *e.val_rmse_5s;
    log << '\n' << std::flush;
  });
  if (!st.best) save(best_path, st.params.to_checkpoint());

  detail::write_text(outs, curve_path, [&](std::ostream& os) { write_loss_curve(os, st.curve); });
  detail::write_text(outs, base.string() + ".train.ini", [&](std::ostream& os) { os << config_text; });
}

inline std::string default_checkpoint(const RunConfig& c) {
  if (!c.checkpoint.empty()) return c.checkpoint;
  return (fs::path(c.out) / (std::string(variant_name(parse_variant(c.variant))) + ".best.sgtr")).string();
}

inline std::string default_eval_data(const RunConfig& c) {
  return c.data.empty() ? (fs::path(c.out) / "val.sgds").string() : c.data;
}

inline void write_predictions(std::ostream& os, const std::vector<Sample>& set, const std::vector<Prediction>& preds) {
  os << "sample\ttarget_node\tstep\tpred_x\tpred_y\ttrue_x\ttrue_y\n" << std::setprecision(10);
  std::size_t i = 0;
  for (std::size_t s = 0; s < set.size(); ++s)
    for (std::size_t t = 0; t < set[s].target_nodes.size(); ++t, ++i)
      for (std::size_t k = 0; k < kFutureLen; ++k)
        os << s << '\t' << set[s].target_nodes[t] << '\t' << k + 1 << '\t' << preds.at(i)[k].x << '\t'
           << preds.at(i)[k].y << '\t' << set[s].futures[t][k].x << '\t' << set[s].futures[t][k].y << '\n';
}

namespace detail {

inline void write_reports(OutputSet& outs, const fs::path& dir, const std::string& tag,
                          const std::vector<EvalReport>& rows) {
  write_text(outs, dir / (tag + "rmse.tsv"), [&](std::ostream& os) { write_report_table(os, rows, false); });
  write_text(outs, dir / (tag + "boxmean.tsv"), [&](std::ostream& os) { write_report_table(os, rows, true); });
  for (const auto& r : rows)
    for (std::size_t h = 0; h < kHorizonsSeconds.size(); ++h)
      write_text(outs, dir / (tag + "errors_" + r.name + "_" + std::to_string(kHorizonsSeconds[h]) + "s.txt"),
                 [&](std::ostream& os) { write_errors(os, r, h); });
}

}  // namespace detail

inline void cmd_evaluate(const RunConfig& c, const std::string& config_text, OutputSet& outs, std::ostream& log) {
  const auto set = detail::load_checked(default_eval_data(c), c, "data");
  const ModelParams p = detail::load_model(default_checkpoint(c));
  fs::create_directories(c.out);
  const fs::path dir = fs::path(c.out) / (std::string("eval_") + variant_name(p.variant));
  fs::create_directories(dir);

  const auto preds = predict_all(p, set);
  const auto truths = flatten_truths(set);
  std::vector<EvalReport> rows{make_report(variant_name(p.variant), preds, truths), evaluate_baseline(set)};
  detail::write_reports(outs, dir, "", rows);
  log << (detail::is_mtp(c) ? "MTP" : "STP") << " RMSE (m)\n";
  write_report_table(log, rows);

  if (!detail::is_mtp(c)) {
    std::vector<Sample> lc;
    for (const auto& s : set)
      if (is_lane_change(s)) lc.push_back(s);
    if (!lc.empty()) {
      std::vector<EvalReport> lrows{evaluate(p, lc), evaluate_baseline(lc)};
      detail::write_reports(outs, dir, "lane_change_", lrows);
      log << "lane-change subset RMSE (m)\n";
      write_report_table(log, lrows);
    }
  }
  if (c.dump_predictions)
    detail::write_text(outs, dir / "predictions.tsv", [&](std::ostream& os) { write_predictions(os, set, preds); });
  detail::write_text(outs, dir / "evaluate.ini", [&](std::ostream& os) { os << config_text; });
}

inline void cmd_predict(const RunConfig& c, const std::string&, OutputSet& outs, std::ostream& log) {
  const auto set = detail::load_checked(default_eval_data(c), c, "data");
  const ModelParams p = detail::load_model(default_checkpoint(c));
  fs::create_directories(c.out);
  const fs::path path = fs::path(c.out) / (std::string(variant_name(p.variant)) + ".predictions.tsv");
  const auto preds = predict_all(p, set);
  detail::write_text(outs, path, [&](std::ostream& os) { write_predictions(os, set, preds); });
  log << "wrote " << preds.size() << " trajectories to " << path.string() << '\n';
}

inline void cmd_baseline(const RunConfig& c, const std::string&, OutputSet& outs, std::ostream& log) {
  const auto set = detail::load_checked(default_eval_data(c), c, "data");
  fs::create_directories(c.out);
  const fs::path dir = fs::path(c.out) / "eval_constant_velocity";
  fs::create_directories(dir);
  std::vector<EvalReport> rows{evaluate_baseline(set)};
  detail::write_reports(outs, dir, "", rows);
  write_report_table(log, rows);
  if (c.dump_predictions)
    detail::write_text(outs, dir / "predictions.tsv",
                       [&](std::ostream& os) { write_predictions(os, set, baseline_predictions(set)); });
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Graph-based vehicle trajectory prediction"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key = value file; flags override it");
  RunConfig c;

  app.add_option("--seed", c.seed, "RNG seed")->required();
  app.add_option("--variant", c.variant, "two_channel | dynamics_only | interaction_only")->capture_default_str();
  app.add_option("--mode", c.mode, "stp | mtp")->capture_default_str();
  app.add_option("--synthetic", c.synthetic, "generate N synthetic samples instead of reading --input");
  app.add_flag("--deterministic,!--no-deterministic", c.deterministic, "fixed gradient reduction order");
  app.add_option("--workers", c.workers, "gradient worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--dump-predictions", c.dump_predictions, "write per-sample predicted trajectories");

  app.add_option("--input", c.input, "raw trajectory tables (one file per segment)");
  app.add_option("--out", c.out, "output directory")->capture_default_str();
  app.add_option("--train-data", c.train_data, "training dataset (default <out>/train.sgds)");
  app.add_option("--val-data", c.val_data, "validation dataset (default <out>/val.sgds)");
  app.add_option("--data", c.data, "evaluation dataset (default <out>/val.sgds)");
  app.add_option("--checkpoint", c.checkpoint, "model checkpoint (default <out>/<variant>.best.sgtr)");
  app.add_option("--validation-size", c.validation_size, "validation samples (0: automatic)");
  app.add_flag("--drop-incomplete-neighbors", c.drop_incomplete_neighbors,
               "drop neighbors without full history instead of skipping the frame");

  app.add_option("--epochs", c.epochs)->capture_default_str();
  app.add_option("--batch", c.batch)->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--lr", c.lr)->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--clip-norm", c.clip_norm, "global gradient norm limit (0: off)")->capture_default_str();
  app.add_flag("--resume,!--no-resume", c.resume, "continue from <out>/<variant>.last.sgtr if present");
  app.add_option("--emb-dim", c.emb_dim)->capture_default_str();
  app.add_option("--gru-hidden", c.gru_hidden)->capture_default_str();
  app.add_option("--gat-head-dim", c.gat_head_dim)->capture_default_str();
  app.add_option("--dec-hidden", c.dec_hidden)->capture_default_str();
  app.add_option("--lateral-scale", c.lateral_scale)->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--longitudinal-scale", c.longitudinal_scale)->check(CLI::PositiveNumber)->capture_default_str();

  using Command = void (*)(const RunConfig&, const std::string&, OutputSet&, std::ostream&);
  std::map<CLI::App*, Command> commands;
  auto sub = [&](const char* name, const char* help, Command fn) {
    CLI::App* s = app.add_subcommand(name, help);
    s->fallthrough();
    commands[s] = fn;
  };
  sub("preprocess", "build train/validation datasets", cmd_preprocess);
  sub("train", "train a model variant", cmd_train);
  sub("evaluate", "score a checkpoint against the constant-velocity baseline", cmd_evaluate);
  sub("predict", "write predicted trajectories", cmd_predict);
  sub("baseline", "score the constant-velocity baseline", cmd_baseline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  OutputSet outs;
  try {
    const std::string config_text = app.config_to_str(true, false);
    for (const auto& [s, fn] : commands)
      if (s->parsed()) fn(c, config_text, outs, out);
    outs.keep();
    return 0;
  } catch (const std::exception& e) {
    outs.discard();
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sgtraj::cli
