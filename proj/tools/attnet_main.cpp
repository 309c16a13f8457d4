// attnet: dataset synthesis, attention-map generation, the two training
// regimes, evaluation, the supervision ablation and the gradient checker,
// glued together behind one binary. Exit codes: 0 success, 1 usage error,
// 2 runtime/numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "attnet/attention.hpp"
#include "attnet/gradcheck.hpp"
#include "attnet/io.hpp"
#include "attnet/kernels.hpp"
#include "attnet/metrics.hpp"
#include "attnet/synthdata.hpp"
#include "attnet/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace attnet;

namespace {

std::string in_ws(const std::string& ws, const std::string& p) {
  fs::path pp(p);
  if (pp.is_absolute()) return p;
  return (fs::path(ws) / pp).lexically_normal().string();
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t from = 0;
  while (from <= s.size()) {
    const size_t at = s.find(',', from);
    const std::string item = s.substr(from, at == std::string::npos ? at : at - from);
    if (!item.empty()) out.push_back(item);
    if (at == std::string::npos) break;
    from = at + 1;
  }
  return out;
}

// Pre-parse config handling: a JSON file may supply defaults per command
// ({"synth": {"count": 500}, "workspace": "runs/a"}); flags override because
// the values are installed before CLI11 parses.
json load_config(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) path = argv[i + 1];
    else if (a.rfind("--config=", 0) == 0) path = a.substr(9);
  }
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config file not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config file " + path + ": not a JSON object");
  return j;
}

template <typename T>
void cfg_get(const json& cfg, const char* section, const char* key, T& var) {
  if (!cfg.contains(section)) return;
  const json& s = cfg.at(section);
  if (s.is_object() && s.contains(key)) var = s.at(key).get<T>();
}

void print_report(const metrics::EvalReport& rep, train::Task task, const char* split) {
  if (task == train::Task::segmentation)
    std::printf("%-6s  dice %.4f  hd95 %.3f  s %.4f  (n=%lld)\n", split, rep.dice[0],
                rep.hausdorff95[0], rep.s, static_cast<long long>(rep.n));
  else
    std::printf("%-6s  ed %.3f px  (n=%lld)\n", split, rep.ed, static_cast<long long>(rep.n));
}

struct MapFlags {
  std::string dataset = "dataset";
  std::string kind;
  int factor = 4;
  double sigma = 2.0;
  std::string metric = "chebyshev";
  bool previews = false;
};

struct TrainFlags {
  std::string dataset = "dataset", out = "ckpt", runs = "runs.jsonl";
  std::string mode = "tnet", supervision = "shape", task = "segmentation";
  int encoder_epochs = 30, posterior_epochs = 20, batch_size = 8;
  double lr = 1e-3, train_fraction = 0.8;
  uint64_t seed = 1;
};

// Dataset split + on-disk supervision maps for the train side. The split
// is keyed by the dataset's own seed, so every command that mentions the
// same dataset sees the same train/test membership.
train::TrainData load_train_data(const io::Dataset& ds, const std::string& dataset_dir,
                                 train::ExperimentSpec& spec) {
  train::TrainData d;
  auto [ti, si] = synth::split_indices(static_cast<int>(ds.samples.size()),
                                       spec.train_fraction, ds.spec.seed);
  for (int i : ti) d.train.push_back(ds.samples[static_cast<size_t>(i)]);
  for (int i : si) d.test.push_back(ds.samples[static_cast<size_t>(i)]);
  if (spec.mode != train::Mode::tnet) return d;

  const std::string kind = train::supervision_name(spec.supervision);
  const fs::path map_dir = fs::path(dataset_dir) / "maps" / kind;
  const std::string hint = "; generate them first: attnet genmaps --dataset " + dataset_dir +
                           " --kind " + kind;
  if (!fs::exists(map_dir / "params.json"))
    throw std::invalid_argument("no " + kind + " maps under " + map_dir.string() + hint);
  const io::MapSetParams mp = io::read_map_params(map_dir.string());
  if (mp.factor != 4)
    throw std::invalid_argument("maps under " + map_dir.string() + " use factor " +
                                std::to_string(mp.factor) +
                                ", but the encoder emits supervision at factor 4" + hint);
  spec.map_params.sigma = mp.sigma;
  spec.map_params.metric = attention::metric_from_name(mp.metric);
  const int hm = ds.spec.size / 4;
  for (int i : ti) {
    const std::string path = io::map_tensor_path(dataset_dir, kind, i);
    if (!fs::exists(path)) throw std::invalid_argument("missing map file " + path + hint);
    auto t = io::read_tensor(path);
    if (t->rank() != 2 || t->dim(0) != hm || t->dim(1) != hm)
      throw std::runtime_error("map file " + path + " has shape " + shape_str(t->shape) +
                               ", expected {" + std::to_string(hm) + "," + std::to_string(hm) +
                               "}");
    d.train_maps.push_back(t);
  }
  return d;
}

io::Dataset open_dataset(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "spec.json"))
    throw std::invalid_argument("dataset not found at " + dir + " (no spec.json)");
  return io::read_dataset(dir);
}

}  // namespace

int main(int argc, char** argv) {
  json cfg;
  int rc = 0;
  try {
    cfg = load_config(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  std::string workspace = ".";
  int threads = 0;
  std::string config_path;
  if (cfg.contains("workspace")) workspace = cfg.at("workspace").get<std::string>();
  if (cfg.contains("threads")) threads = cfg.at("threads").get<int>();

  CLI::App app{"attention-supervised encoder: data, training, ablation"};
  app.require_subcommand(1);
  app.fallthrough();
  // Callbacks run once the whole command line is consumed, so the final
  // --threads value is in place by the time any of them starts.
  auto apply_threads = [&] {
    if (threads > 0) kernels::set_threads(threads);
  };
  app.add_option("--workspace", workspace, "directory all relative paths resolve against")
      ->capture_default_str();
  app.add_option("--threads", threads, "OpenMP thread cap (0 = library default)")
      ->capture_default_str();
  app.add_option("--config", config_path, "JSON file with per-command flag defaults");

  // ---- synth ----------------------------------------------------------
  synth::SynthSpec sspec;
  std::string synth_out = "dataset", synth_family = "ellipse";
  bool synth_force = false;
  cfg_get(cfg, "synth", "out", synth_out);
  cfg_get(cfg, "synth", "seed", sspec.seed);
  cfg_get(cfg, "synth", "count", sspec.count);
  cfg_get(cfg, "synth", "size", sspec.size);
  cfg_get(cfg, "synth", "family", synth_family);
  cfg_get(cfg, "synth", "radius_min", sspec.radius_min);
  cfg_get(cfg, "synth", "radius_max", sspec.radius_max);
  cfg_get(cfg, "synth", "noise_sigma", sspec.noise_sigma);
  cfg_get(cfg, "synth", "fg_mean", sspec.fg_mean);
  cfg_get(cfg, "synth", "bg_mean", sspec.bg_mean);
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--out", synth_out, "dataset directory")->capture_default_str();
  synth_cmd->add_option("--seed", sspec.seed)->capture_default_str();
  synth_cmd->add_option("--count", sspec.count)->capture_default_str();
  synth_cmd->add_option("--size", sspec.size)->capture_default_str();
  synth_cmd->add_option("--family", synth_family, "ellipse | rectangle | blob")
      ->capture_default_str();
  synth_cmd->add_option("--radius-min", sspec.radius_min)->capture_default_str();
  synth_cmd->add_option("--radius-max", sspec.radius_max)->capture_default_str();
  synth_cmd->add_option("--noise-sigma", sspec.noise_sigma)->capture_default_str();
  synth_cmd->add_option("--fg-mean", sspec.fg_mean)->capture_default_str();
  synth_cmd->add_option("--bg-mean", sspec.bg_mean)->capture_default_str();
  synth_cmd->add_flag("--force", synth_force, "overwrite a non-empty output directory");
  synth_cmd->callback([&] {
    apply_threads();
    sspec.family = synth::family_from_name(synth_family);
    sspec.validate();
    const std::string dir = in_ws(workspace, synth_out);
    if (fs::exists(dir) && !fs::is_empty(dir) && !synth_force)
      throw std::invalid_argument("output directory " + dir +
                                  " is not empty (pass --force to overwrite)");
    const auto samples = synth::generate(sspec);
    io::write_dataset(dir, sspec, samples);
    std::printf("wrote %d %s samples (%dx%d, seed %llu) to %s\n", sspec.count,
                synth::family_name(sspec.family).c_str(), sspec.size, sspec.size,
                static_cast<unsigned long long>(sspec.seed), dir.c_str());
  });

  // ---- genmaps --------------------------------------------------------
  MapFlags mf;
  cfg_get(cfg, "genmaps", "dataset", mf.dataset);
  cfg_get(cfg, "genmaps", "kind", mf.kind);
  cfg_get(cfg, "genmaps", "factor", mf.factor);
  cfg_get(cfg, "genmaps", "sigma", mf.sigma);
  cfg_get(cfg, "genmaps", "metric", mf.metric);
  auto* gen_cmd = app.add_subcommand("genmaps", "derive attention maps from the dataset masks");
  gen_cmd->add_option("--dataset", mf.dataset)->capture_default_str();
  gen_cmd->add_option("--kind", mf.kind, "shape | contour | center")->required();
  gen_cmd->add_option("--factor", mf.factor, "downsampling factor")->capture_default_str();
  gen_cmd->add_option("--sigma", mf.sigma, "contour blur width, map pixels")
      ->capture_default_str();
  gen_cmd->add_option("--metric", mf.metric, "center maps: euclidean | chebyshev")
      ->capture_default_str();
  gen_cmd->add_flag("--previews", mf.previews, "also write PGM previews");
  gen_cmd->callback([&] {
    apply_threads();
    const auto kind = attention::kind_from_name(mf.kind);
    const auto metric = attention::metric_from_name(mf.metric);
    const std::string dir = in_ws(workspace, mf.dataset);
    const io::Dataset ds = open_dataset(dir);
    fs::create_directories(fs::path(dir) / "maps" / mf.kind);
    int zero_warnings = 0;
    for (int i = 0; i < ds.spec.count; ++i) {
      const auto& mask = ds.samples[static_cast<size_t>(i)].mask;
      attention::AttentionMap m;
      switch (kind) {
        case attention::MapKind::shape: m = attention::shape_map(mask, mf.factor); break;
        case attention::MapKind::contour: {
          bool all_zero = false;
          m = attention::contour_map(mask, mf.factor, mf.sigma, &all_zero);
          zero_warnings += all_zero;
          break;
        }
        case attention::MapKind::center: m = attention::center_map(mask, mf.factor, metric); break;
      }
      const std::string tns = io::map_tensor_path(dir, mf.kind, i);
      io::write_tensor(tns, io::map_to_tensor(m));
      if (mf.previews)
        io::write_map_pgm(tns.substr(0, tns.size() - 4) + ".pgm", m);
    }
    io::write_map_params((fs::path(dir) / "maps" / mf.kind).string(),
                         io::MapSetParams{mf.kind, mf.factor, mf.sigma, mf.metric});
    if (zero_warnings > 0)
      std::fprintf(stderr, "warning: %d all-zero masks produced all-zero maps\n", zero_warnings);
    std::printf("wrote %d %s maps (factor %d) under %s/maps/%s\n", ds.spec.count,
                mf.kind.c_str(), mf.factor, dir.c_str(), mf.kind.c_str());
  });

  // ---- train ----------------------------------------------------------
  TrainFlags tf;
  cfg_get(cfg, "train", "dataset", tf.dataset);
  cfg_get(cfg, "train", "out", tf.out);
  cfg_get(cfg, "train", "runs", tf.runs);
  cfg_get(cfg, "train", "mode", tf.mode);
  cfg_get(cfg, "train", "supervision", tf.supervision);
  cfg_get(cfg, "train", "task", tf.task);
  cfg_get(cfg, "train", "encoder_epochs", tf.encoder_epochs);
  cfg_get(cfg, "train", "posterior_epochs", tf.posterior_epochs);
  cfg_get(cfg, "train", "batch_size", tf.batch_size);
  cfg_get(cfg, "train", "lr", tf.lr);
  cfg_get(cfg, "train", "train_fraction", tf.train_fraction);
  cfg_get(cfg, "train", "seed", tf.seed);
  auto* train_cmd = app.add_subcommand("train", "run one training experiment");
  train_cmd->add_option("--dataset", tf.dataset)->capture_default_str();
  train_cmd->add_option("--out", tf.out, "checkpoint directory")->capture_default_str();
  train_cmd->add_option("--runs", tf.runs, "run-record JSONL to append to")
      ->capture_default_str();
  train_cmd->add_option("--mode", tf.mode, "tnet | baseline")->capture_default_str();
  train_cmd->add_option("--supervision", tf.supervision, "shape | contour | center | none")
      ->capture_default_str();
  train_cmd->add_option("--task", tf.task, "segmentation | localization")
      ->capture_default_str();
  train_cmd->add_option("--encoder-epochs", tf.encoder_epochs)->capture_default_str();
  train_cmd->add_option("--posterior-epochs", tf.posterior_epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", tf.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", tf.lr)->capture_default_str();
  train_cmd->add_option("--train-fraction", tf.train_fraction)->capture_default_str();
  train_cmd->add_option("--seed", tf.seed)->capture_default_str();
  train_cmd->callback([&] {
    apply_threads();
    train::ExperimentSpec es;
    es.mode = train::mode_from_name(tf.mode);
    es.supervision = train::supervision_from_name(tf.supervision);
    es.task = train::task_from_name(tf.task);
    es.encoder_epochs = tf.encoder_epochs;
    es.posterior_epochs = tf.posterior_epochs;
    es.batch_size = tf.batch_size;
    es.lr = tf.lr;
    es.seed = tf.seed;
    es.train_fraction = tf.train_fraction;
    es.dataset = in_ws(workspace, tf.dataset);
    es.validate();
    const io::Dataset ds = open_dataset(es.dataset);
    const train::TrainData data = load_train_data(ds, es.dataset, es);

    auto out = train::run_experiment(es, data);
    {
      std::ofstream runs(in_ws(workspace, tf.runs), std::ios::app);
      if (!runs) throw std::runtime_error("cannot append to " + in_ws(workspace, tf.runs));
      runs << out.record.to_json_line() << "\n";
    }
    for (const auto& w : out.record.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (out.record.aborted) {
      std::fprintf(stderr, "training aborted: %s\n", out.record.abort_reason.c_str());
      rc = 2;
      return;
    }
    io::Checkpoint ck;
    ck.config = es.model;
    ck.mode = tf.mode;
    ck.supervision = tf.supervision;
    ck.task = tf.task;
    ck.train_fraction = es.train_fraction;
    ck.seed = es.seed;
    ck.dataset = es.dataset;
    ck.encoder = out.encoder;
    ck.seg = out.seg;
    ck.loc = out.loc;
    const std::string ck_dir = in_ws(workspace, tf.out);
    io::save_checkpoint(ck_dir, ck);

    if (!out.record.encoder_loss.empty()) {
      std::printf("encoder loss: first %.4f  last %.4f  (%zu epochs)\n",
                  out.record.encoder_loss.front(), out.record.encoder_loss.back(),
                  out.record.encoder_loss.size());
      // The padding channels pin the full loss above 1 - 1/N; report how
      // well the object channel alone fits its map.
      std::printf("object-channel fit loss: %.4f\n",
                  train::supervision_fit_loss(out.encoder, data, es.batch_size));
    }
    if (!out.record.posterior_loss.empty())
      std::printf("%s loss: first %.4f  last %.4f  (%zu epochs)\n",
                  es.mode == train::Mode::baseline ? "joint" : "posterior",
                  out.record.posterior_loss.front(), out.record.posterior_loss.back(),
                  out.record.posterior_loss.size());
    print_report(out.record.train_report, es.task, "train");
    print_report(out.record.test_report, es.task, "test");
    std::printf("checkpoint: %s  (%.1fs)\n", ck_dir.c_str(), out.record.wall_seconds);
  });

  // ---- eval -----------------------------------------------------------
  std::string ev_ckpt = "ckpt", ev_dataset, ev_split = "test", ev_out;
  int ev_batch = 8;
  cfg_get(cfg, "eval", "checkpoint", ev_ckpt);
  cfg_get(cfg, "eval", "dataset", ev_dataset);
  cfg_get(cfg, "eval", "split", ev_split);
  cfg_get(cfg, "eval", "batch_size", ev_batch);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (read-only)");
  eval_cmd->add_option("--checkpoint", ev_ckpt)->capture_default_str();
  eval_cmd->add_option("--dataset", ev_dataset, "defaults to the checkpoint's dataset");
  eval_cmd->add_option("--split", ev_split, "test | train | all")->capture_default_str();
  eval_cmd->add_option("--batch-size", ev_batch)->capture_default_str();
  eval_cmd->add_option("--out", ev_out, "also write the JSON report here");
  eval_cmd->callback([&] {
    apply_threads();
    if (ev_split != "test" && ev_split != "train" && ev_split != "all")
      throw std::invalid_argument("unknown split '" + ev_split + "' (valid: test, train, all)");
    const io::Checkpoint ck = io::load_checkpoint(in_ws(workspace, ev_ckpt));
    const std::string ds_dir = in_ws(workspace, ev_dataset.empty() ? ck.dataset : ev_dataset);
    const io::Dataset ds = open_dataset(ds_dir);
    std::vector<synth::Sample> subset;
    if (ev_split == "all") {
      subset = ds.samples;
    } else {
      auto [ti, si] = synth::split_indices(static_cast<int>(ds.samples.size()),
                                           ck.train_fraction, ds.spec.seed);
      for (int i : ev_split == "train" ? ti : si)
        subset.push_back(ds.samples[static_cast<size_t>(i)]);
    }
    const auto task = train::task_from_name(ck.task);
    std::vector<std::string> warnings;
    const auto rep = train::evaluate(ck.encoder, ck.seg, ck.loc, task, subset, ev_batch,
                                     &warnings);
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    print_report(rep, task, ev_split.c_str());
    json j;
    j["checkpoint"] = in_ws(workspace, ev_ckpt);
    j["dataset"] = ds_dir;
    j["split"] = ev_split;
    j["task"] = ck.task;
    j["report"] = json::parse(rep.to_json());
    std::printf("%s\n", j.dump().c_str());
    if (!ev_out.empty()) {
      std::ofstream f(in_ws(workspace, ev_out));
      f << j.dump(2) << "\n";
    }
  });

  // ---- ablation -------------------------------------------------------
  TrainFlags af;  // reuse the hyperparameter fields
  std::string ab_out = "ablation", ab_tasks = "segmentation,localization";
  std::string ab_sup = "none,shape,contour,center", ab_metric = "chebyshev";
  double ab_sigma = 2.0;
  bool ab_fresh = false;
  cfg_get(cfg, "ablation", "dataset", af.dataset);
  cfg_get(cfg, "ablation", "out", ab_out);
  cfg_get(cfg, "ablation", "tasks", ab_tasks);
  cfg_get(cfg, "ablation", "supervisions", ab_sup);
  cfg_get(cfg, "ablation", "encoder_epochs", af.encoder_epochs);
  cfg_get(cfg, "ablation", "posterior_epochs", af.posterior_epochs);
  cfg_get(cfg, "ablation", "batch_size", af.batch_size);
  cfg_get(cfg, "ablation", "lr", af.lr);
  cfg_get(cfg, "ablation", "train_fraction", af.train_fraction);
  cfg_get(cfg, "ablation", "seed", af.seed);
  cfg_get(cfg, "ablation", "sigma", ab_sigma);
  cfg_get(cfg, "ablation", "metric", ab_metric);
  auto* ab_cmd = app.add_subcommand("ablation", "supervision-kind grid with summary table");
  ab_cmd->add_option("--dataset", af.dataset)->capture_default_str();
  ab_cmd->add_option("--out", ab_out, "output directory")->capture_default_str();
  ab_cmd->add_option("--tasks", ab_tasks, "comma list")->capture_default_str();
  ab_cmd->add_option("--supervisions", ab_sup, "comma list; none = baseline row")
      ->capture_default_str();
  ab_cmd->add_option("--encoder-epochs", af.encoder_epochs)->capture_default_str();
  ab_cmd->add_option("--posterior-epochs", af.posterior_epochs)->capture_default_str();
  ab_cmd->add_option("--batch-size", af.batch_size)->capture_default_str();
  ab_cmd->add_option("--lr", af.lr)->capture_default_str();
  ab_cmd->add_option("--train-fraction", af.train_fraction)->capture_default_str();
  ab_cmd->add_option("--seed", af.seed)->capture_default_str();
  ab_cmd->add_option("--sigma", ab_sigma, "contour supervision blur width")
      ->capture_default_str();
  ab_cmd->add_option("--metric", ab_metric, "center supervision metric")->capture_default_str();
  ab_cmd->add_flag("--fresh", ab_fresh, "ignore and discard previous runs.jsonl");
  ab_cmd->callback([&] {
    apply_threads();
    const std::string ds_dir = in_ws(workspace, af.dataset);
    const io::Dataset ds = open_dataset(ds_dir);
    const std::string out_dir = in_ws(workspace, ab_out);
    fs::create_directories(out_dir);
    const std::string runs_path = (fs::path(out_dir) / "runs.jsonl").string();
    if (ab_fresh) fs::remove(runs_path);

    std::vector<train::ExperimentSpec> grid;
    for (const auto& sup : split_csv(ab_sup))
      for (const auto& task : split_csv(ab_tasks)) {
        train::ExperimentSpec es;
        es.supervision = train::supervision_from_name(sup);
        es.mode = es.supervision == train::Supervision::none ? train::Mode::baseline
                                                             : train::Mode::tnet;
        es.task = train::task_from_name(task);
        es.encoder_epochs = af.encoder_epochs;
        es.posterior_epochs = af.posterior_epochs;
        es.batch_size = af.batch_size;
        es.lr = af.lr;
        es.seed = af.seed;
        es.train_fraction = af.train_fraction;
        es.dataset = ds_dir;
        es.map_params.sigma = ab_sigma;
        es.map_params.metric = attention::metric_from_name(ab_metric);
        es.validate();
        grid.push_back(es);
      }
    if (grid.empty()) throw std::invalid_argument("empty grid: no tasks or supervisions left");

    train::AblationOptions opt;
    opt.runs_path = runs_path;
    opt.resume = !ab_fresh;
    const auto records = train::run_ablation(
        grid, [&](const train::ExperimentSpec& es) { return prepare_data(es, ds.samples,
                                                                         ds.spec.seed); },
        opt);

    const std::string table = train::ablation_table(records);
    std::printf("%s", table.c_str());
    std::ofstream(fs::path(out_dir) / "summary.txt") << table;
    std::ofstream(fs::path(out_dir) / "summary.csv") << train::ablation_csv(records);
    int failed = 0;
    for (const auto& r : records)
      if (r.aborted) {
        std::fprintf(stderr, "cell %s/%s failed: %s\n",
                     train::supervision_name(r.spec.supervision).c_str(),
                     train::task_name(r.spec.task).c_str(), r.abort_reason.c_str());
        ++failed;
      }
    if (failed > 0) rc = 2;
  });

  // ---- gradcheck ------------------------------------------------------
  int gc_seeds = 5, gc_coords = 3;
  uint64_t gc_base = 1;
  gradcheck::CheckConfig gc_cfg;
  bool gc_ops_only = false, gc_model_only = false;
  cfg_get(cfg, "gradcheck", "seeds", gc_seeds);
  cfg_get(cfg, "gradcheck", "seed_base", gc_base);
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc_cmd->add_option("--seeds", gc_seeds, "number of seeds")->capture_default_str();
  gc_cmd->add_option("--seed-base", gc_base, "first seed")->capture_default_str();
  gc_cmd->add_option("--tol", gc_cfg.rel_tol)->capture_default_str();
  gc_cmd->add_option("--floor", gc_cfg.abs_floor)->capture_default_str();
  gc_cmd->add_option("--step", gc_cfg.step)->capture_default_str();
  gc_cmd->add_option("--coords", gc_coords, "coordinates per tensor in the model suite")
      ->capture_default_str();
  gc_cmd->add_flag("--ops-only", gc_ops_only, "skip the whole-network suite");
  gc_cmd->add_flag("--model-only", gc_model_only, "skip the per-op suite");
  gc_cmd->callback([&] {
    apply_threads();
    if (gc_seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
    if (gc_ops_only && gc_model_only)
      throw std::invalid_argument("--ops-only and --model-only exclude each other");
    bool all = true;
    for (int i = 0; i < gc_seeds; ++i) {
      const uint64_t seed = gc_base + static_cast<uint64_t>(i);
      std::printf("seed %llu  (tol %.1e, floor %.1e, step %.1e)\n",
                  static_cast<unsigned long long>(seed), gc_cfg.rel_tol, gc_cfg.abs_floor,
                  gc_cfg.step);
      if (!gc_model_only) {
        const auto suite = gradcheck::run_builtin_suite(seed, gc_cfg);
        std::printf("%s", gradcheck::format_results(suite).c_str());
        all = all && suite.all_pass;
      }
      if (!gc_ops_only) {
        gradcheck::CheckConfig mc = gc_cfg;
        mc.max_coords_per_tensor = gc_coords;
        const auto suite = gradcheck::run_model_suite(seed, mc);
        std::printf("%s", gradcheck::format_results(suite).c_str());
        all = all && suite.all_pass;
      }
    }
    if (!all) {
      std::fprintf(stderr, "gradient check failed\n");
      rc = 2;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
