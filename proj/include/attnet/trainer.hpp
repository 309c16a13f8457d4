#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "attnet/attention.hpp"
#include "attnet/metrics.hpp"
#include "attnet/model.hpp"
#include "attnet/synthdata.hpp"

// Training orchestration: the two-stage regime (encoder against attention
// maps, then a posterior head on the frozen encoder's features) and the
// joint end-to-end baseline, plus the supervision-ablation grid.

namespace attnet::train {

enum class Mode { tnet, baseline };
enum class Supervision { shape, contour, center, none };
enum class Task { segmentation, localization };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& s);
std::string supervision_name(Supervision s);
Supervision supervision_from_name(const std::string& s);
std::string task_name(Task t);
Task task_from_name(const std::string& s);

struct ExperimentSpec {
  Mode mode = Mode::tnet;
  Supervision supervision = Supervision::shape;
  Task task = Task::segmentation;
  int encoder_epochs = 30;
  int posterior_epochs = 20;
  int batch_size = 8;
  double lr = 1e-3;
  uint64_t seed = 1;
  double train_fraction = 0.8;
  std::string dataset;  // path echo; may be empty for in-memory runs
  model::ModelConfig model;
  attention::MapParams map_params;

  void validate() const;  // baseline requires supervision none, etc.
};

struct TrainData {
  std::vector<synth::Sample> train, test;
  // One {H',W'} supervision map per train sample (tnet mode only).
  std::vector<TensorPtr<float>> train_maps;
};

// Split the dataset with its own seed and, in tnet mode, generate the
// supervision maps in memory for the spec's kind.
TrainData prepare_data(const ExperimentSpec& spec, const std::vector<synth::Sample>& all,
                       uint64_t dataset_seed);

struct RunRecord {
  ExperimentSpec spec;
  std::vector<double> encoder_loss;    // per epoch
  std::vector<double> posterior_loss;  // per epoch (baseline: joint loss)
  metrics::EvalReport train_report, test_report;
  std::vector<std::string> warnings;
  bool aborted = false;
  std::string abort_reason;
  double wall_seconds = 0.0;

  std::string to_json_line() const;
  static RunRecord from_json_line(const std::string& line);
  // Identity of the grid cell (everything but timings/results); used to
  // skip completed cells on resume.
  std::string cell_key() const;
};

struct EncoderResult {
  model::EncoderState<float> state;
  std::vector<double> loss_curve;
  bool aborted = false;
  std::string abort_reason;
};

struct PosteriorResult {
  std::optional<model::SegDecoderState<float>> seg;
  std::optional<model::LocHeadState<float>> loc;
  std::vector<double> loss_curve;
  bool aborted = false;
  std::string abort_reason;
};

// Stage 1: optimize the encoder's supervision output against the attention
// maps with the dice loss. Requires mode == tnet and data.train_maps.
EncoderResult train_encoder(const ExperimentSpec& spec, const TrainData& data);

// Stage 2: train the task head on features cached from the (untouched)
// encoder. The encoder tensors are bit-identical before and after.
PosteriorResult train_posterior(const ExperimentSpec& spec,
                                const model::EncoderState<float>& encoder,
                                const TrainData& data);

struct BaselineResult {
  model::EncoderState<float> encoder;
  PosteriorResult posterior;
};

// Joint end-to-end optimization for encoder_epochs + posterior_epochs
// epochs (same optimizer-step budget as the two stages combined).
BaselineResult train_baseline(const ExperimentSpec& spec, const TrainData& data);

// Dice loss of the object channel (channel 0 of the supervision output)
// against the attention maps, over data.train. The padding channels are
// trained toward zero but score dice 0 under the empty-empty convention, so
// the full training loss plateaus at 1 - 1/N no matter how good the fit is;
// this measures the fit alone.
double supervision_fit_loss(const model::EncoderState<float>& encoder, const TrainData& data,
                            int batch_size);

// Threshold segmentation channel 0 at 0.5 / scale localization output by
// (W,H); aggregates per-sample metrics. Samples where the predicted mask is
// empty contribute the image diagonal as their Hausdorff penalty and are
// reported through `warnings`.
metrics::EvalReport evaluate(const model::EncoderState<float>& encoder,
                             const std::optional<model::SegDecoderState<float>>& seg,
                             const std::optional<model::LocHeadState<float>>& loc, Task task,
                             const std::vector<synth::Sample>& samples, int batch_size,
                             std::vector<std::string>* warnings = nullptr);

struct RunOutput {
  RunRecord record;
  model::EncoderState<float> encoder;
  std::optional<model::SegDecoderState<float>> seg;
  std::optional<model::LocHeadState<float>> loc;
};

// Full pipeline for one spec: stages (or baseline), evaluation on both
// splits, soft loss-trend check, wall time.
RunOutput run_experiment(const ExperimentSpec& spec, const TrainData& data);

struct AblationOptions {
  std::string runs_path;  // runs.jsonl; empty disables persistence/resume
  bool resume = true;
};

// One record per grid cell; failures are recorded and the grid continues.
// With a runs_path, completed cells found there are reused.
std::vector<RunRecord> run_ablation(
    const std::vector<ExperimentSpec>& grid,
    const std::function<TrainData(const ExperimentSpec&)>& data_for,
    const AblationOptions& options);

// Fixed-width summary, rows = supervision kind, columns = per-task metric.
std::string ablation_table(const std::vector<RunRecord>& records);
std::string ablation_csv(const std::vector<RunRecord>& records);

}  // namespace attnet::train
