#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "attnet/attention.hpp"
#include "attnet/model.hpp"
#include "attnet/synthdata.hpp"
#include "attnet/tensor.hpp"

// On-disk formats:
//   .tns       "TNS1" magic, u32 LE rank, rank x u32 LE extents, f32 LE values
//   .pgm       binary P5, maxval 255; mask foreground iff value >= 128
//   dataset/   spec.json, NNNN_img.tns, NNNN_mask.pgm, centers.csv,
//              maps/<kind>/{params.json, NNNN_map.tns[, NNNN_map.pgm]}
//   checkpoint/ manifest.json + tensors/<name>.tns

namespace attnet::io {

void write_tensor(const std::string& path, const TensorPtr<float>& t);
TensorPtr<float> read_tensor(const std::string& path);

void write_mask_pgm(const std::string& path, const attention::Mask& m);
attention::Mask read_mask_pgm(const std::string& path);

// Grayscale preview: value -> round(value*255).
void write_map_pgm(const std::string& path, const attention::AttentionMap& m);

TensorPtr<float> map_to_tensor(const attention::AttentionMap& m);  // rank-2 {H',W'}

std::string synth_spec_to_json(const synth::SynthSpec& s);
synth::SynthSpec synth_spec_from_json(const std::string& text);

struct Dataset {
  synth::SynthSpec spec;
  std::vector<synth::Sample> samples;
};

// Overwrites files in place; callers decide the non-empty-directory policy.
void write_dataset(const std::string& dir, const synth::SynthSpec& spec,
                   const std::vector<synth::Sample>& samples);
Dataset read_dataset(const std::string& dir);

struct MapSetParams {
  std::string kind;
  int factor = 4;
  double sigma = 2.0;
  std::string metric = "chebyshev";
};

void write_map_params(const std::string& dir, const MapSetParams& p);
MapSetParams read_map_params(const std::string& dir);
std::string map_tensor_path(const std::string& dataset_dir, const std::string& kind, int index);

struct Checkpoint {
  model::ModelConfig config;
  std::string mode;         // tnet | baseline
  std::string supervision;  // shape | contour | center | none
  std::string task;         // segmentation | localization
  double train_fraction = 0.8;
  uint64_t seed = 0;
  std::string dataset;  // path echo
  model::EncoderState<float> encoder;
  std::optional<model::SegDecoderState<float>> seg;
  std::optional<model::LocHeadState<float>> loc;
};

void save_checkpoint(const std::string& dir, const Checkpoint& ck);
// Throws with the offending tensor's name on any shape mismatch.
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace attnet::io
