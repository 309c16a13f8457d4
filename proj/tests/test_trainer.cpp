#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "attnet/losses.hpp"
#include "attnet/model.hpp"
#include "attnet/trainer.hpp"

using namespace attnet;
using train::ExperimentSpec;
namespace fs = std::filesystem;

namespace {

synth::SynthSpec tiny_data_spec() {
  synth::SynthSpec s;
  s.count = 20;
  s.size = 16;
  // radius >= 3 > 2*sqrt(2): every object covers a factor-4 lattice point,
  // so even the smallest one survives downsampling.
  s.radius_min = 3.0;
  s.radius_max = 4.0;
  return s;
}

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.encoder_epochs = 4;
  spec.posterior_epochs = 4;
  spec.batch_size = 8;
  spec.model.growth_rate = 2;
  spec.model.bottleneck_channels = 2;
  spec.model.layers_per_block = 4;
  spec.model.level_channels = {4, 6, 14};
  return spec;
}

std::vector<float> flatten(const model::EncoderState<float>& s) {
  std::vector<float> all;
  for (const auto& [name, t] : model::named_params(s))
    all.insert(all.end(), t->data.begin(), t->data.end());
  return all;
}

int count_lines(const std::string& path) {
  std::ifstream in(path);
  int n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_CASE("name round-trips") {
  using namespace train;
  for (auto m : {Mode::tnet, Mode::baseline}) CHECK(mode_from_name(mode_name(m)) == m);
  for (auto s : {Supervision::shape, Supervision::contour, Supervision::center,
                 Supervision::none})
    CHECK(supervision_from_name(supervision_name(s)) == s);
  for (auto t : {Task::segmentation, Task::localization})
    CHECK(task_from_name(task_name(t)) == t);
  CHECK_THROWS_AS(mode_from_name("hybrid"), std::invalid_argument);
}

TEST_CASE("spec validation ties mode and supervision together") {
  ExperimentSpec spec = tiny_spec();
  CHECK_NOTHROW(spec.validate());

  ExperimentSpec b = spec;
  b.mode = train::Mode::baseline;
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);  // needs supervision none
  b.supervision = train::Supervision::none;
  CHECK_NOTHROW(b.validate());

  ExperimentSpec t = spec;
  t.supervision = train::Supervision::none;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);  // tnet needs a map kind

  ExperimentSpec e = spec;
  e.encoder_epochs = 0;  // zero epochs = skip the stage, allowed
  CHECK_NOTHROW(e.validate());
  e.encoder_epochs = -1;
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
  e.encoder_epochs = 1;
  e.batch_size = 0;
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
}

TEST_CASE("prepare_data splits deterministically and builds aligned maps") {
  auto all = synth::generate(tiny_data_spec());
  ExperimentSpec spec = tiny_spec();
  spec.supervision = train::Supervision::center;

  auto d1 = train::prepare_data(spec, all, 5);
  auto d2 = train::prepare_data(spec, all, 5);
  CHECK(d1.train.size() == 16);
  CHECK(d1.test.size() == 4);
  REQUIRE(d1.train_maps.size() == d1.train.size());

  for (size_t i = 0; i < d1.train.size(); ++i) {
    CHECK(d1.train[i].mask.values == d2.train[i].mask.values);
    CHECK(d1.train_maps[i]->data == d2.train_maps[i]->data);
    // Each map is the transform of its own sample's mask.
    auto want = attention::center_map(d1.train[i].mask, 4, spec.map_params.metric);
    CHECK(d1.train_maps[i]->shape == Shape{4, 4});
    CHECK(d1.train_maps[i]->data == want.values);
  }

  auto d3 = train::prepare_data(spec, all, 6);
  bool same = true;
  for (size_t i = 0; i < d1.train.size(); ++i)
    if (d1.train[i].image->data != d3.train[i].image->data) same = false;
  CHECK_FALSE(same);

  ExperimentSpec base = tiny_spec();
  base.mode = train::Mode::baseline;
  base.supervision = train::Supervision::none;
  auto db = train::prepare_data(base, all, 5);
  CHECK(db.train_maps.empty());
}

TEST_CASE("encoder training reduces its loss and stays finite") {
  auto all = synth::generate(tiny_data_spec());
  ExperimentSpec spec = tiny_spec();
  spec.encoder_epochs = 8;
  auto data = train::prepare_data(spec, all, spec.seed);

  auto res = train::train_encoder(spec, data);
  CHECK_FALSE(res.aborted);
  REQUIRE(res.loss_curve.size() == 8);
  for (double l : res.loss_curve) CHECK(std::isfinite(l));
  CHECK(res.loss_curve.back() < res.loss_curve.front());
}

TEST_CASE("encoder training is seed-deterministic") {
  auto all = synth::generate(tiny_data_spec());
  ExperimentSpec spec = tiny_spec();
  spec.encoder_epochs = 2;
  auto data = train::prepare_data(spec, all, spec.seed);

  auto a = train::train_encoder(spec, data);
  auto b = train::train_encoder(spec, data);
  CHECK(flatten(a.state) == flatten(b.state));
  CHECK(a.loss_curve == b.loss_curve);
}

TEST_CASE("posterior training never touches the encoder") {
  auto all = synth::generate(tiny_data_spec());
  ExperimentSpec spec = tiny_spec();
  spec.encoder_epochs = 2;
  auto data = train::prepare_data(spec, all, spec.seed);
  auto enc = train::train_encoder(spec, data);

  const auto before = flatten(enc.state);
  auto post = train::train_posterior(spec, enc.state, data);
  CHECK(flatten(enc.state) == before);

  CHECK_FALSE(post.aborted);
  REQUIRE(post.seg.has_value());
  CHECK_FALSE(post.loc.has_value());
  REQUIRE(post.loss_curve.size() == 4);
  for (double l : post.loss_curve) CHECK(std::isfinite(l));

  ExperimentSpec locspec = spec;
  locspec.task = train::Task::localization;
  auto lp = train::train_posterior(locspec, enc.state, data);
  CHECK_FALSE(lp.seg.has_value());
  REQUIRE(lp.loc.has_value());
}

TEST_CASE("baseline consumes the combined epoch budget end to end") {
  auto all = synth::generate(tiny_data_spec());
  ExperimentSpec spec = tiny_spec();
  spec.mode = train::Mode::baseline;
  spec.supervision = train::Supervision::none;
  spec.encoder_epochs = 3;
  spec.posterior_epochs = 2;
  auto data = train::prepare_data(spec, all, spec.seed);

  auto res = train::train_baseline(spec, data);
  CHECK_FALSE(res.posterior.aborted);
  CHECK(res.posterior.loss_curve.size() == 5);

  // The encoder must actually have moved.
  Rng rng = substream(spec.seed, 0);
  auto init = model::init_encoder<float>(spec.model, rng);
  CHECK(flatten(res.encoder) != flatten(init));
}

TEST_CASE("a non-finite loss aborts with a diagnosis instead of looping") {
  auto all = synth::generate(tiny_data_spec());
  ExperimentSpec spec = tiny_spec();
  auto data = train::prepare_data(spec, all, spec.seed);
  // Poison a supervision target. (An image NaN would be scrubbed by the
  // first relu -- NaN fails every comparison -- and never reach the loss.)
  for (auto& v : data.train_maps[0]->data) v = std::nanf("");

  auto res = train::train_encoder(spec, data);
  CHECK(res.aborted);
  CHECK(res.abort_reason.find("non-finite") != std::string::npos);
  CHECK(res.loss_curve.size() < static_cast<size_t>(spec.encoder_epochs));
}

TEST_CASE("supervision_fit_loss strips the padding-channel floor") {
  auto all = synth::generate(tiny_data_spec());
  ExperimentSpec spec = tiny_spec();
  auto data = train::prepare_data(spec, all, spec.seed);
  auto enc = train::train_encoder(spec, data);
  REQUIRE(!enc.aborted);

  const double fit = train::supervision_fit_loss(enc.state, data, 1);
  CHECK(fit >= 0.0);
  CHECK(fit <= 1.0);

  // Recompute the full training loss by hand: channel 0 targets the map,
  // the other N-1 channels target all-zero planes and score dice 0, so
  // full = (1 - 1/N) + fit/N must hold exactly (same batching, batch 1).
  const int N = spec.model.bottleneck_channels;
  double full = 0.0;
  for (size_t i = 0; i < data.train.size(); ++i) {
    Graph<float> g;
    const auto& img = data.train[i].image;
    auto x = make_tensor<float>({1, 1, img->dim(1), img->dim(2)}, false);
    x->data = img->data;
    auto out = model::encoder_forward(g, enc.state, x);
    auto target = make_tensor<float>(out.supervision->shape, false);
    std::copy(data.train_maps[i]->data.begin(), data.train_maps[i]->data.end(),
              target->data.begin());
    full += losses::dice_loss(g, out.supervision, target, 1e-6f)->data[0];
  }
  full /= static_cast<double>(data.train.size());

  const double expected = (1.0 - 1.0 / N) + fit / N;
  CHECK(std::abs(full - expected) < 1e-4);
  CHECK(full > 1.0 - 1.0 / N - 1e-6);  // the floor is real

  CHECK_THROWS_AS(
      train::supervision_fit_loss(enc.state, train::TrainData{data.train, data.test, {}}, 1),
      std::invalid_argument);
}

TEST_CASE("evaluate flags empty predictions with the diagonal penalty") {
  auto all = synth::generate(tiny_data_spec());
  ExperimentSpec spec = tiny_spec();
  auto data = train::prepare_data(spec, all, spec.seed);

  Rng rng = substream(spec.seed, 0);
  auto enc = model::init_encoder<float>(spec.model, rng);
  auto seg = model::init_seg_decoder<float>(spec.model, rng);
  // Slam the head so every sigmoid lands near zero.
  std::fill(seg.head_w->data.begin(), seg.head_w->data.end(), 0.0f);
  std::fill(seg.head_b->data.begin(), seg.head_b->data.end(), -10.0f);

  std::vector<std::string> warnings;
  auto report = train::evaluate(enc, seg, std::nullopt, train::Task::segmentation,
                                data.test, spec.batch_size, &warnings);
  CHECK(report.n == int64_t(data.test.size()));
  CHECK_FALSE(warnings.empty());
  CHECK(report.dice[0] == doctest::Approx(0.0));
  CHECK(report.hausdorff95[0] == doctest::Approx(std::hypot(16.0, 16.0)));
}

TEST_CASE("run records serialize losslessly") {
  train::RunRecord rec;
  rec.spec = tiny_spec();
  rec.spec.supervision = train::Supervision::contour;
  rec.encoder_loss = {0.9, 0.5, 0.3};
  rec.posterior_loss = {0.8, 0.6};
  rec.train_report.dice = {0.95};
  rec.train_report.hausdorff95 = {1.5};
  rec.train_report.ed = 2.0;
  rec.train_report.n = 16;
  rec.test_report = rec.train_report;
  rec.warnings = {"loss not improving at epoch 3"};
  rec.wall_seconds = 12.5;

  auto back = train::RunRecord::from_json_line(rec.to_json_line());
  CHECK(back.spec.supervision == rec.spec.supervision);
  CHECK(back.spec.model.level_channels == rec.spec.model.level_channels);
  CHECK(back.encoder_loss == rec.encoder_loss);
  CHECK(back.posterior_loss == rec.posterior_loss);
  CHECK(back.train_report.dice == rec.train_report.dice);
  CHECK(back.warnings == rec.warnings);
  CHECK(back.aborted == false);
  CHECK(back.wall_seconds == doctest::Approx(12.5));

  // The cell key identifies the configuration, not the outcome.
  train::RunRecord other = rec;
  other.wall_seconds = 99.0;
  other.encoder_loss = {0.1};
  CHECK(other.cell_key() == rec.cell_key());
  other.spec.supervision = train::Supervision::shape;
  CHECK(other.cell_key() != rec.cell_key());
}

TEST_CASE("ablation grid persists, resumes, and reports") {
  auto all = synth::generate(tiny_data_spec());

  ExperimentSpec seg = tiny_spec();
  seg.encoder_epochs = 1;
  seg.posterior_epochs = 1;
  ExperimentSpec loc = seg;
  loc.task = train::Task::localization;

  auto data_for = [&](const ExperimentSpec& s) { return train::prepare_data(s, all, s.seed); };

  const std::string runs = (fs::temp_directory_path() / "attnet_runs_test.jsonl").string();
  std::remove(runs.c_str());

  train::AblationOptions opts;
  opts.runs_path = runs;
  auto first = train::run_ablation({seg, loc}, data_for, opts);
  REQUIRE(first.size() == 2);
  CHECK(count_lines(runs) == 2);

  // Resume: nothing new to compute, nothing new appended.
  auto again = train::run_ablation({seg, loc}, data_for, opts);
  REQUIRE(again.size() == 2);
  CHECK(count_lines(runs) == 2);
  CHECK(again[0].wall_seconds == doctest::Approx(first[0].wall_seconds));

  // A new cell only adds itself.
  ExperimentSpec contour = seg;
  contour.supervision = train::Supervision::contour;
  auto three = train::run_ablation({seg, loc, contour}, data_for, opts);
  REQUIRE(three.size() == 3);
  CHECK(count_lines(runs) == 3);
  std::remove(runs.c_str());
}

TEST_CASE("ablation table and csv formatting") {
  train::RunRecord ok;
  ok.spec = tiny_spec();
  ok.spec.supervision = train::Supervision::shape;
  ok.test_report.dice = {0.9512};
  ok.test_report.hausdorff95 = {1.25};
  ok.test_report.ed = 2.34;
  ok.test_report.n = 4;
  ok.test_report.recompute_s();

  train::RunRecord bad;
  bad.spec = tiny_spec();
  bad.spec.supervision = train::Supervision::center;
  bad.spec.task = train::Task::localization;
  bad.aborted = true;
  bad.abort_reason = "non-finite encoder loss";

  const std::string table = train::ablation_table({ok, bad});
  CHECK(table.find("Shape-Aware") != std::string::npos);
  CHECK(table.find("0.9512") != std::string::npos);
  CHECK(table.find("Center-Aware") != std::string::npos);
  CHECK(table.find("failed") != std::string::npos);

  const std::string csv = train::ablation_csv({ok, bad});
  CHECK(csv.rfind("supervision,task,dice,hausdorff95,ed,s,aborted", 0) == 0);
  CHECK(csv.find("\nshape,segmentation,") != std::string::npos);
  CHECK(csv.find("\ncenter,localization,") != std::string::npos);
}

TEST_CASE("full experiment produces a coherent record") {
  auto all = synth::generate(tiny_data_spec());
  ExperimentSpec spec = tiny_spec();
  spec.encoder_epochs = 2;
  spec.posterior_epochs = 2;
  auto data = train::prepare_data(spec, all, spec.seed);

  auto out = train::run_experiment(spec, data);
  CHECK_FALSE(out.record.aborted);
  CHECK(out.record.encoder_loss.size() == 2);
  CHECK(out.record.posterior_loss.size() == 2);
  CHECK(out.record.train_report.n == 16);
  CHECK(out.record.test_report.n == 4);
  CHECK(out.record.wall_seconds > 0.0);
  REQUIRE(out.seg.has_value());
  for (double d : out.record.test_report.dice) {
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}
