#include "attnet/io.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace attnet::io {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open for reading: " + path);
  return f;
}

void put_u32(std::ofstream& f, uint32_t v) {
  const std::array<unsigned char, 4> b = {static_cast<unsigned char>(v & 0xff),
                                          static_cast<unsigned char>((v >> 8) & 0xff),
                                          static_cast<unsigned char>((v >> 16) & 0xff),
                                          static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b.data()), 4);
}

uint32_t get_u32(std::ifstream& f, const std::string& path) {
  std::array<unsigned char, 4> b;
  if (!f.read(reinterpret_cast<char*>(b.data()), 4)) fail("truncated file: " + path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

std::string index_name(int index, const char* suffix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d%s", index, suffix);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  auto f = open_out(path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail("write failed: " + path);
}

std::string read_text(const std::string& path) {
  auto f = open_in(path);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return s;
}

}  // namespace

void write_tensor(const std::string& path, const TensorPtr<float>& t) {
  static_assert(sizeof(float) == 4);
  auto f = open_out(path);
  f.write("TNS1", 4);
  put_u32(f, static_cast<uint32_t>(t->rank()));
  for (int i = 0; i < t->rank(); ++i) put_u32(f, static_cast<uint32_t>(t->dim(i)));
  // Little-endian float payload; this code targets little-endian hosts.
  f.write(reinterpret_cast<const char*>(t->ptr()), t->size() * 4);
  if (!f) fail("write failed: " + path);
}

TensorPtr<float> read_tensor(const std::string& path) {
  auto f = open_in(path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "TNS1", 4) != 0)
    fail("not a TNS1 tensor file: " + path);
  const uint32_t rank = get_u32(f, path);
  if (rank == 0 || rank > 8) fail("implausible tensor rank " + std::to_string(rank) + ": " + path);
  Shape shape(rank);
  int64_t n = 1;
  for (auto& d : shape) {
    d = static_cast<int>(get_u32(f, path));
    if (d <= 0 || n > (int64_t(1) << 32)) fail("implausible tensor extents: " + path);
    n *= d;
  }
  auto t = make_tensor<float>(shape);
  if (!f.read(reinterpret_cast<char*>(t->ptr()), n * 4)) fail("truncated tensor payload: " + path);
  return t;
}

void write_mask_pgm(const std::string& path, const attention::Mask& m) {
  auto f = open_out(path);
  f << "P5\n" << m.width << " " << m.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(m.width));
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) row[static_cast<size_t>(x)] = m.at(y, x) ? 255 : 0;
    f.write(reinterpret_cast<const char*>(row.data()), m.width);
  }
  if (!f) fail("write failed: " + path);
}

namespace {

int pgm_next_int(std::ifstream& f, const std::string& path) {
  // Skips whitespace and '#' comment lines between header tokens.
  int c = f.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = f.get();
    c = f.get();
  }
  int v = 0;
  bool any = false;
  while (c >= '0' && c <= '9') {
    v = v * 10 + (c - '0');
    any = true;
    c = f.get();
  }
  if (!any) fail("malformed PGM header: " + path);
  return v;
}

}  // namespace

attention::Mask read_mask_pgm(const std::string& path) {
  auto f = open_in(path);
  char p, five;
  f.get(p);
  f.get(five);
  if (p != 'P' || five != '5') fail("not a binary P5 PGM: " + path);
  const int w = pgm_next_int(f, path);
  const int h = pgm_next_int(f, path);
  const int maxval = pgm_next_int(f, path);
  if (maxval != 255) fail("PGM maxval must be 255, got " + std::to_string(maxval) + ": " + path);
  // pgm_next_int consumed exactly one byte past the maxval token (the
  // single whitespace separating header from payload).
  attention::Mask m(w, h);
  std::vector<unsigned char> row(static_cast<size_t>(w));
  for (int y = 0; y < h; ++y) {
    if (!f.read(reinterpret_cast<char*>(row.data()), w)) fail("truncated PGM payload: " + path);
    for (int x = 0; x < w; ++x) m.at(y, x) = row[static_cast<size_t>(x)] >= 128 ? 1 : 0;
  }
  return m;
}

void write_map_pgm(const std::string& path, const attention::AttentionMap& m) {
  auto f = open_out(path);
  f << "P5\n" << m.width << " " << m.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(m.width));
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x)
      row[static_cast<size_t>(x)] =
          static_cast<unsigned char>(std::lround(m.at(y, x) * 255.0));
    f.write(reinterpret_cast<const char*>(row.data()), m.width);
  }
  if (!f) fail("write failed: " + path);
}

TensorPtr<float> map_to_tensor(const attention::AttentionMap& m) {
  auto t = make_tensor<float>({m.height, m.width});
  std::copy(m.values.begin(), m.values.end(), t->ptr());
  return t;
}

std::string synth_spec_to_json(const synth::SynthSpec& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["count"] = s.count;
  j["size"] = s.size;
  j["family"] = synth::family_name(s.family);
  j["radius_min"] = s.radius_min;
  j["radius_max"] = s.radius_max;
  j["noise_sigma"] = s.noise_sigma;
  j["fg_mean"] = s.fg_mean;
  j["bg_mean"] = s.bg_mean;
  return j.dump(2) + "\n";
}

synth::SynthSpec synth_spec_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  synth::SynthSpec s;
  s.seed = j.at("seed").get<uint64_t>();
  s.count = j.at("count").get<int>();
  s.size = j.at("size").get<int>();
  s.family = synth::family_from_name(j.at("family").get<std::string>());
  s.radius_min = j.at("radius_min").get<double>();
  s.radius_max = j.at("radius_max").get<double>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.fg_mean = j.at("fg_mean").get<double>();
  s.bg_mean = j.at("bg_mean").get<double>();
  return s;
}

void write_dataset(const std::string& dir, const synth::SynthSpec& spec,
                   const std::vector<synth::Sample>& samples) {
  fs::create_directories(dir);
  write_text(dir + "/spec.json", synth_spec_to_json(spec));
  std::string csv = "index,cx,cy\n";
  for (size_t i = 0; i < samples.size(); ++i) {
    const int idx = static_cast<int>(i);
    write_tensor(dir + "/" + index_name(idx, "_img.tns"), samples[i].image);
    write_mask_pgm(dir + "/" + index_name(idx, "_mask.pgm"), samples[i].mask);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d,%.6f,%.6f\n", idx, samples[i].cx, samples[i].cy);
    csv += buf;
  }
  write_text(dir + "/centers.csv", csv);
}

Dataset read_dataset(const std::string& dir) {
  Dataset d;
  d.spec = synth_spec_from_json(read_text(dir + "/spec.json"));

  std::ifstream csv(dir + "/centers.csv");
  if (!csv) fail("cannot open for reading: " + dir + "/centers.csv");
  std::string line;
  std::getline(csv, line);
  if (line != "index,cx,cy") fail("unexpected centers.csv header: " + dir);
  std::vector<std::pair<double, double>> centers;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    int idx;
    double cx, cy;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &idx, &cx, &cy) != 3)
      fail("malformed centers.csv row '" + line + "' in " + dir);
    centers.emplace_back(cx, cy);
  }
  if (static_cast<int>(centers.size()) != d.spec.count)
    fail("centers.csv has " + std::to_string(centers.size()) + " rows, spec.json says " +
         std::to_string(d.spec.count));

  d.samples.resize(static_cast<size_t>(d.spec.count));
  for (int i = 0; i < d.spec.count; ++i) {
    auto& s = d.samples[static_cast<size_t>(i)];
    s.image = read_tensor(dir + "/" + index_name(i, "_img.tns"));
    if (s.image->shape != Shape{1, d.spec.size, d.spec.size})
      fail("image " + index_name(i, "_img.tns") + " has shape " + shape_str(s.image->shape) +
           ", dataset size is " + std::to_string(d.spec.size));
    s.mask = read_mask_pgm(dir + "/" + index_name(i, "_mask.pgm"));
    if (s.mask.width != d.spec.size || s.mask.height != d.spec.size)
      fail("mask " + index_name(i, "_mask.pgm") + " dims mismatch dataset size");
    s.cx = centers[static_cast<size_t>(i)].first;
    s.cy = centers[static_cast<size_t>(i)].second;
  }
  return d;
}

void write_map_params(const std::string& dir, const MapSetParams& p) {
  nlohmann::json j;
  j["kind"] = p.kind;
  j["factor"] = p.factor;
  j["sigma"] = p.sigma;
  j["metric"] = p.metric;
  fs::create_directories(dir);
  write_text(dir + "/params.json", j.dump(2) + "\n");
}

MapSetParams read_map_params(const std::string& dir) {
  const auto j = nlohmann::json::parse(read_text(dir + "/params.json"));
  MapSetParams p;
  p.kind = j.at("kind").get<std::string>();
  p.factor = j.at("factor").get<int>();
  p.sigma = j.at("sigma").get<double>();
  p.metric = j.at("metric").get<std::string>();
  return p;
}

std::string map_tensor_path(const std::string& dataset_dir, const std::string& kind,
                            int index) {
  return dataset_dir + "/maps/" + kind + "/" + index_name(index, "_map.tns");
}

namespace {

nlohmann::json config_to_json(const model::ModelConfig& c) {
  nlohmann::json j;
  j["growth_rate"] = c.growth_rate;
  j["bottleneck_channels"] = c.bottleneck_channels;
  j["level_channels"] = c.level_channels;
  j["layers_per_block"] = c.layers_per_block;
  j["input_channels"] = c.input_channels;
  return j;
}

model::ModelConfig config_from_json(const nlohmann::json& j) {
  model::ModelConfig c;
  c.growth_rate = j.at("growth_rate").get<int>();
  c.bottleneck_channels = j.at("bottleneck_channels").get<int>();
  const auto lv = j.at("level_channels").get<std::vector<int>>();
  if (lv.size() != 3) fail("manifest level_channels must have 3 entries");
  std::copy(lv.begin(), lv.end(), c.level_channels.begin());
  c.layers_per_block = j.at("layers_per_block").get<int>();
  c.input_channels = j.at("input_channels").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& dir, const Checkpoint& ck) {
  fs::create_directories(dir + "/tensors");
  model::NamedParams<float> named;
  for (auto& [n, t] : model::named_params(ck.encoder)) named.emplace_back("encoder." + n, t);
  if (ck.seg)
    for (auto& [n, t] : model::named_params(*ck.seg)) named.emplace_back("posterior." + n, t);
  if (ck.loc)
    for (auto& [n, t] : model::named_params(*ck.loc)) named.emplace_back("posterior." + n, t);

  nlohmann::json j;
  j["format"] = "attnet-checkpoint-1";
  j["model"] = config_to_json(ck.config);
  j["mode"] = ck.mode;
  j["supervision"] = ck.supervision;
  j["task"] = ck.task;
  j["train_fraction"] = ck.train_fraction;
  j["seed"] = ck.seed;
  j["dataset"] = ck.dataset;
  auto tensors = nlohmann::json::array();
  for (const auto& [name, t] : named) {
    write_tensor(dir + "/tensors/" + name + ".tns", t);
    nlohmann::json e;
    e["name"] = name;
    e["file"] = "tensors/" + name + ".tns";
    e["shape"] = t->shape;
    tensors.push_back(e);
  }
  j["tensors"] = tensors;
  write_text(dir + "/manifest.json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
  const auto j = nlohmann::json::parse(read_text(dir + "/manifest.json"));
  if (j.at("format").get<std::string>() != "attnet-checkpoint-1")
    fail("unrecognized checkpoint format in " + dir);
  Checkpoint ck;
  ck.config = config_from_json(j.at("model"));
  ck.config.validate();
  ck.mode = j.at("mode").get<std::string>();
  ck.supervision = j.at("supervision").get<std::string>();
  ck.task = j.at("task").get<std::string>();
  ck.train_fraction = j.at("train_fraction").get<double>();
  ck.seed = j.at("seed").get<uint64_t>();
  ck.dataset = j.at("dataset").get<std::string>();

  // Build zero states with the right shapes, then overwrite from disk.
  Rng scratch(0);
  ck.encoder = model::init_encoder<float>(ck.config, scratch);
  model::NamedParams<float> named;
  for (auto& [n, t] : model::named_params(ck.encoder)) named.emplace_back("encoder." + n, t);
  if (ck.task == "segmentation") {
    ck.seg = model::init_seg_decoder<float>(ck.config, scratch);
    for (auto& [n, t] : model::named_params(*ck.seg)) named.emplace_back("posterior." + n, t);
  } else if (ck.task == "localization") {
    ck.loc = model::init_loc_head<float>(ck.config, scratch);
    for (auto& [n, t] : model::named_params(*ck.loc)) named.emplace_back("posterior." + n, t);
  } else {
    fail("unknown task '" + ck.task + "' in checkpoint " + dir);
  }

  for (const auto& e : j.at("tensors")) {
    const auto name = e.at("name").get<std::string>();
    auto it = std::find_if(named.begin(), named.end(),
                           [&](const auto& p) { return p.first == name; });
    if (it == named.end()) fail("checkpoint tensor '" + name + "' has no slot in this model");
    auto loaded = read_tensor(dir + "/" + e.at("file").get<std::string>());
    if (loaded->shape != it->second->shape)
      fail("checkpoint tensor '" + name + "': model expects shape " +
           shape_str(it->second->shape) + ", file has " + shape_str(loaded->shape));
    it->second->data = loaded->data;
  }
  return ck;
}

}  // namespace attnet::io
