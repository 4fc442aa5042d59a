#include "ruleocr/dataset_io.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ruleocr/hash.hpp"
#include "ruleocr/ingest.hpp"

namespace ruleocr::io {

namespace fs = std::filesystem;
using nlohmann::json;

void save_manifest(const std::string& dir, const synth::DatasetManifest& m) {
  fs::create_directories(dir);
  json j{{"rule", rule_name(m.rule)},
         {"seed", m.seed},
         {"prng_id", m.prng_id},
         {"counts", {{"train", m.train_count}, {"val", m.val_count}, {"test", m.test_count}}},
         {"source_tag", m.source_tag},
         {"content_hash", m.content_hash}};
  std::ofstream f(fs::path(dir) / "manifest.json");
  if (!f) throw std::runtime_error("cannot write manifest in " + dir);
  f << j.dump(2) << "\n";
}

synth::DatasetManifest load_manifest(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  if (!f) throw CorruptDataset("missing manifest.json in " + dir);
  json j;
  try {
    f >> j;
    synth::DatasetManifest m;
    m.rule = parse_rule_name(j.at("rule").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.prng_id = j.at("prng_id").get<std::string>();
    m.train_count = j.at("counts").at("train").get<int>();
    m.val_count = j.at("counts").at("val").get<int>();
    m.test_count = j.at("counts").at("test").get<int>();
    m.source_tag = j.at("source_tag").get<std::string>();
    m.content_hash = j.at("content_hash").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw CorruptDataset("bad manifest.json in " + dir + ": " + e.what());
  }
}

void save_split(const std::string& split_dir,
                const std::vector<synth::SequenceExample>& examples) {
  fs::create_directories(split_dir);
  std::ofstream images(fs::path(split_dir) / "images.bin", std::ios::binary);
  std::ofstream labels(fs::path(split_dir) / "labels.txt");
  if (!images || !labels) throw std::runtime_error("cannot write split " + split_dir);
  for (const auto& e : examples) {
    const auto bytes = synth::quantize_pixels(e.image);
    images.write(reinterpret_cast<const char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()));
  }
  for (const auto& e : examples) labels << to_string(e.label) << "\n";
  if (!images || !labels) throw std::runtime_error("write failed in " + split_dir);
}

std::vector<synth::SequenceExample> load_split(const std::string& split_dir, RuleId rule) {
  const auto bytes = ingest::read_file((fs::path(split_dir) / "images.bin").string());
  if (bytes.size() % GrayImage::kPixels != 0)
    throw CorruptDataset("images.bin size not a multiple of an image in " + split_dir);
  const std::size_t n = bytes.size() / GrayImage::kPixels;

  std::ifstream labels(fs::path(split_dir) / "labels.txt");
  if (!labels) throw CorruptDataset("missing labels.txt in " + split_dir);
  std::vector<synth::SequenceExample> out(n);
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(labels, line))
      throw CorruptDataset("labels.txt shorter than images.bin in " + split_dir);
    out[i].rule = rule;
    out[i].label = digit_string_from_text(line);
    const std::uint8_t* px = bytes.data() + i * GrayImage::kPixels;
    for (int j = 0; j < GrayImage::kPixels; ++j)
      out[i].image.pixels[static_cast<std::size_t>(j)] = px[j] / 255.0f;
  }
  if (std::getline(labels, line) && !line.empty())
    throw CorruptDataset("labels.txt longer than images.bin in " + split_dir);
  return out;
}

void save_dataset(const std::string& dir, const synth::Dataset& dataset) {
  save_manifest(dir, dataset.manifest);
  save_split((fs::path(dir) / "train").string(), dataset.train);
  save_split((fs::path(dir) / "val").string(), dataset.val);
  save_split((fs::path(dir) / "test").string(), dataset.test);
}

synth::Dataset load_dataset(const std::string& dir) {
  synth::Dataset ds;
  ds.manifest = load_manifest(dir);
  ds.train = load_split((fs::path(dir) / "train").string(), ds.manifest.rule);
  ds.val = load_split((fs::path(dir) / "val").string(), ds.manifest.rule);
  ds.test = load_split((fs::path(dir) / "test").string(), ds.manifest.rule);
  if (ds.train.size() != static_cast<std::size_t>(ds.manifest.train_count) ||
      ds.val.size() != static_cast<std::size_t>(ds.manifest.val_count) ||
      ds.test.size() != static_cast<std::size_t>(ds.manifest.test_count))
    throw CorruptDataset("split sizes disagree with manifest in " + dir);
  return ds;
}

std::string dataset_content_hash(const std::string& dir) {
  Fnv1a64 hash;
  for (const char* split : {"train", "val", "test"}) {
    for (const char* file : {"images.bin", "labels.txt"}) {
      const auto bytes = ingest::read_file((fs::path(dir) / split / file).string());
      hash.update(bytes);
    }
  }
  return to_hex64(hash.digest());
}

}  // namespace ruleocr::io
