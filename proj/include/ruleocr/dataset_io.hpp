#pragma once

#include <string>
#include <vector>

#include "ruleocr/synth.hpp"

namespace ruleocr::io {

struct CorruptDataset : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset directory layout:
//   manifest.json
//   train/images.bin   raw rows of 28*112 bytes, round(intensity*255)
//   train/labels.txt   one 5-digit line per example
//   val/..., test/...  same shape
// plus optional perturbed splits (test_blockout/, test_hard/).

void save_manifest(const std::string& dir, const synth::DatasetManifest& manifest);
synth::DatasetManifest load_manifest(const std::string& dir);

void save_split(const std::string& split_dir,
                const std::vector<synth::SequenceExample>& examples);
std::vector<synth::SequenceExample> load_split(const std::string& split_dir, RuleId rule);

void save_dataset(const std::string& dir, const synth::Dataset& dataset);
synth::Dataset load_dataset(const std::string& dir);

// FNV-1a over the six main split files in train/val/test order, images
// before labels; matches DatasetManifest.content_hash by construction.
std::string dataset_content_hash(const std::string& dir);

}  // namespace ruleocr::io
