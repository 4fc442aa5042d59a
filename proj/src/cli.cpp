#include "ruleocr/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ruleocr/dataset_io.hpp"
#include "ruleocr/glyphs.hpp"
#include "ruleocr/ingest.hpp"
#include "ruleocr/rules.hpp"
#include "ruleocr/train.hpp"

namespace ruleocr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kTrainImages = "train-images-idx3-ubyte";
constexpr const char* kTrainLabels = "train-labels-idx1-ubyte";
constexpr const char* kTestImages = "test-images-idx3-ubyte";
constexpr const char* kTestLabels = "test-labels-idx1-ubyte";

struct SourcePools {
  ingest::DigitPools train, test;
};

SourcePools load_source(const std::string& dir) {
  std::string tag = fs::path(dir).filename().string();
  const fs::path meta = fs::path(dir) / "source.json";
  if (fs::exists(meta)) {
    std::ifstream f(meta);
    json j;
    f >> j;
    tag = j.value("generator", tag) + ":" + std::to_string(j.value("seed", 0ULL));
  }
  SourcePools out;
  out.train = ingest::load_pools_from_idx((fs::path(dir) / kTrainImages).string(),
                                          (fs::path(dir) / kTrainLabels).string());
  out.test = ingest::load_pools_from_idx((fs::path(dir) / kTestImages).string(),
                                         (fs::path(dir) / kTestLabels).string());
  out.train.source_tag = tag + "/train";
  out.test.source_tag = tag + "/test";
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

json metrics_json(const train::Metrics& m) {
  return json{{"seq_accuracy", m.seq_accuracy},
              {"per_digit_accuracy", m.per_digit_accuracy},
              {"mean_rule_reward", m.mean_rule_reward},
              {"epoch", m.epoch}};
}

void write_json(const std::string& path, const json& j) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
}

// ---- train plumbing shared by `train` and `sweep` -------------------------

struct TrainFlags {
  std::string schedule = "fixed";
  double alpha = 0.05;
  int M = 10000;
  double lr = 1e-3;
  int lr_decay_every = 60;
  double lr_decay_factor = 10.0;
  int epochs = 200;
  int batch = 100;
  std::uint64_t seed = 1;
  std::string precision = "f32";
  std::string reinforce_norm = "avg";
  bool best_val = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--schedule", f.schedule, "alpha schedule")
      ->check(CLI::IsMember({"fixed", "aa", "ad"}))
      ->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "reward weight for the fixed schedule")
      ->capture_default_str();
  cmd->add_option("--M", f.M, "REINFORCE samples per example")->capture_default_str();
  cmd->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--lr-decay-every", f.lr_decay_every, "epochs between lr/decay-factor")
      ->capture_default_str();
  cmd->add_option("--lr-decay-factor", f.lr_decay_factor, "lr divisor")
      ->capture_default_str();
  cmd->add_option("--epochs", f.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--batch", f.batch, "batch size")->capture_default_str();
  cmd->add_option("--seed", f.seed, "training seed")->capture_default_str();
  cmd->add_option("--precision", f.precision, "numeric precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  cmd->add_option("--reinforce-norm", f.reinforce_norm, "REINFORCE normalization")
      ->check(CLI::IsMember({"avg", "sum"}))
      ->capture_default_str();
  cmd->add_flag("--best-val", f.best_val, "keep the best-val-accuracy epoch's params");
}

train::TrainConfig to_config(const TrainFlags& f) {
  train::TrainConfig cfg;
  if (f.schedule == "aa")
    cfg.schedule = {train::ScheduleKind::AA, 0.0};
  else if (f.schedule == "ad")
    cfg.schedule = {train::ScheduleKind::AD, 0.0};
  else
    cfg.schedule = {train::ScheduleKind::Fixed, f.alpha};
  cfg.M = f.M;
  cfg.lr = f.lr;
  cfg.lr_decay_every = f.lr_decay_every;
  cfg.lr_decay_factor = f.lr_decay_factor;
  cfg.epochs = f.epochs;
  cfg.batch_size = f.batch;
  cfg.seed = f.seed;
  cfg.precision = f.precision == "f64" ? train::Precision::F64 : train::Precision::F32;
  cfg.reinforce_norm = f.reinforce_norm == "sum" ? train::ReinforceNorm::RawSum
                                                 : train::ReinforceNorm::Average;
  cfg.select_best_val = f.best_val;
  return cfg;
}

json config_json(const TrainFlags& f) {
  return json{{"schedule", f.schedule},
              {"alpha", f.alpha},
              {"M", f.M},
              {"lr", f.lr},
              {"lr_decay_every", f.lr_decay_every},
              {"lr_decay_factor", f.lr_decay_factor},
              {"epochs", f.epochs},
              {"batch", f.batch},
              {"seed", f.seed},
              {"precision", f.precision},
              {"reinforce_norm", f.reinforce_norm},
              {"best_val", f.best_val}};
}

// Runs one training job and writes checkpoint.bin, metrics.jsonl and
// summary.json under out_dir. Divergence (NonFiniteLoss) is recorded in the
// summary rather than aborting the caller.
json run_training(const std::string& data_dir, const std::string& out_dir,
                  const TrainFlags& flags, const std::string& label) {
  const auto dataset = io::load_dataset(data_dir);
  const auto cfg = to_config(flags);
  const auto t0 = std::chrono::steady_clock::now();

  json summary{{"command", "train"},
               {"label", label},
               {"rule", rule_name(dataset.manifest.rule)},
               {"dataset", {{"path", data_dir},
                            {"content_hash", dataset.manifest.content_hash},
                            {"train", dataset.manifest.train_count},
                            {"val", dataset.manifest.val_count},
                            {"test", dataset.manifest.test_count}}},
               {"config", config_json(flags)}};

  fs::create_directories(out_dir);
  try {
    auto result = train::train_model(cfg, dataset, dataset.manifest.rule);

    std::ofstream jl(fs::path(out_dir) / "metrics.jsonl");
    for (const auto& m : result.history) {
      json line = metrics_json(m);
      line["alpha"] = train::alpha_at(cfg.schedule, m.epoch, cfg.epochs);
      jl << line.dump() << "\n";
    }

    nn::save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), result.params);
    const auto test_metrics = train::evaluate(result.params, dataset.test);
    const auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);

    summary["status"] = "ok";
    summary["final_val"] = metrics_json(result.history.back());
    summary["test"] = metrics_json(test_metrics);
    summary["wall_seconds"] = wall.count();
  } catch (const train::NonFiniteLoss& e) {
    const auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
    summary["status"] = "diverged";
    summary["error"] = e.what();
    summary["test"] = json{{"seq_accuracy", 0.0},
                           {"per_digit_accuracy", 0.0},
                           {"mean_rule_reward", 0.0},
                           {"epoch", -1}};
    summary["wall_seconds"] = wall.count();
  }
  write_json((fs::path(out_dir) / "summary.json").string(), summary);
  return summary;
}

// ---- sweep/report table formatting ----------------------------------------

struct RunRow {
  std::string label;
  std::uint64_t seed;
  std::string status;
  double seq, digit, reward;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n == 0 ? 0.0 : (n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
}

void write_tables(const std::string& dir, const std::vector<RunRow>& rows) {
  fs::create_directories(dir);
  {
    std::ofstream csv(fs::path(dir) / "table.csv");
    csv << "label,seed,status,seq_accuracy,per_digit_accuracy,mean_rule_reward\n";
    for (const auto& r : rows)
      csv << r.label << "," << r.seed << "," << r.status << "," << fmt_double(r.seq) << ","
          << fmt_double(r.digit) << "," << fmt_double(r.reward) << "\n";
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> by_label;
  for (const auto& r : rows) {
    if (!by_label.count(r.label)) order.push_back(r.label);
    by_label[r.label].push_back(r.seq);
  }
  std::ostringstream txt;
  txt << "setting          median seq acc %   per-seed %\n";
  for (const auto& label : order) {
    const auto& v = by_label[label];
    txt << label << std::string(label.size() < 16 ? 16 - label.size() : 1, ' ');
    const std::string med = fmt_double(std::round(median(v) * 1000) / 10.0);
    txt << med << std::string(med.size() < 19 ? 19 - med.size() : 1, ' ');
    for (double s : v) txt << fmt_double(std::round(s * 1000) / 10.0) << " ";
    txt << "\n";
  }
  std::ofstream table(fs::path(dir) / "table.txt");
  table << txt.str();
  std::cout << txt.str();
}

RunRow row_from_summary(const json& summary) {
  RunRow r;
  r.label = summary.value("label", "?");
  r.seed = summary.at("config").value("seed", 0ULL);
  r.status = summary.value("status", "?");
  const auto& t = summary.at("test");
  r.seq = t.value("seq_accuracy", 0.0);
  r.digit = t.value("per_digit_accuracy", 0.0);
  r.reward = t.value("mean_rule_reward", 0.0);
  return r;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  if (out.empty()) throw CLI::ValidationError("--seeds", "needs at least one seed");
  return out;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"rule-constrained 5-digit sequence recognition"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file with long-option keys");

  // gen-source
  auto gen = app.add_subcommand("gen-source", "generate the synthetic digit corpus");
  auto gen_out = std::make_shared<std::string>();
  auto gen_cfg = std::make_shared<glyphs::CorpusConfig>();
  gen->add_option("--out", *gen_out, "output directory")->required();
  gen->add_option("--seed", gen_cfg->seed, "corpus seed")->capture_default_str();
  gen->add_option("--train", gen_cfg->train_count, "train image count")
      ->capture_default_str();
  gen->add_option("--test", gen_cfg->test_count, "test image count")->capture_default_str();
  gen->callback([gen_out, gen_cfg] {
    const auto corpus = glyphs::generate_corpus(*gen_cfg);
    fs::create_directories(*gen_out);
    ingest::write_file((fs::path(*gen_out) / kTrainImages).string(),
                       ingest::write_idx_images(corpus.train_images));
    ingest::write_file((fs::path(*gen_out) / kTrainLabels).string(),
                       ingest::write_idx_labels(corpus.train_labels));
    ingest::write_file((fs::path(*gen_out) / kTestImages).string(),
                       ingest::write_idx_images(corpus.test_images));
    ingest::write_file((fs::path(*gen_out) / kTestLabels).string(),
                       ingest::write_idx_labels(corpus.test_labels));
    write_json((fs::path(*gen_out) / "source.json").string(),
               json{{"generator", "glyphs/v1"},
                    {"seed", gen_cfg->seed},
                    {"train", gen_cfg->train_count},
                    {"test", gen_cfg->test_count}});
    std::cout << "wrote " << corpus.train_images.size() << " train + "
              << corpus.test_images.size() << " test digits to " << *gen_out << "\n";
  });

  // ingest-check
  auto chk = app.add_subcommand("ingest-check", "validate an IDX image/label pair");
  auto chk_images = std::make_shared<std::string>();
  auto chk_labels = std::make_shared<std::string>();
  chk->add_option("--images", *chk_images, "IDX3 image file")->required();
  chk->add_option("--labels", *chk_labels, "IDX1 label file")->required();
  chk->callback([chk_images, chk_labels] {
    const auto pools = ingest::load_pools_from_idx(*chk_images, *chk_labels);
    json counts = json::array();
    for (const auto& p : pools.pools) counts.push_back(p.size());
    std::cout << json{{"total", pools.total()}, {"per_class", counts}}.dump(2) << "\n";
  });

  // synth
  auto synth_cmd = app.add_subcommand("synth", "synthesize a sequence dataset");
  struct SynthArgs {
    std::string rule = "rule2", source, out;
    std::uint64_t seed = 7;
    int train = synth::kDefaultTrain, val = synth::kDefaultVal, test = synth::kDefaultTest;
  };
  auto sa = std::make_shared<SynthArgs>();
  synth_cmd->add_option("--rule", sa->rule, "check-digit rule")
      ->check(CLI::IsMember({"rule1", "rule2", "rule3"}))
      ->capture_default_str();
  synth_cmd->add_option("--source", sa->source, "digit corpus directory")->required();
  synth_cmd->add_option("--out", sa->out, "dataset output directory")->required();
  synth_cmd->add_option("--seed", sa->seed, "dataset seed")->capture_default_str();
  synth_cmd->add_option("--train", sa->train, "train sequences")->capture_default_str();
  synth_cmd->add_option("--val", sa->val, "val sequences")->capture_default_str();
  synth_cmd->add_option("--test", sa->test, "test sequences")->capture_default_str();
  synth_cmd->callback([sa] {
    const auto source = load_source(sa->source);
    const auto ds = synth::synthesize_dataset(parse_rule_name(sa->rule), source.train,
                                              sa->seed, sa->train, sa->val, sa->test);
    io::save_dataset(sa->out, ds);
    std::cout << "wrote " << ds.train.size() << "/" << ds.val.size() << "/"
              << ds.test.size() << " examples, content_hash "
              << ds.manifest.content_hash << "\n";
  });

  // perturb
  auto perturb = app.add_subcommand("perturb", "derive a perturbed test split");
  perturb->require_subcommand(1);
  struct PerturbArgs {
    std::string data, source;
    std::uint64_t seed = 99;
    int max_epochs = 40;
    float aux_lr = synth::HardPoolConfig{}.lr;
  };
  auto pa = std::make_shared<PerturbArgs>();

  auto blockout_cmd = perturb->add_subcommand("blockout", "blank one digit band per image");
  blockout_cmd->add_option("--data", pa->data, "dataset directory")->required();
  blockout_cmd->add_option("--seed", pa->seed, "band choice seed")->capture_default_str();
  blockout_cmd->callback([pa] {
    const auto ds = io::load_dataset(pa->data);
    Rng rng(pa->seed);
    std::vector<synth::SequenceExample> out;
    out.reserve(ds.test.size());
    for (const auto& e : ds.test) out.push_back(synth::blockout(e, rng));
    io::save_split((fs::path(pa->data) / "test_blockout").string(), out);
    std::cout << "wrote test_blockout with " << out.size() << " examples\n";
  });

  auto hard_cmd = perturb->add_subcommand("hard", "swap one digit for a hard source image");
  hard_cmd->add_option("--data", pa->data, "dataset directory")->required();
  hard_cmd->add_option("--source", pa->source, "digit corpus directory")->required();
  hard_cmd->add_option("--seed", pa->seed, "perturbation seed")->capture_default_str();
  hard_cmd->add_option("--max-epochs", pa->max_epochs, "aux classifier epoch budget")
      ->capture_default_str();
  hard_cmd->add_option("--aux-lr", pa->aux_lr, "aux classifier learning rate")
      ->capture_default_str();
  hard_cmd->callback([pa] {
    const auto ds = io::load_dataset(pa->data);
    const auto source = load_source(pa->source);
    synth::HardPoolConfig cfg;
    cfg.seed = derive_seed(pa->seed, {0});
    cfg.max_epochs = pa->max_epochs;
    cfg.lr = pa->aux_lr;
    const auto hard = synth::make_hard_pool(source.train, source.test, cfg);

    Rng rng(derive_seed(pa->seed, {1}));
    std::vector<synth::SequenceExample> out;
    out.reserve(ds.test.size());
    int fallbacks = 0;
    for (const auto& e : ds.test) {
      try {
        out.push_back(
            synth::apply_hard_digit(e.rule, e.label, source.train, hard.pool, rng));
      } catch (const synth::NoHardDigitAvailable&) {
        out.push_back(e);  // keep the original image; counted below
        ++fallbacks;
      }
    }
    io::save_split((fs::path(pa->data) / "test_hard").string(), out);
    json pool_sizes = json::array();
    for (const auto& p : hard.pool.pools) pool_sizes.push_back(p.size());
    write_json((fs::path(pa->data) / "test_hard" / "hard_meta.json").string(),
               json{{"aux_test_accuracy", hard.test_accuracy},
                    {"aux_epochs", hard.epochs_trained},
                    {"pool_sizes", pool_sizes},
                    {"fallbacks", fallbacks}});
    std::cout << "wrote test_hard (aux acc " << hard.test_accuracy << ", "
              << hard.pool.total() << " hard digits, " << fallbacks << " fallbacks)\n";
  });

  // train
  auto train_cmd = app.add_subcommand("train", "train a recognizer");
  auto tf = std::make_shared<TrainFlags>();
  auto train_data = std::make_shared<std::string>();
  auto train_out = std::make_shared<std::string>();
  train_cmd->add_option("--data", *train_data, "dataset directory")->required();
  train_cmd->add_option("--out", *train_out, "run output directory")->required();
  add_train_flags(train_cmd, *tf);
  train_cmd->callback([tf, train_data, train_out] {
    const auto summary = run_training(*train_data, *train_out, *tf, "train");
    if (summary["status"] != "ok")
      throw std::runtime_error("training diverged: " +
                               summary.value("error", std::string("unknown")));
    std::cout << summary.dump(2) << "\n";
  });

  // eval
  auto eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  struct EvalArgs {
    std::string checkpoint, data, split = "test";
  };
  auto ea = std::make_shared<EvalArgs>();
  eval_cmd->add_option("--checkpoint", ea->checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", ea->data, "dataset directory")->required();
  eval_cmd->add_option("--split", ea->split, "split directory name")
      ->capture_default_str();
  eval_cmd->callback([ea] {
    const auto manifest = io::load_manifest(ea->data);
    const auto examples =
        io::load_split((fs::path(ea->data) / ea->split).string(), manifest.rule);
    const auto params = nn::load_checkpoint(ea->checkpoint);
    const auto m = train::evaluate(params, examples);
    json out = metrics_json(m);
    out.erase("epoch");
    out["split"] = ea->split;
    out["n"] = examples.size();
    std::cout << out.dump(2) << "\n";
  });

  // verify
  auto verify_cmd = app.add_subcommand("verify", "check dataset hash and rule compliance");
  auto verify_data = std::make_shared<std::string>();
  verify_cmd->add_option("--data", *verify_data, "dataset directory")->required();
  verify_cmd->callback([verify_data] {
    const auto manifest = io::load_manifest(*verify_data);
    const auto actual = io::dataset_content_hash(*verify_data);
    if (actual != manifest.content_hash)
      throw std::runtime_error("content hash mismatch: manifest " + manifest.content_hash +
                               " vs files " + actual);
    std::size_t checked = 0;
    for (const char* split : {"train", "val", "test", "test_blockout", "test_hard"}) {
      const auto dir = fs::path(*verify_data) / split;
      if (!fs::exists(dir)) continue;
      for (const auto& e : io::load_split(dir.string(), manifest.rule)) {
        if (!rules::verify(e.rule, e.label))
          throw std::runtime_error("label " + to_string(e.label) + " violates " +
                                   std::string(rule_name(e.rule)) + " in " + split);
        ++checked;
      }
    }
    std::cout << "ok: hash " << actual << ", " << checked << " labels rule-compliant\n";
  });

  // sweep
  auto sweep = app.add_subcommand("sweep", "run an experiment grid");
  sweep->require_subcommand(1);

  auto sweep_alpha = sweep->add_subcommand("alpha", "alpha/schedule grid on one dataset");
  struct AlphaSweepArgs {
    std::string data, out;
    std::string alphas = "0,0.01,0.05,0.1,0.5";
    std::string schedules;
    std::string seeds = "1,2,3";
  };
  auto asa = std::make_shared<AlphaSweepArgs>();
  auto asa_flags = std::make_shared<TrainFlags>();
  sweep_alpha->add_option("--data", asa->data, "dataset directory")->required();
  sweep_alpha->add_option("--out", asa->out, "sweep output directory")->required();
  sweep_alpha->add_option("--alphas", asa->alphas, "comma list of fixed alphas")
      ->capture_default_str();
  sweep_alpha->add_option("--schedules", asa->schedules, "comma list from {aa,ad}")
      ->capture_default_str();
  sweep_alpha->add_option("--seeds", asa->seeds, "comma list of seeds")
      ->capture_default_str();
  add_train_flags(sweep_alpha, *asa_flags);
  sweep_alpha->callback([asa, asa_flags] {
    std::vector<RunRow> rows;
    const auto seeds = parse_seed_list(asa->seeds);
    std::vector<std::pair<std::string, TrainFlags>> cells;
    {
      std::stringstream ss(asa->alphas);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        TrainFlags f = *asa_flags;
        f.schedule = "fixed";
        f.alpha = std::stod(item);
        cells.emplace_back("alpha=" + item, f);
      }
    }
    if (!asa->schedules.empty()) {
      std::stringstream ss(asa->schedules);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        TrainFlags f = *asa_flags;
        f.schedule = item;
        cells.emplace_back(item, f);
      }
    }
    for (const auto& [label, base] : cells) {
      for (const auto seed : seeds) {
        TrainFlags f = base;
        f.seed = seed;
        const auto run_dir =
            (fs::path(asa->out) / (label + "_seed" + std::to_string(seed))).string();
        rows.push_back(row_from_summary(run_training(asa->data, run_dir, f, label)));
      }
    }
    write_tables(asa->out, rows);
  });

  auto sweep_size = sweep->add_subcommand("size", "dataset-size grid with fresh synthesis");
  struct SizeSweepArgs {
    std::string source, out;
    std::string rule = "rule2";
    std::string sizes = "250,500,1000,2000";
    std::string seeds = "1,2,3";
    double alpha = 0.1;
    std::uint64_t synth_seed = 7;
  };
  auto ssa = std::make_shared<SizeSweepArgs>();
  auto ssa_flags = std::make_shared<TrainFlags>();
  sweep_size->add_option("--source", ssa->source, "digit corpus directory")->required();
  sweep_size->add_option("--out", ssa->out, "sweep output directory")->required();
  sweep_size->add_option("--rule", ssa->rule, "check-digit rule")
      ->check(CLI::IsMember({"rule1", "rule2", "rule3"}))
      ->capture_default_str();
  sweep_size->add_option("--sizes", ssa->sizes, "comma list of train sizes")
      ->capture_default_str();
  sweep_size->add_option("--seeds", ssa->seeds, "comma list of training seeds")
      ->capture_default_str();
  sweep_size->add_option("--proposed-alpha", ssa->alpha, "alpha of the proposed runs")
      ->capture_default_str();
  sweep_size->add_option("--synth-seed", ssa->synth_seed, "base dataset seed")
      ->capture_default_str();
  add_train_flags(sweep_size, *ssa_flags);
  sweep_size->callback([ssa, ssa_flags] {
    const auto source = load_source(ssa->source);
    const auto seeds = parse_seed_list(ssa->seeds);
    std::vector<RunRow> rows;
    std::stringstream ss(ssa->sizes);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const int n = std::stoi(item);
      const auto ds = synth::synthesize_dataset(
          parse_rule_name(ssa->rule), source.train,
          derive_seed(ssa->synth_seed, {static_cast<std::uint64_t>(n)}), n,
          synth::kDefaultVal, synth::kDefaultTest);
      const auto data_dir = (fs::path(ssa->out) / ("data_n" + item)).string();
      io::save_dataset(data_dir, ds);
      for (const char* kind : {"baseline", "proposed"}) {
        for (const auto seed : seeds) {
          TrainFlags f = *ssa_flags;
          f.schedule = "fixed";
          f.alpha = std::string(kind) == "baseline" ? 0.0 : ssa->alpha;
          f.seed = seed;
          const auto label = "n=" + item + " " + kind;
          const auto run_dir =
              (fs::path(ssa->out) /
               ("n" + item + "_" + kind + "_seed" + std::to_string(seed)))
                  .string();
          rows.push_back(row_from_summary(run_training(data_dir, run_dir, f, label)));
        }
      }
    }
    write_tables(ssa->out, rows);
  });

  // report
  auto report_cmd = app.add_subcommand("report", "re-tabulate finished runs");
  auto report_dir = std::make_shared<std::string>();
  report_cmd->add_option("--dir", *report_dir, "directory containing run summaries")
      ->required();
  report_cmd->callback([report_dir] {
    std::vector<RunRow> rows;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(*report_dir))
      if (entry.is_regular_file() && entry.path().filename() == "summary.json")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      std::ifstream f(path);
      json j;
      f >> j;
      rows.push_back(row_from_summary(j));
    }
    if (rows.empty()) throw std::runtime_error("no summary.json under " + *report_dir);
    write_tables(*report_dir, rows);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ruleocr::cli
