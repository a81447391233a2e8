#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "matmodal/cif.hpp"
#include "matmodal/config_json.hpp"
#include "matmodal/dataset.hpp"
#include "matmodal/eval.hpp"
#include "matmodal/models.hpp"
#include "matmodal/nn.hpp"
#include "matmodal/xrd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace matmodal;

namespace {

// One config document drives every pipeline stage; unknown keys are typos.
struct RunConfig {
  std::string dataset;
  std::string split_prefix;
  std::string cache_dir;
  std::string align_checkpoint;
  XrdSimConfig xrd;
  EncoderConfig encoder;
  TrainConfig train;
  SplitSpec split;
  std::string modality = "xrd";
  std::vector<std::string> modalities = {"xrd", "comp"};
  std::vector<std::string> tasks = {"lattice", "energy", "system"};
};

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config file " + path + ": " + e.what());
  }
  static const char* allowed[] = {"dataset",    "split_prefix", "cache_dir",
                                  "align_checkpoint", "xrd",    "encoder",
                                  "train",      "split",        "modality",
                                  "modalities", "tasks"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(allowed), std::end(allowed), key) ==
        std::end(allowed))
      throw std::runtime_error("config file " + path + ": unknown key '" +
                               key + "'");
  }
  RunConfig cfg;
  if (j.contains("dataset")) cfg.dataset = j.at("dataset").get<std::string>();
  if (j.contains("split_prefix"))
    cfg.split_prefix = j.at("split_prefix").get<std::string>();
  if (j.contains("cache_dir"))
    cfg.cache_dir = j.at("cache_dir").get<std::string>();
  if (j.contains("align_checkpoint"))
    cfg.align_checkpoint = j.at("align_checkpoint").get<std::string>();
  if (j.contains("xrd")) cfg.xrd = j.at("xrd").get<XrdSimConfig>();
  if (j.contains("encoder")) cfg.encoder = j.at("encoder").get<EncoderConfig>();
  if (j.contains("train")) cfg.train = j.at("train").get<TrainConfig>();
  if (j.contains("split")) cfg.split = j.at("split").get<SplitSpec>();
  if (j.contains("modality"))
    cfg.modality = j.at("modality").get<std::string>();
  if (j.contains("modalities"))
    cfg.modalities = j.at("modalities").get<std::vector<std::string>>();
  if (j.contains("tasks"))
    cfg.tasks = j.at("tasks").get<std::vector<std::string>>();
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  return json{{"dataset", cfg.dataset},
              {"split_prefix", cfg.split_prefix},
              {"cache_dir", cfg.cache_dir},
              {"align_checkpoint", cfg.align_checkpoint},
              {"xrd", cfg.xrd},
              {"encoder", cfg.encoder},
              {"train", cfg.train},
              {"split", cfg.split},
              {"modality", cfg.modality},
              {"modalities", cfg.modalities},
              {"tasks", cfg.tasks}};
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << text;
  }
  fs::rename(tmp, path);
}

void echo_run_config(const fs::path& out_dir, const RunConfig& cfg) {
  fs::create_directories(out_dir);
  write_text_atomic(out_dir / "run_config.json",
                    run_config_to_json(cfg).dump(2) + "\n");
}

// --- modality cache ---
// Layout: <dir>/config.json carries the hashed modality config; one binary
// file per record id holds its XRD pattern, feature vector, and graph.

json modal_config_json(const XrdSimConfig& xrd, const EncoderConfig& enc) {
  return json{{"xrd", xrd},
              {"graph", {{"cutoff", enc.graph_cutoff},
                         {"max_neighbors", enc.max_neighbors}}}};
}

constexpr char kCacheMagic[4] = {'M', 'M', 'C', '1'};

template <typename T>
void put_pod(std::string& buf, T v) {
  const char* p = reinterpret_cast<const char*>(&v);
  buf.append(p, sizeof(T));
}

template <typename T>
T get_pod(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size())
    throw std::runtime_error("truncated cache entry");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void write_cache_entry(const fs::path& dir, const std::string& id,
                       const ModalData& d, std::uint64_t hash) {
  std::string buf;
  buf.append(kCacheMagic, 4);
  put_pod(buf, hash);
  put_pod<std::uint32_t>(buf, static_cast<std::uint32_t>(d.xrd.size()));
  for (double v : d.xrd) put_pod(buf, v);
  put_pod<std::uint32_t>(buf, static_cast<std::uint32_t>(d.comp.size()));
  for (double v : d.comp) put_pod(buf, v);
  put_pod<std::uint32_t>(buf,
                         static_cast<std::uint32_t>(d.graph.node_species.size()));
  for (int z : d.graph.node_species) put_pod<std::int32_t>(buf, z);
  put_pod<std::uint32_t>(buf, static_cast<std::uint32_t>(d.graph.edges.size()));
  for (const GraphEdge& e : d.graph.edges) {
    put_pod<std::uint32_t>(buf, static_cast<std::uint32_t>(e.src));
    put_pod<std::uint32_t>(buf, static_cast<std::uint32_t>(e.dst));
    put_pod(buf, e.distance);
    for (int k = 0; k < 3; ++k) put_pod<std::int32_t>(buf, e.image[k]);
  }
  write_text_atomic(dir / (id + ".mmc"), buf);
}

ModalData read_cache_entry(const fs::path& dir, const std::string& id,
                           std::uint64_t expected_hash) {
  const fs::path path = dir / (id + ".mmc");
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("cache entry missing for record '" + id + "' in " +
                             dir.string() + " (run precompute first)");
  std::ostringstream ss;
  ss << is.rdbuf();
  const std::string buf = ss.str();
  std::size_t pos = 0;
  if (buf.size() < 4 || std::memcmp(buf.data(), kCacheMagic, 4) != 0)
    throw std::runtime_error("corrupt cache entry: " + path.string());
  pos = 4;
  const auto hash = get_pod<std::uint64_t>(buf, pos);
  if (hash != expected_hash)
    throw std::runtime_error(
        "stale cache entry " + path.string() +
        ": config hash mismatch, re-run precompute with the current config");
  ModalData d;
  d.xrd.resize(get_pod<std::uint32_t>(buf, pos));
  for (double& v : d.xrd) v = get_pod<double>(buf, pos);
  d.comp.resize(get_pod<std::uint32_t>(buf, pos));
  for (double& v : d.comp) v = get_pod<double>(buf, pos);
  d.graph.node_species.resize(get_pod<std::uint32_t>(buf, pos));
  for (int& z : d.graph.node_species) z = get_pod<std::int32_t>(buf, pos);
  d.graph.edges.resize(get_pod<std::uint32_t>(buf, pos));
  for (GraphEdge& e : d.graph.edges) {
    e.src = get_pod<std::uint32_t>(buf, pos);
    e.dst = get_pod<std::uint32_t>(buf, pos);
    e.distance = get_pod<double>(buf, pos);
    for (int k = 0; k < 3; ++k) e.image[k] = get_pod<std::int32_t>(buf, pos);
  }
  return d;
}

void check_cache_config(const fs::path& dir, std::uint64_t expected_hash) {
  const fs::path cfg_path = dir / "config.json";
  std::ifstream is(cfg_path);
  if (!is)
    throw std::runtime_error("no cache config at " + cfg_path.string() +
                             " (run precompute first)");
  const json j = json::parse(is);
  std::uint64_t stored = 0;
  std::istringstream(j.at("hash").get<std::string>()) >> std::hex >> stored;
  if (stored != expected_hash)
    throw std::runtime_error("stale cache in " + dir.string() +
                             ": config hash mismatch (cache " +
                             j.at("hash").get<std::string>() +
                             "), re-run precompute");
}

// Cached entries when a cache dir is configured, fresh computation otherwise.
std::vector<ModalData> gather_modal(const std::vector<DatasetRecord>& records,
                                    const RunConfig& cfg) {
  if (cfg.cache_dir.empty()) return precompute(records, cfg.xrd, cfg.encoder);
  const json mc = modal_config_json(cfg.xrd, cfg.encoder);
  std::uint64_t expected = 0;
  std::istringstream(config_hash(mc)) >> std::hex >> expected;
  check_cache_config(cfg.cache_dir, expected);
  std::vector<ModalData> out;
  out.reserve(records.size());
  for (const auto& rec : records)
    out.push_back(read_cache_entry(cfg.cache_dir, rec.id, expected));
  return out;
}

// --- split index files ---

void write_index_file(const fs::path& path, const std::vector<std::size_t>& idx) {
  std::ostringstream os;
  for (std::size_t i : idx) os << i << "\n";
  write_text_atomic(path, os.str());
}

std::vector<std::size_t> read_index_file(const fs::path& path, std::size_t n) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open split index: " + path.string());
  std::vector<std::size_t> idx;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::size_t v = std::stoull(line);
    if (v >= n)
      throw std::runtime_error("split index " + std::to_string(v) +
                               " out of range in " + path.string());
    idx.push_back(v);
  }
  return idx;
}

SplitIndices read_split(const std::string& prefix, std::size_t n) {
  return {read_index_file(prefix + ".train.idx", n),
          read_index_file(prefix + ".val.idx", n),
          read_index_file(prefix + ".test.idx", n)};
}

// --- subcommand bodies ---

void cmd_synth(std::size_t n, std::uint64_t seed, const std::string& out) {
  const auto records = synth_generate(n, seed);
  write_jsonl(records, out);
  std::cout << "wrote " << records.size() << " records to " << out << "\n";
}

void cmd_import_cif(const std::string& dir, const std::string& out) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".cif") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error("no .cif files found in " + dir);
  std::vector<DatasetRecord> records;
  for (const auto& f : files) {
    std::ifstream is(f);
    std::ostringstream ss;
    ss << is.rdbuf();
    DatasetRecord rec;
    rec.id = f.stem().string();
    try {
      rec.structure = parse_cif_p1(ss.str());
    } catch (const std::exception& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  write_jsonl(records, out);
  std::cout << "imported " << records.size() << " structures to " << out << "\n";
}

void cmd_split(const std::string& in, const SplitSpec& spec,
               const std::string& prefix) {
  const auto records = load_jsonl(in);
  const SplitIndices idx = split(records.size(), spec);
  write_index_file(prefix + ".train.idx", idx.train);
  write_index_file(prefix + ".val.idx", idx.val);
  write_index_file(prefix + ".test.idx", idx.test);
  std::cout << "split " << records.size() << " records: " << idx.train.size()
            << "/" << idx.val.size() << "/" << idx.test.size() << "\n";
}

void cmd_precompute(const std::string& in, const std::string& out_dir,
                    const std::string& config_path, unsigned threads) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = load_run_config(config_path);
  const auto records = load_jsonl(in);
  const auto modal = precompute(records, cfg.xrd, cfg.encoder, threads);

  const json mc = modal_config_json(cfg.xrd, cfg.encoder);
  const std::string hash_hex = config_hash(mc);
  std::uint64_t hash = 0;
  std::istringstream(hash_hex) >> std::hex >> hash;
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < records.size(); ++i)
    write_cache_entry(out_dir, records[i].id, modal[i], hash);
  json cache_cfg = mc;
  cache_cfg["hash"] = hash_hex;
  write_text_atomic(fs::path(out_dir) / "config.json", cache_cfg.dump(2) + "\n");
  std::cout << "cached " << records.size() << " records in " << out_dir
            << " (config " << hash_hex << ")\n";
}

std::vector<Task> parse_tasks(const std::vector<std::string>& names) {
  std::vector<Task> tasks;
  for (const auto& n : names) tasks.push_back(task_from_name(n));
  return tasks;
}

void write_train_outputs(const fs::path& out_dir, const RunConfig& cfg,
                         const Checkpoint& ckpt) {
  echo_run_config(out_dir, cfg);
  save_checkpoint(ckpt, (out_dir / "checkpoint.mmck").string());
  std::ostringstream hist;
  hist.precision(17);
  for (double l : ckpt.loss_history) hist << l << "\n";
  write_text_atomic(out_dir / "loss_history.txt", hist.str());
  std::cout << "checkpoint written to " << (out_dir / "checkpoint.mmck").string()
            << "\n";
}

void cmd_train(const std::string& mode, const std::string& config_path,
               const std::string& out_dir) {
  const RunConfig cfg = load_run_config(config_path);
  if (cfg.dataset.empty())
    throw std::runtime_error("config is missing 'dataset'");
  if (cfg.split_prefix.empty())
    throw std::runtime_error("config is missing 'split_prefix'");
  const auto records = load_jsonl(cfg.dataset);
  const SplitIndices split_idx = read_split(cfg.split_prefix, records.size());
  const auto modal = gather_modal(records, cfg);

  TrainResult result;
  if (mode == "align") {
    if (cfg.modalities.size() != 2)
      throw std::runtime_error("align needs exactly 2 entries in 'modalities'");
    result = train_align(modality_from_name(cfg.modalities[0]),
                         modality_from_name(cfg.modalities[1]), records, modal,
                         split_idx, cfg.encoder, cfg.train, cfg.xrd);
  } else if (mode == "downstream") {
    std::optional<Checkpoint> align_ckpt;
    if (!cfg.align_checkpoint.empty())
      align_ckpt = load_checkpoint(cfg.align_checkpoint);
    result = train_downstream(modality_from_name(cfg.modality),
                              parse_tasks(cfg.tasks), records, modal, split_idx,
                              cfg.encoder, cfg.train, cfg.xrd,
                              align_ckpt ? &*align_ckpt : nullptr);
  } else {
    result = train_align_fuse(parse_tasks(cfg.tasks), records, modal, split_idx,
                              cfg.encoder, cfg.train, cfg.xrd);
  }
  write_train_outputs(out_dir, cfg, result.checkpoint);
}

void cmd_eval(const std::string& ckpt_path, const std::string& config_path,
              const std::string& split_name, const std::string& out_dir) {
  RunConfig cfg = load_run_config(config_path);
  if (cfg.dataset.empty())
    throw std::runtime_error("config is missing 'dataset'");
  if (cfg.split_prefix.empty())
    throw std::runtime_error("config is missing 'split_prefix'");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  cfg.xrd = ckpt.xrd;
  cfg.encoder = ckpt.encoder;
  const Model model = model_from_checkpoint(ckpt);

  const auto records = load_jsonl(cfg.dataset);
  const SplitIndices split_idx = read_split(cfg.split_prefix, records.size());
  const std::vector<std::size_t>* eval_idx = nullptr;
  if (split_name == "train") eval_idx = &split_idx.train;
  else if (split_name == "val") eval_idx = &split_idx.val;
  else if (split_name == "test") eval_idx = &split_idx.test;
  else throw std::runtime_error("unknown split '" + split_name + "'");
  if (eval_idx->empty())
    throw std::runtime_error("split '" + split_name + "' is empty");
  const auto modal = gather_modal(records, cfg);

  EvalReport report;
  report.n_train = static_cast<int>(split_idx.train.size());
  report.n_val = static_cast<int>(split_idx.val.size());
  report.n_test = static_cast<int>(split_idx.test.size());

  std::vector<double> len_pred, len_true, ang_pred, ang_true;
  std::vector<double> e_pred, e_true;
  std::vector<int> sys_pred, sys_true;
  std::vector<std::vector<double>> embeddings;
  std::vector<int> labels;
  for (std::size_t i : *eval_idx) {
    const Prediction p = predict(model, ckpt.stats, modal[i]);
    const Lattice& l = records[i].structure.lattice;
    if (!p.lattice.empty()) {
      const double truth[6] = {l.a, l.b, l.c, l.alpha, l.beta, l.gamma};
      for (int k = 0; k < 3; ++k) {
        len_pred.push_back(p.lattice[k]);
        len_true.push_back(truth[k]);
        ang_pred.push_back(p.lattice[k + 3]);
        ang_true.push_back(truth[k + 3]);
      }
    }
    if (p.energy && records[i].formation_energy) {
      e_pred.push_back(*p.energy);
      e_true.push_back(*records[i].formation_energy);
    }
    if (!p.system_logits.empty()) {
      sys_pred.push_back(static_cast<int>(
          std::max_element(p.system_logits.begin(), p.system_logits.end()) -
          p.system_logits.begin()));
      sys_true.push_back(static_cast<int>(records[i].system_label()));
    }
    embeddings.push_back(model.embedding(modal[i], ckpt.stats).values());
    labels.push_back(static_cast<int>(records[i].system_label()));
  }
  if (!len_pred.empty()) {
    report.lattice_length_mae = mae(len_pred, len_true);
    report.lattice_angle_mae = mae(ang_pred, ang_true);
  }
  if (!e_pred.empty()) report.energy_mae = mae(e_pred, e_true);
  if (!sys_pred.empty()) {
    report.classification_accuracy = accuracy(sys_pred, sys_true);
    report.per_class = per_class_accuracy(sys_pred, sys_true);
    report.confusion = confusion_matrix(sys_pred, sys_true);
  }
  if (std::set<int>(labels.begin(), labels.end()).size() >= 2 &&
      labels.size() >= 3)
    report.silhouette_score = silhouette(embeddings, labels);

  echo_run_config(out_dir, cfg);
  write_text_atomic(fs::path(out_dir) / "report.json",
                    report.to_json_string() + "\n");
  std::cout << report.to_json_string() << "\n";
}

void cmd_embed(const std::string& ckpt_path, const std::string& in,
               const std::string& out, bool pca3,
               const std::string& cache_dir) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Model model = model_from_checkpoint(ckpt);
  RunConfig cfg;
  cfg.xrd = ckpt.xrd;
  cfg.encoder = ckpt.encoder;
  cfg.cache_dir = cache_dir;
  const auto records = load_jsonl(in);
  const auto modal = gather_modal(records, cfg);

  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    embeddings.push_back(model.embedding(modal[i], ckpt.stats).values());
  std::vector<std::array<double, 3>> coords;
  if (pca3) coords = pca3_export(embeddings);

  std::ostringstream os;
  for (std::size_t i = 0; i < records.size(); ++i) {
    json j = {{"id", records[i].id},
              {"embedding", embeddings[i]},
              {"crystal_system",
               crystal_system_name(records[i].system_label())}};
    if (pca3) j["xyz"] = coords[i];
    os << j.dump() << "\n";
  }
  write_text_atomic(out, os.str());
  std::cout << "wrote " << records.size() << " embeddings to " << out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-modal materials learning pipeline"};
  app.require_subcommand(1);

  std::string active = "matmodal";

  // dataset
  auto* dataset = app.add_subcommand("dataset", "dataset creation and splitting");
  dataset->require_subcommand(1);

  std::size_t synth_n = 1000;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = dataset->add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--n", synth_n, "number of records")->required();
  synth->add_option("--seed", synth_seed, "RNG seed");
  synth->add_option("--out", synth_out, "output JSONL path")->required();
  synth->callback([&] {
    active = "dataset synth";
    cmd_synth(synth_n, synth_seed, synth_out);
  });

  std::string cif_dir, cif_out;
  auto* import_cif =
      dataset->add_subcommand("import-cif", "batch P1 CIF import to JSONL");
  import_cif->add_option("--dir", cif_dir, "directory of .cif files")->required();
  import_cif->add_option("--out", cif_out, "output JSONL path")->required();
  import_cif->callback([&] {
    active = "dataset import-cif";
    cmd_import_cif(cif_dir, cif_out);
  });

  std::string split_in, split_prefix;
  SplitSpec split_spec;
  std::vector<double> split_ratios;
  auto* split_cmd =
      dataset->add_subcommand("split", "write train/val/test index files");
  split_cmd->add_option("--in", split_in, "dataset JSONL path")->required();
  split_cmd->add_option("--seed", split_spec.seed, "shuffle seed");
  split_cmd->add_option("--ratios", split_ratios,
                        "train val test ratios (default 0.6 0.2 0.2)")
      ->expected(3);
  split_cmd->add_option("--out-prefix", split_prefix, "index file prefix")
      ->required();
  split_cmd->callback([&] {
    active = "dataset split";
    if (!split_ratios.empty())
      for (int i = 0; i < 3; ++i) split_spec.ratios[i] = split_ratios[i];
    cmd_split(split_in, split_spec, split_prefix);
  });

  // precompute
  std::string pre_in, pre_out, pre_config;
  unsigned pre_threads = 0;
  auto* pre = app.add_subcommand(
      "precompute", "cache XRD patterns, features, and graphs per record");
  pre->add_option("--in", pre_in, "dataset JSONL path")->required();
  pre->add_option("--out", pre_out,
                  "cache directory (default $MATMODAL_CACHE_DIR)");
  pre->add_option("--config", pre_config, "run config JSON");
  pre->add_option("--threads", pre_threads, "worker threads (0 = auto)");
  pre->callback([&] {
    active = "precompute";
    std::string out = pre_out;
    if (out.empty()) {
      const char* env = std::getenv("MATMODAL_CACHE_DIR");
      if (!env)
        throw std::runtime_error(
            "no cache directory: pass --out or set MATMODAL_CACHE_DIR");
      out = env;
    }
    cmd_precompute(pre_in, out, pre_config, pre_threads);
  });

  // train
  std::string train_config, train_out;
  auto* train = app.add_subcommand("train", "train a model");
  train->require_subcommand(1);
  for (const char* mode : {"align", "downstream", "align-fuse"}) {
    auto* sub = train->add_subcommand(
        mode, std::string("train a ") + mode + " model");
    sub->add_option("--config", train_config, "run config JSON")->required();
    sub->add_option("--out", train_out, "output directory")->required();
    sub->callback([&, mode] {
      active = std::string("train ") + mode;
      cmd_train(std::strcmp(mode, "align-fuse") == 0 ? "align_fuse" : mode,
                train_config, train_out);
    });
  }

  // eval
  std::string eval_ckpt, eval_config, eval_split = "test", eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--config", eval_config, "run config JSON")->required();
  eval_cmd->add_option("--split", eval_split, "train | val | test");
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->callback([&] {
    active = "eval";
    cmd_eval(eval_ckpt, eval_config, eval_split, eval_out);
  });

  // embed
  std::string emb_ckpt, emb_in, emb_out, emb_cache;
  bool emb_pca3 = false;
  auto* embed = app.add_subcommand("embed", "export embeddings as JSONL");
  embed->add_option("--checkpoint", emb_ckpt, "checkpoint path")->required();
  embed->add_option("--in", emb_in, "dataset JSONL path")->required();
  embed->add_option("--out", emb_out, "output JSONL path")->required();
  embed->add_option("--cache", emb_cache, "modality cache directory");
  embed->add_flag("--pca3", emb_pca3, "add 3D PCA coordinates");
  embed->callback([&] {
    active = "embed";
    cmd_embed(emb_ckpt, emb_in, emb_out, emb_pca3, emb_cache);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "matmodal " << active << ": error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
