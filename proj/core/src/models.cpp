#include "matmodal/models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <thread>

namespace matmodal {

using nn::Tensor;

const std::string& modality_name(Modality m) {
  static const std::string names[] = {"xrd", "comp", "struct"};
  return names[static_cast<int>(m)];
}

Modality modality_from_name(const std::string& name) {
  for (int i = 0; i < 3; ++i)
    if (modality_name(static_cast<Modality>(i)) == name)
      return static_cast<Modality>(i);
  throw std::invalid_argument("unknown modality: " + name);
}

const std::string& task_name(Task t) {
  static const std::string names[] = {"lattice", "energy", "system"};
  return names[static_cast<int>(t)];
}

Task task_from_name(const std::string& name) {
  for (int i = 0; i < 3; ++i)
    if (task_name(static_cast<Task>(i)) == name) return static_cast<Task>(i);
  throw std::invalid_argument("unknown task: " + name);
}

void EncoderConfig::validate() const {
  if (embedding_dim < 2)
    throw std::invalid_argument("EncoderConfig: embedding_dim must be >= 2");
  for (int c : cnn_channels)
    if (c < 1) throw std::invalid_argument("EncoderConfig: cnn channel < 1");
  for (int h : mlp_hidden)
    if (h < 1) throw std::invalid_argument("EncoderConfig: mlp hidden < 1");
  if (cnn_kernel < 1 || cnn_stride < 1 || node_embedding_dim < 1 ||
      message_rounds < 0 || num_rbf < 1 || !(graph_cutoff > 0.0) ||
      max_neighbors < 1)
    throw std::invalid_argument("EncoderConfig: invalid field");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size < 2");
  if (!(temperature > 0.0))
    throw std::invalid_argument("TrainConfig: temperature <= 0");
  if (lambda_contrastive < 0.0)
    throw std::invalid_argument("TrainConfig: lambda_contrastive < 0");
  if (!(learning_rate > 0.0) || epochs < 1)
    throw std::invalid_argument("TrainConfig: invalid learning_rate/epochs");
}

ModalData precompute_record(const DatasetRecord& rec, const XrdSimConfig& xrd_cfg,
                            const EncoderConfig& enc_cfg,
                            const ScatteringTable& stable,
                            const ElementTable& etable) {
  ModalData d;
  d.xrd = simulate_pattern(rec.structure, xrd_cfg, stable).intensities;
  d.comp = magpie_features(composition_of(rec.structure), etable);
  d.graph = build_radius_graph(rec.structure, enc_cfg.graph_cutoff,
                               static_cast<std::size_t>(enc_cfg.max_neighbors));
  return d;
}

std::vector<ModalData> precompute(const std::vector<DatasetRecord>& records,
                                  const XrdSimConfig& xrd_cfg,
                                  const EncoderConfig& enc_cfg,
                                  unsigned n_threads) {
  const ScatteringTable& stable = default_scattering_table();
  const ElementTable& etable = default_element_table();
  std::vector<ModalData> out(records.size());
  if (n_threads == 0)
    n_threads = std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, std::max<std::size_t>(records.size(), 1));
  std::vector<std::thread> workers;
  std::atomic<std::size_t> next{0};
  for (unsigned t = 0; t < n_threads; ++t)
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < records.size();
           i = next.fetch_add(1))
        out[i] = precompute_record(records[i], xrd_cfg, enc_cfg, stable, etable);
    });
  for (auto& w : workers) w.join();
  return out;
}

Standardization compute_standardization(
    const std::vector<DatasetRecord>& records,
    const std::vector<ModalData>& modal,
    const std::vector<std::size_t>& train_idx) {
  if (train_idx.empty())
    throw std::invalid_argument("compute_standardization: empty train split");
  auto mean_std = [](const std::vector<double>& xs) {
    double mu = 0.0;
    for (double x : xs) mu += x;
    mu /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mu) * (x - mu);
    return std::pair<double, double>{mu, std::max(std::sqrt(var / xs.size()), 1e-9)};
  };

  Standardization s;
  s.feature_mean.resize(kNumFeatures);
  s.feature_std.resize(kNumFeatures);
  for (int f = 0; f < kNumFeatures; ++f) {
    std::vector<double> col;
    col.reserve(train_idx.size());
    for (std::size_t i : train_idx) col.push_back(modal[i].comp[f]);
    std::tie(s.feature_mean[f], s.feature_std[f]) = mean_std(col);
  }
  s.lattice_mean.resize(6);
  s.lattice_std.resize(6);
  for (int k = 0; k < 6; ++k) {
    std::vector<double> col;
    col.reserve(train_idx.size());
    for (std::size_t i : train_idx) {
      const Lattice& l = records[i].structure.lattice;
      const double v[6] = {l.a, l.b, l.c, l.alpha, l.beta, l.gamma};
      col.push_back(v[k]);
    }
    std::tie(s.lattice_mean[k], s.lattice_std[k]) = mean_std(col);
  }
  std::vector<double> energies;
  for (std::size_t i : train_idx)
    if (records[i].formation_energy) energies.push_back(*records[i].formation_energy);
  if (!energies.empty())
    std::tie(s.energy_mean, s.energy_std) = mean_std(energies);
  return s;
}

namespace {

Tensor he_init(std::vector<int> shape, int fan_in, Rng& rng) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<double> vals(n);
  const double stddev = std::sqrt(2.0 / fan_in);
  for (auto& v : vals) v = rng.normal(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(vals), true);
}

Tensor zeros_param(std::vector<int> shape) {
  return Tensor::zeros(std::move(shape), true);
}

}  // namespace

// --- XrdEncoder ---

void XrdEncoder::init(const EncoderConfig& cfg, Rng& rng) {
  kernels.clear();
  biases.clear();
  int cin = 1;
  for (int cout : cfg.cnn_channels) {
    kernels.push_back(he_init({cout, cin, cfg.cnn_kernel},
                              cin * cfg.cnn_kernel, rng));
    biases.push_back(zeros_param({cout}));
    cin = cout;
  }
  out_w = he_init({cfg.embedding_dim, cin}, cin, rng);
  out_b = zeros_param({cfg.embedding_dim});
}

Tensor XrdEncoder::forward(const std::vector<double>& pattern,
                           const EncoderConfig& cfg) const {
  // intensities arrive on a 0..100 scale; bring them to order one
  std::vector<double> scaled(pattern.size());
  for (std::size_t i = 0; i < pattern.size(); ++i) scaled[i] = pattern[i] / 100.0;
  Tensor x = Tensor::from({1, static_cast<int>(pattern.size())}, std::move(scaled));
  for (std::size_t b = 0; b < kernels.size(); ++b)
    x = nn::relu(nn::conv1d(x, kernels[b], biases[b], cfg.cnn_stride,
                            cfg.cnn_kernel / 2));
  return nn::linear(nn::global_avg_pool(x), out_w, out_b);
}

NamedParams XrdEncoder::named_params(const std::string& prefix) const {
  NamedParams out;
  for (std::size_t b = 0; b < kernels.size(); ++b) {
    out.push_back({prefix + ".conv" + std::to_string(b) + ".kernel", kernels[b]});
    out.push_back({prefix + ".conv" + std::to_string(b) + ".bias", biases[b]});
  }
  out.push_back({prefix + ".out.weight", out_w});
  out.push_back({prefix + ".out.bias", out_b});
  return out;
}

// --- CompEncoder ---

void CompEncoder::init(const EncoderConfig& cfg, Rng& rng) {
  ws.clear();
  bs.clear();
  int in = kNumFeatures;
  for (int h : cfg.mlp_hidden) {
    ws.push_back(he_init({h, in}, in, rng));
    bs.push_back(zeros_param({h}));
    in = h;
  }
  ws.push_back(he_init({cfg.embedding_dim, in}, in, rng));
  bs.push_back(zeros_param({cfg.embedding_dim}));
}

Tensor CompEncoder::forward(const FeatureVector& features,
                            const Standardization& stats,
                            const EncoderConfig&) const {
  if (features.size() != kNumFeatures)
    throw std::invalid_argument("CompEncoder: feature vector length mismatch");
  if (stats.feature_mean.size() != kNumFeatures)
    throw std::invalid_argument("CompEncoder: standardization stats missing");
  std::vector<double> z(kNumFeatures);
  for (int i = 0; i < kNumFeatures; ++i)
    z[i] = (features[i] - stats.feature_mean[i]) / stats.feature_std[i];
  Tensor x = Tensor::from({kNumFeatures}, std::move(z));
  for (std::size_t l = 0; l + 1 < ws.size(); ++l)
    x = nn::relu(nn::linear(x, ws[l], bs[l]));
  return nn::linear(x, ws.back(), bs.back());
}

NamedParams CompEncoder::named_params(const std::string& prefix) const {
  NamedParams out;
  for (std::size_t l = 0; l < ws.size(); ++l) {
    out.push_back({prefix + ".dense" + std::to_string(l) + ".weight", ws[l]});
    out.push_back({prefix + ".dense" + std::to_string(l) + ".bias", bs[l]});
  }
  return out;
}

// --- StructEncoder ---

void StructEncoder::init(const EncoderConfig& cfg, Rng& rng) {
  const int nd = cfg.node_embedding_dim;
  species_embedding = he_init({kMaxAtomicNumber + 1, nd}, nd, rng);
  msg_node_w = he_init({nd, nd}, nd, rng);
  msg_edge_w = he_init({nd, cfg.num_rbf}, cfg.num_rbf, rng);
  msg_b = zeros_param({nd});
  upd_w = he_init({nd, nd}, nd, rng);
  upd_b = zeros_param({nd});
  out_w = he_init({cfg.embedding_dim, nd}, nd, rng);
  out_b = zeros_param({cfg.embedding_dim});
}

Tensor StructEncoder::forward(const StructureGraph& graph,
                              const EncoderConfig& cfg) const {
  if (graph.node_species.empty())
    throw std::invalid_argument("StructEncoder: empty graph");
  const std::size_t n = graph.node_species.size();
  std::vector<std::size_t> species_idx(n);
  for (std::size_t i = 0; i < n; ++i)
    species_idx[i] = static_cast<std::size_t>(graph.node_species[i]);
  Tensor h = nn::gather_rows(species_embedding, species_idx);

  const std::size_t ne = graph.edges.size();
  if (ne > 0 && cfg.message_rounds > 0) {
    // Gaussian radial basis over [0, cutoff], width = center spacing
    const int k = cfg.num_rbf;
    const double spacing = cfg.graph_cutoff / (k - 1);
    std::vector<double> rbf(ne * static_cast<std::size_t>(k));
    for (std::size_t e = 0; e < ne; ++e)
      for (int j = 0; j < k; ++j) {
        const double dc = graph.edges[e].distance - j * spacing;
        rbf[e * k + j] = std::exp(-dc * dc / (2.0 * spacing * spacing));
      }
    Tensor edge_feat = Tensor::from({static_cast<int>(ne), k}, std::move(rbf));
    std::vector<std::size_t> src(ne), dst(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      src[e] = graph.edges[e].src;
      dst[e] = graph.edges[e].dst;
    }
    const Tensor edge_proj =
        nn::matmul(edge_feat, nn::transpose(msg_edge_w));  // shared by rounds
    for (int round = 0; round < cfg.message_rounds; ++round) {
      Tensor msg = nn::relu(nn::add(
          nn::linear(nn::gather_rows(h, src), msg_node_w, msg_b), edge_proj));
      Tensor agg = nn::segment_sum(msg, dst, n);
      h = nn::relu(nn::add(h, nn::linear(agg, upd_w, upd_b)));
    }
  }
  return nn::linear(nn::mean_rows(h), out_w, out_b);
}

NamedParams StructEncoder::named_params(const std::string& prefix) const {
  return {{prefix + ".species_embedding", species_embedding},
          {prefix + ".msg.node_weight", msg_node_w},
          {prefix + ".msg.edge_weight", msg_edge_w},
          {prefix + ".msg.bias", msg_b},
          {prefix + ".update.weight", upd_w},
          {prefix + ".update.bias", upd_b},
          {prefix + ".out.weight", out_w},
          {prefix + ".out.bias", out_b}};
}

// --- FusionBlock ---

void FusionBlock::init(const EncoderConfig& cfg, Rng& rng) {
  const int d = cfg.embedding_dim;
  w1 = he_init({d, 2 * d}, 2 * d, rng);
  b1 = zeros_param({d});
  w2 = he_init({d, d}, d, rng);
  b2 = zeros_param({d});
  w3 = he_init({d, d}, d, rng);
  b3 = zeros_param({d});
}

Tensor FusionBlock::forward(const Tensor& z1, const Tensor& z2) const {
  Tensor z = nn::concat(z1, z2);
  z = nn::relu(nn::linear(z, w1, b1));
  z = nn::relu(nn::linear(z, w2, b2));
  return nn::linear(z, w3, b3);
}

NamedParams FusionBlock::named_params(const std::string& prefix) const {
  return {{prefix + ".dense0.weight", w1}, {prefix + ".dense0.bias", b1},
          {prefix + ".dense1.weight", w2}, {prefix + ".dense1.bias", b2},
          {prefix + ".dense2.weight", w3}, {prefix + ".dense2.bias", b3}};
}

// --- Head ---

void Head::init(int in_dim, int out_dim, Rng& rng) {
  w1 = he_init({64, in_dim}, in_dim, rng);
  b1 = zeros_param({64});
  w2 = he_init({out_dim, 64}, 64, rng);
  b2 = zeros_param({out_dim});
}

Tensor Head::forward(const Tensor& z) const {
  return nn::linear(nn::relu(nn::linear(z, w1, b1)), w2, b2);
}

NamedParams Head::named_params(const std::string& prefix) const {
  return {{prefix + ".dense0.weight", w1},
          {prefix + ".dense0.bias", b1},
          {prefix + ".dense1.weight", w2},
          {prefix + ".dense1.bias", b2}};
}

// --- Model ---

NamedParams Model::named_params() const {
  NamedParams out;
  if (xrd) {
    auto p = xrd->named_params("xrd");
    out.insert(out.end(), p.begin(), p.end());
  }
  if (comp) {
    auto p = comp->named_params("comp");
    out.insert(out.end(), p.begin(), p.end());
  }
  if (structure) {
    auto p = structure->named_params("struct");
    out.insert(out.end(), p.begin(), p.end());
  }
  if (fusion) {
    auto p = fusion->named_params("fusion");
    out.insert(out.end(), p.begin(), p.end());
  }
  for (const auto& [task, head] : heads) {
    auto p = head.named_params("head." + task_name(task));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<Tensor> Model::param_tensors() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

void Model::load_tensors(const std::map<std::string, Tensor>& tensors) {
  for (auto& [name, t] : named_params()) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::runtime_error("checkpoint missing tensor: " + name);
    if (it->second.shape() != t.shape())
      throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
    const_cast<Tensor&>(t).mutable_values() = it->second.values();
  }
}

Tensor Model::encode(Modality m, const ModalData& data,
                     const Standardization& stats) const {
  switch (m) {
    case Modality::kXrd:
      if (!xrd) throw std::runtime_error("model has no XRD encoder");
      return xrd->forward(data.xrd, enc_cfg);
    case Modality::kComp:
      if (!comp) throw std::runtime_error("model has no composition encoder");
      return comp->forward(data.comp, stats, enc_cfg);
    case Modality::kStruct:
      if (!structure) throw std::runtime_error("model has no structure encoder");
      return structure->forward(data.graph, enc_cfg);
  }
  throw std::logic_error("unreachable");
}

Tensor Model::embedding(const ModalData& data, const Standardization& stats) const {
  if (fusion)
    return fusion->forward(encode(modalities[0], data, stats),
                           encode(modalities[1], data, stats));
  return encode(modalities[0], data, stats);
}

Model build_model(const std::string& kind, const std::vector<Modality>& modalities,
                  const std::vector<Task>& tasks, const EncoderConfig& cfg,
                  Rng& rng) {
  cfg.validate();
  Model m;
  m.kind = kind;
  m.modalities = modalities;
  m.tasks = tasks;
  m.enc_cfg = cfg;
  // fixed construction order keeps parameter initialization reproducible
  for (Modality mod : {Modality::kXrd, Modality::kComp, Modality::kStruct}) {
    if (std::find(modalities.begin(), modalities.end(), mod) == modalities.end())
      continue;
    switch (mod) {
      case Modality::kXrd:
        m.xrd.emplace();
        m.xrd->init(cfg, rng);
        break;
      case Modality::kComp:
        m.comp.emplace();
        m.comp->init(cfg, rng);
        break;
      case Modality::kStruct:
        m.structure.emplace();
        m.structure->init(cfg, rng);
        break;
    }
  }
  if (kind == "align_fuse") {
    m.fusion.emplace();
    m.fusion->init(cfg, rng);
  }
  static const int kHeadOut[] = {6, 1, 7};
  for (Task t : {Task::kLattice, Task::kEnergy, Task::kSystem}) {
    if (std::find(tasks.begin(), tasks.end(), t) == tasks.end()) continue;
    Head h;
    h.init(cfg.embedding_dim, kHeadOut[static_cast<int>(t)], rng);
    m.heads.emplace(t, std::move(h));
  }
  return m;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  std::vector<Modality> mods;
  for (const auto& s : ckpt.modalities) mods.push_back(modality_from_name(s));
  std::vector<Task> tasks;
  for (const auto& s : ckpt.tasks) tasks.push_back(task_from_name(s));
  Rng rng(ckpt.seed);
  Model m = build_model(ckpt.model_kind, mods, tasks, ckpt.encoder, rng);
  m.load_tensors(ckpt.tensors);
  return m;
}

// --- training ---

namespace {

struct BatchTargets {
  Tensor lattice;              // [N,6] standardized
  Tensor energy;               // [N,1] standardized
  std::vector<int> system;     // labels 0..6
};

BatchTargets make_targets(const std::vector<DatasetRecord>& records,
                          const std::vector<std::size_t>& batch,
                          const std::vector<Task>& tasks,
                          const Standardization& stats) {
  BatchTargets t;
  const int n = static_cast<int>(batch.size());
  if (std::find(tasks.begin(), tasks.end(), Task::kLattice) != tasks.end()) {
    std::vector<double> vals;
    vals.reserve(batch.size() * 6);
    for (std::size_t i : batch) {
      const Lattice& l = records[i].structure.lattice;
      const double v[6] = {l.a, l.b, l.c, l.alpha, l.beta, l.gamma};
      for (int k = 0; k < 6; ++k)
        vals.push_back((v[k] - stats.lattice_mean[k]) / stats.lattice_std[k]);
    }
    t.lattice = Tensor::from({n, 6}, std::move(vals));
  }
  if (std::find(tasks.begin(), tasks.end(), Task::kEnergy) != tasks.end()) {
    std::vector<double> vals;
    vals.reserve(batch.size());
    for (std::size_t i : batch) {
      if (!records[i].formation_energy)
        throw std::runtime_error("task 'energy': record " + records[i].id +
                                 " has no formation_energy label");
      vals.push_back((*records[i].formation_energy - stats.energy_mean) /
                     stats.energy_std);
    }
    t.energy = Tensor::from({n, 1}, std::move(vals));
  }
  if (std::find(tasks.begin(), tasks.end(), Task::kSystem) != tasks.end())
    for (std::size_t i : batch)
      t.system.push_back(static_cast<int>(records[i].system_label()));
  return t;
}

Tensor task_loss(const Model& model, const Tensor& emb_batch,
                 const BatchTargets& targets) {
  Tensor loss = Tensor::scalar(0.0);
  for (const auto& [task, head] : model.heads) {
    const Tensor pred = head.forward(emb_batch);
    switch (task) {
      case Task::kLattice:
        loss = nn::add(loss, nn::mse_loss(pred, targets.lattice));
        break;
      case Task::kEnergy:
        loss = nn::add(loss, nn::mse_loss(pred, targets.energy));
        break;
      case Task::kSystem:
        loss = nn::add(loss, nn::cross_entropy_loss(pred, targets.system));
        break;
    }
  }
  return loss;
}

std::vector<std::vector<std::size_t>> make_batches(
    std::vector<std::size_t> order, int batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(batch_size))
    batches.emplace_back(
        order.begin() + start,
        order.begin() + std::min(order.size(),
                                 start + static_cast<std::size_t>(batch_size)));
  return batches;
}

std::vector<std::vector<double>> snapshot_params(const std::vector<Tensor>& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& p : ps) out.push_back(p.values());
  return out;
}

void restore_params(std::vector<Tensor>& ps,
                    const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i].mutable_values() = snap[i];
}

Checkpoint finalize_checkpoint(const Model& model, const std::string& kind,
                               const EncoderConfig& enc_cfg,
                               const TrainConfig& train_cfg,
                               const XrdSimConfig& xrd_cfg,
                               const Standardization& stats,
                               std::vector<double> loss_history) {
  Checkpoint ckpt;
  ckpt.model_kind = kind;
  for (Modality m : model.modalities)
    ckpt.modalities.push_back(modality_name(m));
  for (Task t : model.tasks) ckpt.tasks.push_back(task_name(t));
  ckpt.encoder = enc_cfg;
  ckpt.train = train_cfg;
  ckpt.xrd = xrd_cfg;
  ckpt.stats = stats;
  ckpt.seed = train_cfg.seed;
  for (const auto& [name, t] : model.named_params()) ckpt.tensors[name] = t;
  ckpt.loss_history = std::move(loss_history);
  return ckpt;
}

}  // namespace

TrainResult train_align(Modality m1, Modality m2,
                        const std::vector<DatasetRecord>& records,
                        const std::vector<ModalData>& modal,
                        const SplitIndices& split_idx, const EncoderConfig& enc_cfg,
                        const TrainConfig& train_cfg, const XrdSimConfig& xrd_cfg) {
  train_cfg.validate();
  if (m1 == m2) throw std::invalid_argument("train_align: modalities must differ");
  const Standardization stats =
      compute_standardization(records, modal, split_idx.train);
  Rng rng(train_cfg.seed);
  Model model = build_model("align", {m1, m2}, {}, enc_cfg, rng);
  std::vector<Tensor> params = model.param_tensors();
  Tensor log_inv_tau;
  if (train_cfg.trainable_temperature) {
    log_inv_tau = Tensor::scalar(std::log(1.0 / train_cfg.temperature), true);
    params.push_back(log_inv_tau);
  }
  nn::Adam opt(std::move(params), {.lr = train_cfg.learning_rate});

  std::vector<double> history;
  std::vector<std::size_t> order = split_idx.train;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (const auto& batch : make_batches(order, train_cfg.batch_size)) {
      if (batch.size() < 2) {
        std::cerr << "train_align: skipping batch of size " << batch.size()
                  << " (need >= 2 for contrastive loss)\n";
        continue;
      }
      std::vector<Tensor> e1, e2;
      for (std::size_t i : batch) {
        e1.push_back(model.encode(m1, modal[i], stats));
        e2.push_back(model.encode(m2, modal[i], stats));
      }
      const Tensor b1 = nn::stack_rows(e1), b2 = nn::stack_rows(e2);
      Tensor loss =
          train_cfg.trainable_temperature
              ? nn::contrastive_loss(b1, b2, nn::exp(log_inv_tau),
                                     train_cfg.variant)
              : nn::contrastive_loss(b1, b2, train_cfg.temperature,
                                     train_cfg.variant);
      opt.zero_grad();
      loss.backward();
      opt.step();
      epoch_loss += loss.item();
      ++n_batches;
    }
    history.push_back(n_batches ? epoch_loss / n_batches : 0.0);
  }
  Checkpoint ckpt = finalize_checkpoint(model, "align", enc_cfg, train_cfg,
                                        xrd_cfg, stats, std::move(history));
  if (train_cfg.trainable_temperature)
    ckpt.tensors["contrastive.log_inv_tau"] = log_inv_tau;
  return {std::move(ckpt)};
}

TrainResult train_downstream(Modality modality, const std::vector<Task>& tasks,
                             const std::vector<DatasetRecord>& records,
                             const std::vector<ModalData>& modal,
                             const SplitIndices& split_idx,
                             const EncoderConfig& enc_cfg,
                             const TrainConfig& train_cfg,
                             const XrdSimConfig& xrd_cfg,
                             const Checkpoint* align_init) {
  train_cfg.validate();
  if (tasks.empty())
    throw std::invalid_argument("train_downstream: no tasks requested");
  const Standardization stats =
      compute_standardization(records, modal, split_idx.train);
  Rng rng(train_cfg.seed);
  Model model = build_model("downstream", {modality}, tasks, enc_cfg, rng);

  NamedParams encoder_params;
  if (modality == Modality::kXrd) encoder_params = model.xrd->named_params("xrd");
  if (modality == Modality::kComp) encoder_params = model.comp->named_params("comp");
  if (modality == Modality::kStruct)
    encoder_params = model.structure->named_params("struct");

  if (align_init) {
    for (auto& [name, t] : encoder_params) {
      auto it = align_init->tensors.find(name);
      if (it == align_init->tensors.end())
        throw std::runtime_error("alignment checkpoint missing tensor: " + name);
      if (it->second.shape() != t.shape())
        throw std::runtime_error("alignment checkpoint shape mismatch: " + name);
      const_cast<Tensor&>(t).mutable_values() = it->second.values();
    }
  }

  std::vector<Tensor> trainable;
  if (train_cfg.freeze_encoder) {
    for (const auto& [task, head] : model.heads)
      for (auto& [name, t] : head.named_params("h")) trainable.push_back(t);
  } else {
    trainable = model.param_tensors();
  }
  nn::Adam opt(trainable, {.lr = train_cfg.learning_rate});

  auto eval_split_loss = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    double total = 0.0;
    for (const auto& batch : make_batches(idx, train_cfg.batch_size)) {
      std::vector<Tensor> embs;
      for (std::size_t i : batch) embs.push_back(model.encode(modality, modal[i], stats));
      const BatchTargets targets = make_targets(records, batch, tasks, stats);
      total += task_loss(model, nn::stack_rows(embs), targets).item() *
               batch.size();
    }
    return total / idx.size();
  };

  std::vector<double> history;
  double best_val = std::numeric_limits<double>::infinity();
  auto all_params = model.param_tensors();
  std::vector<std::vector<double>> best_snapshot = snapshot_params(all_params);
  std::vector<std::size_t> order = split_idx.train;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (const auto& batch : make_batches(order, train_cfg.batch_size)) {
      std::vector<Tensor> embs;
      for (std::size_t i : batch)
        embs.push_back(model.encode(modality, modal[i], stats));
      const BatchTargets targets = make_targets(records, batch, tasks, stats);
      Tensor loss = task_loss(model, nn::stack_rows(embs), targets);
      opt.zero_grad();
      loss.backward();
      opt.step();
      epoch_loss += loss.item();
      ++n_batches;
    }
    history.push_back(n_batches ? epoch_loss / n_batches : 0.0);
    const double val_loss =
        split_idx.val.empty() ? history.back() : eval_split_loss(split_idx.val);
    if (val_loss < best_val) {
      best_val = val_loss;
      best_snapshot = snapshot_params(all_params);
    }
  }
  restore_params(all_params, best_snapshot);
  return {finalize_checkpoint(model, "downstream", enc_cfg, train_cfg, xrd_cfg,
                              stats, std::move(history))};
}

TrainResult train_align_fuse(const std::vector<Task>& tasks,
                             const std::vector<DatasetRecord>& records,
                             const std::vector<ModalData>& modal,
                             const SplitIndices& split_idx,
                             const EncoderConfig& enc_cfg,
                             const TrainConfig& train_cfg,
                             const XrdSimConfig& xrd_cfg) {
  train_cfg.validate();
  if (tasks.empty())
    throw std::invalid_argument("train_align_fuse: no tasks requested");
  const Standardization stats =
      compute_standardization(records, modal, split_idx.train);
  Rng rng(train_cfg.seed);
  Model model =
      build_model("align_fuse", {Modality::kXrd, Modality::kComp}, tasks,
                  enc_cfg, rng);
  std::vector<Tensor> params = model.param_tensors();
  Tensor log_inv_tau;
  if (train_cfg.trainable_temperature && train_cfg.lambda_contrastive > 0.0) {
    log_inv_tau = Tensor::scalar(std::log(1.0 / train_cfg.temperature), true);
    params.push_back(log_inv_tau);
  }
  nn::Adam opt(std::move(params), {.lr = train_cfg.learning_rate});

  auto batch_loss = [&](const std::vector<std::size_t>& batch) {
    std::vector<Tensor> e1, e2, fused;
    for (std::size_t i : batch) {
      e1.push_back(model.encode(Modality::kXrd, modal[i], stats));
      e2.push_back(model.encode(Modality::kComp, modal[i], stats));
      fused.push_back(model.fusion->forward(e1.back(), e2.back()));
    }
    const BatchTargets targets = make_targets(records, batch, tasks, stats);
    Tensor loss = task_loss(model, nn::stack_rows(fused), targets);
    if (train_cfg.lambda_contrastive > 0.0 && batch.size() >= 2) {
      const Tensor b1 = nn::stack_rows(e1), b2 = nn::stack_rows(e2);
      const Tensor contrast =
          log_inv_tau.defined()
              ? nn::contrastive_loss(b1, b2, nn::exp(log_inv_tau),
                                     train_cfg.variant)
              : nn::contrastive_loss(b1, b2, train_cfg.temperature,
                                     train_cfg.variant);
      loss = nn::add(loss, nn::scale(contrast, train_cfg.lambda_contrastive));
    }
    return loss;
  };

  auto eval_split_loss = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    double total = 0.0;
    for (const auto& batch : make_batches(idx, train_cfg.batch_size))
      total += batch_loss(batch).item() * batch.size();
    return total / idx.size();
  };

  std::vector<double> history;
  double best_val = std::numeric_limits<double>::infinity();
  auto all_params = model.param_tensors();
  std::vector<std::vector<double>> best_snapshot = snapshot_params(all_params);
  std::vector<std::size_t> order = split_idx.train;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (const auto& batch : make_batches(order, train_cfg.batch_size)) {
      Tensor loss = batch_loss(batch);
      opt.zero_grad();
      loss.backward();
      opt.step();
      epoch_loss += loss.item();
      ++n_batches;
    }
    history.push_back(n_batches ? epoch_loss / n_batches : 0.0);
    const double val_loss =
        split_idx.val.empty() ? history.back() : eval_split_loss(split_idx.val);
    if (val_loss < best_val) {
      best_val = val_loss;
      best_snapshot = snapshot_params(all_params);
    }
  }
  restore_params(all_params, best_snapshot);
  return {finalize_checkpoint(model, "align_fuse", enc_cfg, train_cfg, xrd_cfg,
                              stats, std::move(history))};
}

Prediction predict(const Model& model, const Standardization& stats,
                   const ModalData& data) {
  const Tensor emb = model.embedding(data, stats);
  Prediction out;
  for (const auto& [task, head] : model.heads) {
    const Tensor pred = head.forward(emb);
    switch (task) {
      case Task::kLattice:
        out.lattice.resize(6);
        for (int k = 0; k < 6; ++k)
          out.lattice[k] =
              pred.values()[k] * stats.lattice_std[k] + stats.lattice_mean[k];
        break;
      case Task::kEnergy:
        out.energy = pred.values()[0] * stats.energy_std + stats.energy_mean;
        break;
      case Task::kSystem:
        out.system_logits = pred.values();
        break;
    }
  }
  return out;
}

}  // namespace matmodal
