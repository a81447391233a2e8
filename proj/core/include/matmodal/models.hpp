#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matmodal/dataset.hpp"
#include "matmodal/featurize.hpp"
#include "matmodal/graph.hpp"
#include "matmodal/nn.hpp"
#include "matmodal/rng.hpp"
#include "matmodal/xrd.hpp"

namespace matmodal {

enum class Modality : int { kXrd = 0, kComp = 1, kStruct = 2 };
const std::string& modality_name(Modality m);
Modality modality_from_name(const std::string& name);

enum class Task : int { kLattice = 0, kEnergy = 1, kSystem = 2 };
const std::string& task_name(Task t);
Task task_from_name(const std::string& name);

struct EncoderConfig {
  int embedding_dim = 128;
  // XRD CNN
  std::vector<int> cnn_channels = {8, 16, 32};
  int cnn_kernel = 7;
  int cnn_stride = 2;
  // composition MLP
  std::vector<int> mlp_hidden = {256, 128};
  // structure MPNN
  int node_embedding_dim = 64;
  int message_rounds = 3;
  int num_rbf = 32;
  double graph_cutoff = 5.0;
  int max_neighbors = 12;

  void validate() const;
};

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 1e-3;
  int epochs = 20;
  double temperature = 0.1;
  double lambda_contrastive = 1.0;  // joint objective weight
  std::uint64_t seed = 0;
  bool freeze_encoder = false;
  bool trainable_temperature = false;
  nn::ContrastiveVariant variant = nn::ContrastiveVariant::kStandard;

  void validate() const;
};

// Per-record precomputed modality inputs.
struct ModalData {
  std::vector<double> xrd;      // grid intensities, length n_points
  FeatureVector comp;           // length kNumFeatures
  StructureGraph graph;
};

ModalData precompute_record(const DatasetRecord& rec, const XrdSimConfig& xrd_cfg,
                            const EncoderConfig& enc_cfg,
                            const ScatteringTable& stable,
                            const ElementTable& etable);
std::vector<ModalData> precompute(const std::vector<DatasetRecord>& records,
                                  const XrdSimConfig& xrd_cfg,
                                  const EncoderConfig& enc_cfg,
                                  unsigned n_threads = 0);

// Train-split statistics used to z-score features and targets.
struct Standardization {
  std::vector<double> feature_mean, feature_std;  // kNumFeatures
  std::vector<double> lattice_mean, lattice_std;  // 6
  double energy_mean = 0.0, energy_std = 1.0;
};

Standardization compute_standardization(
    const std::vector<DatasetRecord>& records,
    const std::vector<ModalData>& modal,
    const std::vector<std::size_t>& train_idx);

// --- model parameter blocks ---
using NamedParams = std::vector<std::pair<std::string, nn::Tensor>>;

struct XrdEncoder {
  std::vector<nn::Tensor> kernels, biases;  // per conv block
  nn::Tensor out_w, out_b;                  // last channels -> d
  void init(const EncoderConfig& cfg, Rng& rng);
  nn::Tensor forward(const std::vector<double>& pattern,
                     const EncoderConfig& cfg) const;
  NamedParams named_params(const std::string& prefix) const;
};

struct CompEncoder {
  std::vector<nn::Tensor> ws, bs;  // hidden layers then output layer
  void init(const EncoderConfig& cfg, Rng& rng);
  nn::Tensor forward(const FeatureVector& features, const Standardization& stats,
                     const EncoderConfig& cfg) const;
  NamedParams named_params(const std::string& prefix) const;
};

struct StructEncoder {
  nn::Tensor species_embedding;         // [99, node_dim]
  nn::Tensor msg_node_w, msg_edge_w, msg_b;  // message MLP
  nn::Tensor upd_w, upd_b;              // node update
  nn::Tensor out_w, out_b;              // node_dim -> d
  void init(const EncoderConfig& cfg, Rng& rng);
  nn::Tensor forward(const StructureGraph& graph, const EncoderConfig& cfg) const;
  NamedParams named_params(const std::string& prefix) const;
};

struct FusionBlock {
  nn::Tensor w1, b1, w2, b2, w3, b3;  // 2d -> d -> d -> d
  void init(const EncoderConfig& cfg, Rng& rng);
  nn::Tensor forward(const nn::Tensor& z1, const nn::Tensor& z2) const;
  NamedParams named_params(const std::string& prefix) const;
};

struct Head {
  nn::Tensor w1, b1, w2, b2;  // d -> 64 -> out
  void init(int in_dim, int out_dim, Rng& rng);
  nn::Tensor forward(const nn::Tensor& z) const;  // z is [N,d] or [d]
  NamedParams named_params(const std::string& prefix) const;
};

// --- checkpoint ---
struct Checkpoint {
  int format_version = 1;
  std::string model_kind;               // "align" | "downstream" | "align_fuse"
  std::vector<std::string> modalities;  // encoder order
  std::vector<std::string> tasks;       // empty for pure alignment
  EncoderConfig encoder;
  TrainConfig train;
  XrdSimConfig xrd;
  Standardization stats;
  std::uint64_t seed = 0;
  std::map<std::string, nn::Tensor> tensors;
  std::vector<double> loss_history;  // per-epoch mean training loss
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Aggregate model materialized from a checkpoint (or fresh for training).
struct Model {
  std::string kind;
  std::vector<Modality> modalities;
  std::vector<Task> tasks;
  EncoderConfig enc_cfg;

  std::optional<XrdEncoder> xrd;
  std::optional<CompEncoder> comp;
  std::optional<StructEncoder> structure;
  std::optional<FusionBlock> fusion;
  std::map<Task, Head> heads;

  NamedParams named_params() const;
  std::vector<nn::Tensor> param_tensors() const;
  void load_tensors(const std::map<std::string, nn::Tensor>& tensors);

  // encoder embedding of one record's modality data
  nn::Tensor encode(Modality m, const ModalData& data,
                    const Standardization& stats) const;
  // model embedding: single-modality encoder output, or the fused embedding
  // for align_fuse models
  nn::Tensor embedding(const ModalData& data, const Standardization& stats) const;
};

Model build_model(const std::string& kind, const std::vector<Modality>& modalities,
                  const std::vector<Task>& tasks, const EncoderConfig& cfg,
                  Rng& rng);
Model model_from_checkpoint(const Checkpoint& ckpt);

// --- training pipelines ---
struct TrainResult {
  Checkpoint checkpoint;
};

// Contrastive alignment pre-training of a modality pair (CLIP-style loss).
TrainResult train_align(Modality m1, Modality m2,
                        const std::vector<DatasetRecord>& records,
                        const std::vector<ModalData>& modal,
                        const SplitIndices& split_idx, const EncoderConfig& enc_cfg,
                        const TrainConfig& train_cfg, const XrdSimConfig& xrd_cfg);

// Single-modality supervised training; encoder optionally initialized from an
// alignment checkpoint (fine-tuned unless train_cfg.freeze_encoder).
TrainResult train_downstream(Modality modality, const std::vector<Task>& tasks,
                             const std::vector<DatasetRecord>& records,
                             const std::vector<ModalData>& modal,
                             const SplitIndices& split_idx,
                             const EncoderConfig& enc_cfg,
                             const TrainConfig& train_cfg,
                             const XrdSimConfig& xrd_cfg,
                             const Checkpoint* align_init = nullptr);

// Joint training of XRD + composition encoders with fusion:
// L = L_task + lambda * L_contrastive per batch.
TrainResult train_align_fuse(const std::vector<Task>& tasks,
                             const std::vector<DatasetRecord>& records,
                             const std::vector<ModalData>& modal,
                             const SplitIndices& split_idx,
                             const EncoderConfig& enc_cfg,
                             const TrainConfig& train_cfg,
                             const XrdSimConfig& xrd_cfg);

// --- prediction ---
struct Prediction {
  std::vector<double> lattice;  // 6 physical-unit values when task present
  std::optional<double> energy;
  std::vector<double> system_logits;  // 7 when task present
};

Prediction predict(const Model& model, const Standardization& stats,
                   const ModalData& data);

}  // namespace matmodal
