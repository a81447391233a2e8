#include <cmath>
#include <cstdio>
#include <doctest.h>
#include <filesystem>
#include <fstream>

#include "matmodal/models.hpp"

using namespace matmodal;

namespace {

EncoderConfig small_encoder() {
  EncoderConfig cfg;
  cfg.embedding_dim = 8;
  cfg.cnn_channels = {4, 8};
  cfg.cnn_kernel = 5;
  cfg.cnn_stride = 4;
  cfg.mlp_hidden = {16};
  cfg.node_embedding_dim = 8;
  cfg.message_rounds = 2;
  cfg.num_rbf = 8;
  return cfg;
}

TrainConfig small_train(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 2;
  cfg.seed = seed;
  return cfg;
}

struct Fixture {
  std::vector<DatasetRecord> records;
  std::vector<ModalData> modal;
  SplitIndices split_idx;
  EncoderConfig enc;
  XrdSimConfig xrd;
  Standardization stats;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    out.records = synth_generate(24, 7);
    out.enc = small_encoder();
    out.modal = precompute(out.records, out.xrd, out.enc, 1);
    out.split_idx = split(out.records.size(), SplitSpec{});
    out.stats = compute_standardization(out.records, out.modal,
                                        out.split_idx.train);
    return out;
  }();
  return f;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("build_model is deterministic in the seed") {
  const EncoderConfig enc = small_encoder();
  Rng r1(42), r2(42), r3(43);
  const Model a = build_model("align_fuse", {Modality::kXrd, Modality::kComp},
                              {Task::kLattice}, enc, r1);
  const Model b = build_model("align_fuse", {Modality::kXrd, Modality::kComp},
                              {Task::kLattice}, enc, r2);
  const Model c = build_model("align_fuse", {Modality::kXrd, Modality::kComp},
                              {Task::kLattice}, enc, r3);
  const NamedParams pa = a.named_params(), pb = b.named_params(),
                    pc = c.named_params();
  REQUIRE(pa.size() == pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(pa[i].second.values() == pb[i].second.values());
    if (pa[i].second.values() != pc[i].second.values()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("encoders give finite outputs on benign inputs") {
  const Fixture& f = fixture();
  Rng rng(11);
  const Model m = build_model("align_fuse", {Modality::kXrd, Modality::kComp},
                              {Task::kLattice, Task::kSystem}, f.enc, rng);
  ModalData zero = f.modal[0];
  std::fill(zero.xrd.begin(), zero.xrd.end(), 0.0);
  const std::vector<const ModalData*> inputs{&f.modal[0], &zero};
  for (const ModalData* d : inputs) {
    const nn::Tensor z = m.embedding(*d, f.stats);
    REQUIRE(static_cast<int>(z.size()) == f.enc.embedding_dim);
    for (double v : z.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("structure encoder is invariant under node relabeling") {
  const Fixture& f = fixture();
  Rng rng(13);
  StructEncoder enc;
  enc.init(f.enc, rng);

  const StructureGraph& g = f.modal[0].graph;
  REQUIRE(g.node_species.size() >= 2);
  const std::size_t n = g.node_species.size();
  // reverse the node order and remap edge endpoints
  StructureGraph rev;
  rev.node_species.assign(g.node_species.rbegin(), g.node_species.rend());
  for (const auto& e : g.edges)
    rev.edges.push_back({n - 1 - e.src, n - 1 - e.dst, e.distance, e.image});

  const nn::Tensor a = enc.forward(g, f.enc);
  const nn::Tensor b = enc.forward(rev, f.enc);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::abs(a.values()[i] - b.values()[i]) <= 1e-10);
}

TEST_CASE("structure encoder accepts a graph with no edges") {
  const Fixture& f = fixture();
  Rng rng(13);
  StructEncoder enc;
  enc.init(f.enc, rng);
  StructureGraph g;
  g.node_species = {11, 17};
  const nn::Tensor z = enc.forward(g, f.enc);
  for (double v : z.values()) CHECK(std::isfinite(v));
}

TEST_CASE("alignment training runs and reduces the loss") {
  const Fixture& f = fixture();
  TrainConfig tc = small_train(1);
  tc.epochs = 8;
  tc.learning_rate = 3e-3;
  const TrainResult r = train_align(Modality::kXrd, Modality::kComp, f.records,
                                    f.modal, f.split_idx, f.enc, tc, f.xrd);
  const auto& hist = r.checkpoint.loss_history;
  REQUIRE(static_cast<int>(hist.size()) == tc.epochs);
  CHECK(hist.back() < hist.front());
  for (double v : hist) CHECK(std::isfinite(v));
}

TEST_CASE("training is deterministic") {
  const Fixture& f = fixture();
  const TrainConfig tc = small_train(3);
  auto run = [&] {
    return train_align_fuse({Task::kLattice, Task::kSystem}, f.records, f.modal,
                            f.split_idx, f.enc, tc, f.xrd);
  };
  const TrainResult a = run(), b = run();
  REQUIRE(a.checkpoint.tensors.size() == b.checkpoint.tensors.size());
  for (const auto& [name, t] : a.checkpoint.tensors)
    CHECK(t.values() == b.checkpoint.tensors.at(name).values());
  CHECK(a.checkpoint.loss_history == b.checkpoint.loss_history);
}

TEST_CASE("alignment-initialized encoders differ from random init") {
  const Fixture& f = fixture();
  const TrainConfig atc = small_train(5);
  const TrainResult align = train_align(Modality::kXrd, Modality::kComp,
                                        f.records, f.modal, f.split_idx, f.enc,
                                        atc, f.xrd);
  TrainConfig dtc = small_train(9);
  dtc.epochs = 1;
  dtc.learning_rate = 1e-6;  // keep parameters close to their init
  const TrainResult warm =
      train_downstream(Modality::kXrd, {Task::kLattice}, f.records, f.modal,
                       f.split_idx, f.enc, dtc, f.xrd, &align.checkpoint);
  const TrainResult cold =
      train_downstream(Modality::kXrd, {Task::kLattice}, f.records, f.modal,
                       f.split_idx, f.enc, dtc, f.xrd, nullptr);
  bool differs = false;
  for (const auto& [name, t] : warm.checkpoint.tensors)
    if (name.rfind("xrd.", 0) == 0 &&
        t.values() != cold.checkpoint.tensors.at(name).values())
      differs = true;
  CHECK(differs);
}

TEST_CASE("frozen encoder stays frozen during downstream training") {
  const Fixture& f = fixture();
  const TrainConfig atc = small_train(5);
  const TrainResult align = train_align(Modality::kComp, Modality::kXrd,
                                        f.records, f.modal, f.split_idx, f.enc,
                                        atc, f.xrd);
  TrainConfig dtc = small_train(2);
  dtc.freeze_encoder = true;
  const TrainResult r =
      train_downstream(Modality::kComp, {Task::kSystem}, f.records, f.modal,
                       f.split_idx, f.enc, dtc, f.xrd, &align.checkpoint);
  for (const auto& [name, t] : r.checkpoint.tensors)
    if (name.rfind("comp.", 0) == 0)
      CHECK(t.values() == align.checkpoint.tensors.at(name).values());
}

TEST_CASE("energy task rejects records without the label, naming them") {
  Fixture f = fixture();
  f.records[f.split_idx.train[0]].formation_energy.reset();
  const std::string bad_id = f.records[f.split_idx.train[0]].id;
  try {
    train_downstream(Modality::kComp, {Task::kEnergy}, f.records, f.modal,
                     f.split_idx, f.enc, small_train(1), f.xrd);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find(bad_id) != std::string::npos);
  }
}

TEST_CASE("standardization statistics") {
  const Fixture& f = fixture();
  const Standardization& s = f.stats;
  REQUIRE(s.feature_mean.size() == kNumFeatures);
  REQUIRE(s.feature_std.size() == kNumFeatures);
  for (double v : s.feature_std) CHECK(v > 0.0);
  for (double v : s.lattice_std) CHECK(v > 0.0);
  CHECK(s.energy_std > 0.0);
  // mean of the first lattice length over the train split
  double mean_a = 0.0;
  for (std::size_t i : f.split_idx.train)
    mean_a += f.records[i].structure.lattice.a;
  mean_a /= static_cast<double>(f.split_idx.train.size());
  CHECK(s.lattice_mean[0] == doctest::Approx(mean_a).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is byte identical") {
  const Fixture& f = fixture();
  const TrainResult r =
      train_align_fuse({Task::kLattice}, f.records, f.modal, f.split_idx, f.enc,
                       small_train(21), f.xrd);
  const std::string p1 = temp_path("mm_ckpt_rt1.mmck");
  const std::string p2 = temp_path("mm_ckpt_rt2.mmck");
  save_checkpoint(r.checkpoint, p1);
  const Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(loaded, p2);
  std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)),
                       std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)),
                       std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(!sa.empty());
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("predictions survive a checkpoint round trip bitwise") {
  const Fixture& f = fixture();
  const TrainResult r =
      train_align_fuse({Task::kLattice, Task::kEnergy, Task::kSystem},
                       f.records, f.modal, f.split_idx, f.enc, small_train(33),
                       f.xrd);
  const std::string path = temp_path("mm_ckpt_pred.mmck");
  save_checkpoint(r.checkpoint, path);
  const Checkpoint loaded = load_checkpoint(path);
  std::remove(path.c_str());

  const Model before = model_from_checkpoint(r.checkpoint);
  const Model after = model_from_checkpoint(loaded);
  for (std::size_t i : f.split_idx.test) {
    const Prediction pa = predict(before, r.checkpoint.stats, f.modal[i]);
    const Prediction pb = predict(after, loaded.stats, f.modal[i]);
    CHECK(pa.lattice == pb.lattice);
    CHECK(pa.energy == pb.energy);
    CHECK(pa.system_logits == pb.system_logits);
  }
}

TEST_CASE("checkpoint error handling") {
  const std::string path = temp_path("mm_ckpt_bad.mmck");
  SUBCASE("not a checkpoint file") {
    std::ofstream(path, std::ios::binary) << "definitely not a checkpoint";
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("not a checkpoint"),
                         std::exception);
  }
  SUBCASE("unsupported version") {
    const Fixture& f = fixture();
    Checkpoint ckpt;
    ckpt.encoder = f.enc;
    ckpt.tensors["w"] = nn::Tensor::from({2}, {1.0, 2.0});
    save_checkpoint(ckpt, path);
    std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
    fs.seekp(8);  // version field follows the 8-byte magic
    const std::uint32_t bad = 99;
    fs.write(reinterpret_cast<const char*>(&bad), sizeof(bad));
    fs.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"),
                         std::exception);
  }
  SUBCASE("payload corruption is detected") {
    Checkpoint ckpt;
    ckpt.tensors["w"] = nn::Tensor::from({4}, {1.0, 2.0, 3.0, 4.0});
    save_checkpoint(ckpt, path);
    std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
    fs.seekp(-3, std::ios::end);  // flip a byte inside the payload
    fs.put('\x7f');
    fs.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("checksum"), std::exception);
  }
  std::remove(path.c_str());
}

TEST_CASE("model_from_checkpoint rejects missing tensors") {
  const Fixture& f = fixture();
  TrainResult r = train_align_fuse({Task::kLattice}, f.records, f.modal,
                                   f.split_idx, f.enc, small_train(44), f.xrd);
  r.checkpoint.tensors.erase(r.checkpoint.tensors.begin());
  CHECK_THROWS(model_from_checkpoint(r.checkpoint));
}

TEST_CASE("config validation rejects bad values") {
  EncoderConfig enc;
  enc.embedding_dim = 0;
  CHECK_THROWS(enc.validate());
  enc = {};
  enc.graph_cutoff = -1.0;
  CHECK_THROWS(enc.validate());
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS(tc.validate());
  tc = {};
  tc.temperature = 0.0;
  CHECK_THROWS(tc.validate());
  tc = {};
  tc.lambda_contrastive = -0.5;
  CHECK_THROWS(tc.validate());
}

TEST_CASE("modality and task names round trip") {
  for (Modality m : {Modality::kXrd, Modality::kComp, Modality::kStruct})
    CHECK(modality_from_name(modality_name(m)) == m);
  for (Task t : {Task::kLattice, Task::kEnergy, Task::kSystem})
    CHECK(task_from_name(task_name(t)) == t);
  CHECK_THROWS(modality_from_name("sound"));
  CHECK_THROWS(task_from_name("bandgap"));
}
