#include "matmodal/config_json.hpp"

#include <sstream>

namespace matmodal {

using nlohmann::json;

namespace {
template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void require_known_keys(const json& j, std::initializer_list<const char*> allowed,
                        const char* context) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument(std::string(context) + ": unknown key '" +
                                  key + "'");
  }
}
}  // namespace

void to_json(json& j, const XrdSimConfig& c) {
  j = json{{"wavelength", c.wavelength},
           {"sigma", c.sigma},
           {"two_theta_min", c.two_theta_min},
           {"two_theta_max", c.two_theta_max},
           {"n_points", c.n_points},
           {"approximate_form_factors", c.approximate_form_factors}};
}

void from_json(const json& j, XrdSimConfig& c) {
  require_known_keys(j,
      {"wavelength", "sigma", "two_theta_min", "two_theta_max", "n_points",
       "approximate_form_factors"},
      "XrdSimConfig");

  get_if_present(j, "wavelength", c.wavelength);
  get_if_present(j, "sigma", c.sigma);
  get_if_present(j, "two_theta_min", c.two_theta_min);
  get_if_present(j, "two_theta_max", c.two_theta_max);
  get_if_present(j, "n_points", c.n_points);
  get_if_present(j, "approximate_form_factors", c.approximate_form_factors);
  c.validate();
}

void to_json(json& j, const EncoderConfig& c) {
  j = json{{"embedding_dim", c.embedding_dim},
           {"cnn_channels", c.cnn_channels},
           {"cnn_kernel", c.cnn_kernel},
           {"cnn_stride", c.cnn_stride},
           {"mlp_hidden", c.mlp_hidden},
           {"node_embedding_dim", c.node_embedding_dim},
           {"message_rounds", c.message_rounds},
           {"num_rbf", c.num_rbf},
           {"graph_cutoff", c.graph_cutoff},
           {"max_neighbors", c.max_neighbors}};
}

void from_json(const json& j, EncoderConfig& c) {
  require_known_keys(j,
      {"embedding_dim", "cnn_channels", "cnn_kernel", "cnn_stride",
       "mlp_hidden", "node_embedding_dim", "message_rounds", "num_rbf",
       "graph_cutoff", "max_neighbors"},
      "EncoderConfig");

  get_if_present(j, "embedding_dim", c.embedding_dim);
  get_if_present(j, "cnn_channels", c.cnn_channels);
  get_if_present(j, "cnn_kernel", c.cnn_kernel);
  get_if_present(j, "cnn_stride", c.cnn_stride);
  get_if_present(j, "mlp_hidden", c.mlp_hidden);
  get_if_present(j, "node_embedding_dim", c.node_embedding_dim);
  get_if_present(j, "message_rounds", c.message_rounds);
  get_if_present(j, "num_rbf", c.num_rbf);
  get_if_present(j, "graph_cutoff", c.graph_cutoff);
  get_if_present(j, "max_neighbors", c.max_neighbors);
  c.validate();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"epochs", c.epochs},
           {"temperature", c.temperature},
           {"lambda_contrastive", c.lambda_contrastive},
           {"seed", c.seed},
           {"freeze_encoder", c.freeze_encoder},
           {"trainable_temperature", c.trainable_temperature},
           {"contrastive_variant",
            c.variant == nn::ContrastiveVariant::kStandard ? "standard"
                                                           : "exclude_diagonal"}};
}

void from_json(const json& j, TrainConfig& c) {
  require_known_keys(j,
      {"batch_size", "learning_rate", "epochs", "temperature",
       "lambda_contrastive", "seed", "freeze_encoder",
       "trainable_temperature", "contrastive_variant"},
      "TrainConfig");

  get_if_present(j, "batch_size", c.batch_size);
  get_if_present(j, "learning_rate", c.learning_rate);
  get_if_present(j, "epochs", c.epochs);
  get_if_present(j, "temperature", c.temperature);
  get_if_present(j, "lambda_contrastive", c.lambda_contrastive);
  get_if_present(j, "seed", c.seed);
  get_if_present(j, "freeze_encoder", c.freeze_encoder);
  get_if_present(j, "trainable_temperature", c.trainable_temperature);
  if (j.contains("contrastive_variant")) {
    const auto v = j.at("contrastive_variant").get<std::string>();
    if (v == "standard")
      c.variant = nn::ContrastiveVariant::kStandard;
    else if (v == "exclude_diagonal")
      c.variant = nn::ContrastiveVariant::kExcludeDiagonal;
    else
      throw std::invalid_argument("unknown contrastive_variant: " + v);
  }
  c.validate();
}

void to_json(json& j, const SplitSpec& c) {
  j = json{{"ratios", {c.ratios[0], c.ratios[1], c.ratios[2]}},
           {"seed", c.seed}};
}

void from_json(const json& j, SplitSpec& c) {
  require_known_keys(j, {"ratios", "seed"}, "SplitSpec");

  if (j.contains("ratios")) {
    const auto& r = j.at("ratios");
    if (r.size() != 3)
      throw std::invalid_argument("SplitSpec ratios must have 3 entries");
    for (int i = 0; i < 3; ++i) c.ratios[i] = r[i].get<double>();
  }
  get_if_present(j, "seed", c.seed);
  c.validate();
}

void to_json(json& j, const Standardization& s) {
  j = json{{"feature_mean", s.feature_mean}, {"feature_std", s.feature_std},
           {"lattice_mean", s.lattice_mean}, {"lattice_std", s.lattice_std},
           {"energy_mean", s.energy_mean},   {"energy_std", s.energy_std}};
}

void from_json(const json& j, Standardization& s) {
  get_if_present(j, "feature_mean", s.feature_mean);
  get_if_present(j, "feature_std", s.feature_std);
  get_if_present(j, "lattice_mean", s.lattice_mean);
  get_if_present(j, "lattice_std", s.lattice_std);
  get_if_present(j, "energy_mean", s.energy_mean);
  get_if_present(j, "energy_std", s.energy_std);
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& j) {
  const std::string s = j.dump();
  std::ostringstream os;
  os << std::hex << fnv1a64(s.data(), s.size());
  return os.str();
}

}  // namespace matmodal
