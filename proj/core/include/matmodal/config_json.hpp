#pragma once

#include <json.hpp>

#include "matmodal/dataset.hpp"
#include "matmodal/models.hpp"
#include "matmodal/xrd.hpp"

namespace matmodal {

void to_json(nlohmann::json& j, const XrdSimConfig& c);
void from_json(const nlohmann::json& j, XrdSimConfig& c);

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const SplitSpec& c);
void from_json(const nlohmann::json& j, SplitSpec& c);

void to_json(nlohmann::json& j, const Standardization& s);
void from_json(const nlohmann::json& j, Standardization& s);

// FNV-1a 64-bit, used for payload checksums and config hashes.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string config_hash(const nlohmann::json& j);

}  // namespace matmodal
