#pragma once

#include <ahofm/core.hpp>

#include <string>

namespace ahofm {

constexpr int kModelFormatVersion = 1;

/// JSON text of the model. Serializing a deserialized model reproduces the
/// input byte for byte.
std::string serialize_model(const Model& model);
Model deserialize_model(const std::string& text);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

} // namespace ahofm
