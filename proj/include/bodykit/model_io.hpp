#pragma once

#include <string>
#include <string_view>

#include "bodykit/body_model.hpp"

namespace bodykit {

inline constexpr int kModelFormatVersion = 1;

/// Model container: a magic line, a JSON header (name, dimensions, DOF specs,
/// Euler convention, units, array table), then the arrays as raw
/// little-endian binary64 / uint32 in table order.
std::string serialize_model(const BodyModel& model);
BodyModel deserialize_model(std::string_view bytes);

BodyModel load_model(const std::string& path);
void save_model(const BodyModel& model, const std::string& path);

/// SHA-256 of the serialized container.
std::string model_checksum(const BodyModel& model);
/// SHA-256 of the template skin vertices as little-endian binary64.
std::string template_checksum(const BodyModel& model);

}  // namespace bodykit
