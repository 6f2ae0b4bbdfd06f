// Binary serialization of trained models. The layout is documented in
// docs/model_format.md.

#pragma once

#include <string>

#include "ecc/clustering.hpp"

namespace ecc {

inline constexpr char kModelMagic[8] = {'E', 'C', 'C', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

void save_model(const EccModel& model, const std::string& path,
                bool include_responsibilities = true);

EccModel load_model(const std::string& path);

}  // namespace ecc
