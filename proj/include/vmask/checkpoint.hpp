#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vmask/nn.hpp"

namespace vmask {

// Versioned binary model checkpoint. Parameters are stored as raw little
// endian IEEE-754 doubles, so save/load round-trips are bit exact.
std::vector<std::uint8_t> model_to_bytes(const Model& m);
Model model_from_bytes(const std::vector<std::uint8_t>& bytes);

void save_model(const std::string& path, const Model& m);
Model load_model(const std::string& path);

}  // namespace vmask
