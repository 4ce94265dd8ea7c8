#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "salmask/tensor.hpp"

namespace salmask {

// Versioned checkpoint container: named double arrays plus an architecture
// tag, a free-form JSON metadata string, and the training step.
struct Checkpoint {
  std::string arch;
  uint64_t step = 0;
  std::string meta;
  std::vector<std::pair<std::string, std::vector<Real>>> arrays;

  const std::vector<Real>& get(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace salmask
