#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "attnkit/tensor.hpp"

namespace attnkit {

// On-disk model state: a JSON document with a version header, an opaque
// config echo, and named tensors whose values are decimal strings with 17
// significant digits, so save -> load -> save is byte-identical.
struct Checkpoint {
  int format_version = 1;
  nlohmann::ordered_json model;  // config echo, opaque to this module
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace attnkit
