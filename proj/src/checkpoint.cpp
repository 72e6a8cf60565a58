#include "attnkit/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace attnkit {

using nlohmann::ordered_json;

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  ordered_json doc;
  doc["format_version"] = ckpt.format_version;
  doc["model"] = ckpt.model;
  ordered_json tensors = ordered_json::object();
  for (const auto& [name, t] : ckpt.tensors) {
    ordered_json entry;
    ordered_json axis_names = ordered_json::array();
    ordered_json axis_sizes = ordered_json::array();
    for (const Axis& ax : t.axes()) {
      axis_names.push_back(ax.name);
      axis_sizes.push_back(ax.size);
    }
    entry["axis_names"] = axis_names;
    entry["axis_sizes"] = axis_sizes;
    ordered_json values = ordered_json::array();
    char buf[40];
    for (double v : t.data()) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      values.push_back(std::string(buf));
    }
    entry["values"] = values;
    tensors[name] = entry;
  }
  doc["tensors"] = tensors;
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  ordered_json doc = ordered_json::parse(text);
  Checkpoint ckpt;
  ckpt.format_version = doc.at("format_version").get<int>();
  if (ckpt.format_version != 1) throw std::runtime_error("unsupported checkpoint format version");
  ckpt.model = doc.at("model");
  for (const auto& [name, entry] : doc.at("tensors").items()) {
    std::vector<Axis> axes;
    const auto& names = entry.at("axis_names");
    const auto& sizes = entry.at("axis_sizes");
    if (names.size() != sizes.size()) throw std::runtime_error("checkpoint axis list mismatch");
    for (size_t i = 0; i < names.size(); ++i)
      axes.push_back(Axis{names[i].get<std::string>(), sizes[i].get<int64_t>()});
    std::vector<double> data;
    for (const auto& v : entry.at("values")) data.push_back(std::stod(v.get<std::string>()));
    ckpt.tensors.emplace_back(name, Tensor(std::move(axes), std::move(data)));
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << serialize_checkpoint(ckpt);
  if (!out) throw std::runtime_error("checkpoint write failure: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace attnkit
