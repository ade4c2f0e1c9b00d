/* Copyright 2026 The cprank Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "cprank/manifest.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

namespace cprank {

static_assert(std::endian::native == std::endian::little,
              "blob format assumes a little-endian host");

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'C', 'P', 'T', '1'};
constexpr std::uint8_t kDtypeF32 = 0x01;

std::size_t checked_count(const std::vector<int>& dims) {
  if (dims.empty() || dims.size() > 4) {
    throw validation_error("blob: ndim must be in [1, 4]");
  }
  std::size_t n = 1;
  for (int d : dims) {
    if (d <= 0) throw validation_error("blob: dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::vector<std::uint8_t> encode_blob(const Blob& b) {
  const std::size_t count = checked_count(b.dims);
  if (b.data.size() != count) {
    throw validation_error("blob: data length does not match dims");
  }
  std::vector<std::uint8_t> buf;
  buf.reserve(8 + 4 * b.dims.size() + 4 * count);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  buf.push_back(kDtypeF32);
  buf.push_back(static_cast<std::uint8_t>(b.dims.size()));
  buf.push_back(0);
  buf.push_back(0);
  for (int d : b.dims) {
    const auto u = static_cast<std::uint32_t>(d);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&u);
    buf.insert(buf.end(), p, p + 4);
  }
  for (double v : b.data) {
    if (!std::isfinite(v)) throw numeric_error("blob: non-finite value");
    const auto f = static_cast<float>(v);  // rounds to nearest-even
    const auto* p = reinterpret_cast<const std::uint8_t*>(&f);
    buf.insert(buf.end(), p, p + 4);
  }
  return buf;
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("write failed: " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw io_error("cannot open for reading: " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0) {
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw io_error("read failed: " + path.string());
  }
  return bytes;
}

}  // namespace

void save_blob(const Blob& b, const std::filesystem::path& path) {
  write_file(path, encode_blob(b));
}

void save_blob(const Tensor3& t, const std::filesystem::path& path) {
  save_blob(blob_from_tensor(t), path);
}

void save_blob(const Kernel4& k, const std::filesystem::path& path) {
  save_blob(blob_from_kernel(k), path);
}

Blob load_blob(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() < 8) throw format_error("blob: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw format_error("blob: bad magic");
  }
  if (bytes[4] != kDtypeF32) throw format_error("blob: unsupported dtype");
  const int ndim = bytes[5];
  if (ndim < 1 || ndim > 4) throw format_error("blob: ndim out of range");
  if (bytes[6] != 0 || bytes[7] != 0) throw format_error("blob: reserved bytes nonzero");
  if (bytes.size() < 8 + 4 * static_cast<std::size_t>(ndim)) {
    throw format_error("blob: truncated dims");
  }
  Blob b;
  std::size_t count = 1;
  for (int i = 0; i < ndim; ++i) {
    std::uint32_t d;
    std::memcpy(&d, bytes.data() + 8 + 4 * i, 4);
    if (d == 0) throw format_error("blob: zero dimension");
    if (d > (1u << 30)) throw format_error("blob: dimension too large");
    b.dims.push_back(static_cast<int>(d));
    count *= d;
  }
  const std::size_t expected = 8 + 4 * static_cast<std::size_t>(ndim) + 4 * count;
  if (bytes.size() < expected) throw format_error("blob: truncated data");
  if (bytes.size() > expected) throw format_error("blob: trailing bytes");
  b.data.resize(count);
  const std::uint8_t* p = bytes.data() + 8 + 4 * static_cast<std::size_t>(ndim);
  for (std::size_t i = 0; i < count; ++i) {
    float f;
    std::memcpy(&f, p + 4 * i, 4);
    if (!std::isfinite(f)) throw format_error("blob: non-finite value");
    b.data[i] = static_cast<double>(f);
  }
  return b;
}

Blob blob_from_kernel(const Kernel4& k) {
  k.validate();
  return Blob{{k.kh, k.kw, k.in_c, k.out_c}, k.data};
}

Kernel4 kernel_from_blob(const Blob& b) {
  if (b.dims.size() != 4) throw validation_error("blob: expected 4 dims for a kernel");
  Kernel4 k(b.dims[0], b.dims[1], b.dims[2], b.dims[3]);
  k.data = b.data;
  k.validate();
  return k;
}

Blob blob_from_tensor(const Tensor3& t) {
  t.validate();
  return Blob{{t.spatial, t.inputs, t.outputs}, t.data};
}

Tensor3 tensor_from_blob(const Blob& b) {
  if (b.dims.size() != 3) throw validation_error("blob: expected 3 dims for a tensor");
  Tensor3 t(b.dims[0], b.dims[1], b.dims[2]);
  t.data = b.data;
  t.validate();
  return t;
}

const LayerRecord* ModelManifest::find(const std::string& id) const {
  for (const LayerRecord& l : layers) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

LayerRecord* ModelManifest::find(const std::string& id) {
  for (LayerRecord& l : layers) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

void ModelManifest::validate() const {
  if (format_version != 1) throw validation_error("manifest: unsupported format_version");
  std::unordered_set<std::string> ids;
  for (const LayerRecord& l : layers) {
    if (l.id.empty()) throw validation_error("manifest: empty layer id");
    if (!ids.insert(l.id).second) {
      throw validation_error("manifest: duplicate layer id '" + l.id + "'");
    }
    if (l.kind == LayerKind::conv) {
      ConvLayerSpec spec = l.conv;
      spec.id = l.id;
      spec.validate();
      if (l.weights) {
        const Kernel4& k = *l.weights;
        if (k.kh != spec.kernel || k.kw != spec.kernel ||
            k.in_c != spec.in_per_group() || k.out_c != spec.out_channels) {
          throw validation_error("manifest: layer '" + l.id +
                                 "' blob dims do not match declared geometry");
        }
      }
    } else {
      if (l.fc.in < 1 || l.fc.out < 1) {
        throw validation_error("manifest: layer '" + l.id + "' invalid fc dims");
      }
      if (l.decomposed || l.two_way || l.provenance) {
        throw validation_error("manifest: fc layer '" + l.id +
                               "' cannot be decomposed or two_way");
      }
      if (l.fc_weights) {
        const Blob& b = *l.fc_weights;
        if (b.dims.size() != 2 || b.dims[0] != l.fc.out || b.dims[1] != l.fc.in) {
          throw validation_error("manifest: layer '" + l.id +
                                 "' blob dims do not match declared geometry");
        }
      }
    }
  }
}

namespace {

std::string blob_name_for(const LayerRecord& l) {
  if (!l.has_weights()) return {};
  if (!l.blob.empty()) return l.blob;
  return l.id + ".cpt";
}

json conv_geometry_json(const ConvLayerSpec& s) {
  return json{{"kernel", s.kernel},   {"in_channels", s.in_channels},
              {"out_channels", s.out_channels}, {"groups", s.groups},
              {"stride", s.stride},   {"pad", s.pad},
              {"in_h", s.in_h},       {"in_w", s.in_w},
              {"out_h", s.out_h},     {"out_w", s.out_w}};
}

json layer_json(const LayerRecord& l) {
  json j;
  j["id"] = l.id;
  j["kind"] = l.kind == LayerKind::conv ? "conv" : "fc";
  if (l.kind == LayerKind::conv) {
    j["geometry"] = conv_geometry_json(l.conv);
  } else {
    j["geometry"] = json{{"in", l.fc.in}, {"out", l.fc.out}};
  }
  const std::string blob = blob_name_for(l);
  if (blob.empty()) {
    j["blob"] = nullptr;
  } else {
    j["blob"] = blob;
  }
  j["decomposed"] = l.decomposed;
  j["two_way"] = l.two_way;
  if (l.provenance) {
    json p;
    p["source"] = l.provenance->source;
    p["rank"] = l.provenance->rank;
    p["decomposer"] = l.provenance->decomposer;
    p["stage"] = l.provenance->stage;
    if (!l.provenance->timestamp.empty()) p["timestamp"] = l.provenance->timestamp;
    j["provenance"] = std::move(p);
  } else {
    j["provenance"] = nullptr;
  }
  return j;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.contains(key)) {
      throw format_error("manifest: " + where + ": unknown field '" + key + "'");
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw format_error("manifest: " + where + ": missing field '" + key + "'");
  }
  return *it;
}

int require_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) {
    throw format_error("manifest: " + where + "." + key + ": expected integer");
  }
  return v.get<int>();
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) {
    throw format_error("manifest: " + where + "." + key + ": expected string");
  }
  return v.get<std::string>();
}

bool require_bool(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_boolean()) {
    throw format_error("manifest: " + where + "." + key + ": expected boolean");
  }
  return v.get<bool>();
}

LayerRecord layer_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw format_error("manifest: " + where + ": expected object");
  reject_unknown(j, {"id", "kind", "geometry", "blob", "decomposed", "two_way",
                     "provenance"},
                 where);
  LayerRecord l;
  l.id = require_string(j, "id", where);
  const std::string kind = require_string(j, "kind", where);
  if (kind == "conv") {
    l.kind = LayerKind::conv;
  } else if (kind == "fc") {
    l.kind = LayerKind::fc;
  } else {
    throw format_error("manifest: " + where + ".kind: expected 'conv' or 'fc'");
  }
  const json& g = require(j, "geometry", where);
  if (!g.is_object()) throw format_error("manifest: " + where + ".geometry: expected object");
  const std::string gwhere = where + ".geometry";
  if (l.kind == LayerKind::conv) {
    reject_unknown(g, {"kernel", "in_channels", "out_channels", "groups", "stride",
                       "pad", "in_h", "in_w", "out_h", "out_w"},
                   gwhere);
    l.conv.id = l.id;
    l.conv.kernel = require_int(g, "kernel", gwhere);
    l.conv.in_channels = require_int(g, "in_channels", gwhere);
    l.conv.out_channels = require_int(g, "out_channels", gwhere);
    l.conv.groups = require_int(g, "groups", gwhere);
    l.conv.stride = require_int(g, "stride", gwhere);
    l.conv.pad = require_int(g, "pad", gwhere);
    l.conv.in_h = require_int(g, "in_h", gwhere);
    l.conv.in_w = require_int(g, "in_w", gwhere);
    l.conv.out_h = require_int(g, "out_h", gwhere);
    l.conv.out_w = require_int(g, "out_w", gwhere);
  } else {
    reject_unknown(g, {"in", "out"}, gwhere);
    l.fc.in = require_int(g, "in", gwhere);
    l.fc.out = require_int(g, "out", gwhere);
  }
  const json& blob = require(j, "blob", where);
  if (blob.is_null()) {
    l.blob.clear();
  } else if (blob.is_string()) {
    l.blob = blob.get<std::string>();
    if (l.blob.empty()) throw format_error("manifest: " + where + ".blob: empty path");
  } else {
    throw format_error("manifest: " + where + ".blob: expected string or null");
  }
  l.decomposed = require_bool(j, "decomposed", where);
  l.two_way = require_bool(j, "two_way", where);
  const json& prov = require(j, "provenance", where);
  if (!prov.is_null()) {
    if (!prov.is_object()) {
      throw format_error("manifest: " + where + ".provenance: expected object or null");
    }
    const std::string pwhere = where + ".provenance";
    reject_unknown(prov, {"source", "rank", "decomposer", "stage", "timestamp"}, pwhere);
    Provenance p;
    p.source = require_string(prov, "source", pwhere);
    p.rank = require_int(prov, "rank", pwhere);
    p.decomposer = require_string(prov, "decomposer", pwhere);
    if (p.decomposer != "als" && p.decomposer != "tpm" && p.decomposer != "svd") {
      throw format_error("manifest: " + pwhere + ".decomposer: expected als|tpm|svd");
    }
    p.stage = require_int(prov, "stage", pwhere);
    if (prov.contains("timestamp")) {
      const json& ts = prov["timestamp"];
      if (!ts.is_string()) {
        throw format_error("manifest: " + pwhere + ".timestamp: expected string");
      }
      p.timestamp = ts.get<std::string>();
    }
    l.provenance = std::move(p);
  }
  return l;
}

}  // namespace

std::string manifest_to_json(const ModelManifest& m) {
  m.validate();
  json root;
  root["format_version"] = m.format_version;
  root["name"] = m.name;
  json layers = json::array();
  for (const LayerRecord& l : m.layers) layers.push_back(layer_json(l));
  root["layers"] = std::move(layers);
  return root.dump(2) + "\n";
}

ModelManifest manifest_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw format_error(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw format_error("manifest: expected a JSON object");
  reject_unknown(root, {"format_version", "name", "layers"}, "root");
  ModelManifest m;
  m.format_version = require_int(root, "format_version", "root");
  if (m.format_version != 1) {
    throw format_error("manifest: root.format_version: expected 1");
  }
  m.name = require_string(root, "name", "root");
  const json& layers = require(root, "layers", "root");
  if (!layers.is_array()) throw format_error("manifest: root.layers: expected array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    m.layers.push_back(layer_from_json(layers[i], "layers[" + std::to_string(i) + "]"));
  }
  m.validate();
  return m;
}

ModelManifest load_manifest(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  ModelManifest m = manifest_from_json(std::string(bytes.begin(), bytes.end()));
  const std::filesystem::path dir = path.parent_path();
  for (LayerRecord& l : m.layers) {
    if (l.blob.empty()) continue;
    const std::filesystem::path blob_path = dir / l.blob;
    if (!std::filesystem::exists(blob_path)) {
      throw validation_error("manifest: layer '" + l.id +
                             "': dangling blob reference '" + l.blob + "'");
    }
    const Blob b = load_blob(blob_path);
    if (l.kind == LayerKind::conv) {
      l.weights = std::make_shared<const Kernel4>(kernel_from_blob(b));
    } else {
      l.fc_weights = std::make_shared<const Blob>(b);
    }
  }
  m.validate();
  return m;
}

void save_manifest(const ModelManifest& m, const std::filesystem::path& path) {
  const std::string text = manifest_to_json(m);
  const std::filesystem::path dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  for (const LayerRecord& l : m.layers) {
    if (!l.has_weights()) continue;
    const std::filesystem::path target = dir / blob_name_for(l);
    if (target.has_parent_path()) {
      std::filesystem::create_directories(target.parent_path());
    }
    const Blob payload = l.weights ? blob_from_kernel(*l.weights) : *l.fc_weights;
    const std::vector<std::uint8_t> bytes = encode_blob(payload);
    // Skipping identical rewrites keeps untouched layers byte-stable and
    // makes saving a loaded model into its own directory safe.
    if (std::filesystem::exists(target)) {
      std::error_code ec;
      const auto size = std::filesystem::file_size(target, ec);
      if (!ec && size == bytes.size() && read_file(target) == bytes) continue;
    }
    write_file(target, bytes);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw io_error("write failed: " + path.string());
}

}  // namespace cprank
