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
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cprank/tensor.hpp"

namespace cprank {

/// Generic dense payload matching the tensor blob file format:
///   bytes 0-3   magic "CPT1"
///   byte  4     dtype, 0x01 = 32-bit IEEE-754 little-endian float
///   byte  5     ndim, 1..4
///   bytes 6-7   zero
///   ndim x u32  dims, little-endian, all nonzero
///   data        C-order, last axis fastest
/// In-memory values are 64-bit and round to nearest-even on save.
struct Blob {
  std::vector<int> dims;
  std::vector<double> data;
};

void save_blob(const Blob& b, const std::filesystem::path& path);
void save_blob(const Tensor3& t, const std::filesystem::path& path);
void save_blob(const Kernel4& k, const std::filesystem::path& path);
Blob load_blob(const std::filesystem::path& path);

Blob blob_from_kernel(const Kernel4& k);
Kernel4 kernel_from_blob(const Blob& b);
Blob blob_from_tensor(const Tensor3& t);
Tensor3 tensor_from_blob(const Blob& b);

struct FcSpec {
  int in = 0;
  int out = 0;
};

enum class LayerKind { conv, fc };

struct Provenance {
  std::string source;      // original layer id; shared by the whole stack
  int rank = 0;
  std::string decomposer;  // "als" | "tpm" | "svd"
  int stage = 0;           // 1-based position in the stack
  std::string timestamp;   // optional; empty = omitted from JSON
};

struct LayerRecord {
  std::string id;
  LayerKind kind = LayerKind::conv;
  ConvLayerSpec conv;  // valid when kind == conv
  FcSpec fc;           // valid when kind == fc
  std::string blob;    // relative blob path; empty = geometry-only record
  bool decomposed = false;
  bool two_way = false;  // estimate rank on the 2-way T x S*D*D matrix
  std::optional<Provenance> provenance;

  std::shared_ptr<const Kernel4> weights;  // conv weights, may be null
  std::shared_ptr<const Blob> fc_weights;  // fc weights (out x in), may be null

  bool has_weights() const { return weights != nullptr || fc_weights != nullptr; }
};

/// Ordered layer list with weight payloads. Weights live in memory; blob
/// files are materialized by save_manifest and read back by load_manifest.
struct ModelManifest {
  std::string name;
  int format_version = 1;
  std::vector<LayerRecord> layers;

  const LayerRecord* find(const std::string& id) const;
  LayerRecord* find(const std::string& id);

  /// Unique ids, valid geometry, weight dims matching declared geometry.
  void validate() const;
};

/// Canonical JSON form: sorted keys, two-space indent, trailing newline.
std::string manifest_to_json(const ModelManifest& m);
ModelManifest manifest_from_json(const std::string& text);

/// Loads the JSON, then eagerly loads and validates every referenced blob
/// (relative paths resolve against the manifest's directory). Rejects
/// unknown fields, duplicate ids, and dangling or mismatched blobs.
ModelManifest load_manifest(const std::filesystem::path& path);

/// Writes the canonical JSON and materializes every weight payload as a blob
/// file next to it. Records with weights but no blob path get "<id>.cpt".
void save_manifest(const ModelManifest& m, const std::filesystem::path& path);

}  // namespace cprank
