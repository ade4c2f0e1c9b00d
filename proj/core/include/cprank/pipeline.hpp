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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cprank/cost.hpp"
#include "cprank/cpd.hpp"
#include "cprank/manifest.hpp"
#include "cprank/vbmf.hpp"

namespace cprank {

struct CompressOptions {
  CpOptions cp;
  enum class Decomposer { als, tpm };
  Decomposer decomposer = Decomposer::als;
  std::string timestamp;  // stamped into provenance when non-empty
};

struct IterationEntry {
  std::string layer_id;
  std::optional<LayerRankReport> ranks;  // absent when a rank override was used
  std::optional<int> rank_override;
  int chosen_rank = 0;
  ModelStats pre_stats;
  ModelStats post_stats;
  enum class HookStatus { skipped, ok, failed };
  HookStatus hook_status = HookStatus::skipped;
  int hook_exit = 0;
  std::string error;
};

struct PipelineReport {
  std::vector<IterationEntry> iterations;
  bool completed = false;
  ModelStats final_stats;
};

/// Replaces one undecomposed conv layer by its decomposed stack. The rank is
/// rank_override when given, otherwise estimated by layer_rank on the layer's
/// current weights (the 2-way treatment applies when the record is flagged
/// two_way, and the stack is then the two-layer SVD form). Every other layer
/// is carried over untouched.
ModelManifest compress_layer(const ModelManifest& manifest,
                             const std::string& layer_id,
                             std::optional<int> rank_override = {},
                             const CompressOptions& opts = {},
                             LayerRankReport* rank_report = nullptr);

struct PipelineOptions {
  CompressOptions compress;
  /// Fine-tune hook: a command template with {in} and {out} placeholders for
  /// the current and expected-output manifest paths. Exit 0 plus a valid
  /// output manifest counts as success; absent hook means identity.
  std::optional<std::string> finetune_cmd;
  std::filesystem::path work_dir;  // hook staging area; required with a hook
};

struct PipelineResult {
  ModelManifest manifest;
  PipelineReport report;
  bool ok = true;
};

/// For each layer in order: estimate rank on the current weights, compress,
/// then hand the whole model to the fine-tune hook. A failing hook (nonzero
/// exit or invalid output) halts the loop; the partial manifest and report
/// are returned with ok = false.
PipelineResult run_pipeline(const ModelManifest& manifest,
                            const std::vector<std::string>& order,
                            const PipelineOptions& opts = {});

/// Undecomposed conv layers with weights, in manifest order, minus skips.
std::vector<std::string> default_order(const ModelManifest& manifest,
                                       const std::vector<std::string>& skip = {});

std::string report_to_json(const PipelineReport& report);
void save_report(const PipelineReport& report, const std::filesystem::path& path);

std::string stats_to_json(const ModelStats& stats);
std::string rank_reports_to_json(std::span<const LayerRankReport> reports);

}  // namespace cprank
