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
#include "cprank/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#ifdef __unix__
#include <sys/wait.h>
#endif

namespace cprank {

namespace {

using nlohmann::json;

const char* decomposer_name(CompressOptions::Decomposer d) {
  return d == CompressOptions::Decomposer::als ? "als" : "tpm";
}

LayerRecord stack_record(const StackLayer& stage, const std::string& source,
                         int rank, const std::string& decomposer, int stage_index,
                         const std::string& timestamp) {
  LayerRecord r;
  r.id = stage.spec.id;
  r.kind = LayerKind::conv;
  r.conv = stage.spec;
  r.decomposed = true;
  r.provenance = Provenance{source, rank, decomposer, stage_index, timestamp};
  r.weights = std::make_shared<const Kernel4>(stage.weights);
  return r;
}

int run_hook(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
#ifdef __unix__
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
#endif
  return status;
}

std::string substitute(std::string tmpl, const std::string& key,
                       const std::string& value) {
  for (std::size_t pos = tmpl.find(key); pos != std::string::npos;
       pos = tmpl.find(key, pos + value.size())) {
    tmpl.replace(pos, key.size(), value);
  }
  return tmpl;
}

json stats_json(const ModelStats& s, bool with_layers) {
  json j;
  j["total"] = {{"params", s.total.params}, {"multadds", s.total.multadds}};
  if (s.params_ratio) j["params_ratio"] = *s.params_ratio;
  if (s.multadds_ratio) j["multadds_ratio"] = *s.multadds_ratio;
  if (with_layers) {
    json layers = json::array();
    for (const LayerCostEntry& e : s.layers) {
      layers.push_back(
          {{"id", e.id}, {"params", e.cost.params}, {"multadds", e.cost.multadds}});
    }
    j["layers"] = std::move(layers);
  }
  return j;
}

json rank_report_json(const LayerRankReport& r) {
  json estimates = json::array();
  for (const GroupModeEstimate& e : r.estimates) {
    estimates.push_back({{"group", e.group},
                         {"mode", e.mode},
                         {"rank", e.estimate.rank},
                         {"sigma2", e.estimate.sigma2},
                         {"threshold", e.estimate.threshold}});
  }
  return json{{"layer", r.layer_id},
              {"two_way", r.two_way},
              {"clamped", r.clamped},
              {"chosen_rank", r.chosen_rank},
              {"estimates", std::move(estimates)}};
}

}  // namespace

ModelManifest compress_layer(const ModelManifest& manifest,
                             const std::string& layer_id,
                             std::optional<int> rank_override,
                             const CompressOptions& opts,
                             LayerRankReport* rank_report) {
  manifest.validate();
  const LayerRecord* target = manifest.find(layer_id);
  if (target == nullptr) {
    throw validation_error("compress_layer: unknown layer '" + layer_id + "'");
  }
  if (target->kind != LayerKind::conv) {
    throw validation_error("compress_layer: layer '" + layer_id + "' is not a convolution");
  }
  if (target->decomposed) {
    throw validation_error("compress_layer: layer '" + layer_id + "' is already decomposed");
  }
  if (!target->weights) {
    throw validation_error("compress_layer: layer '" + layer_id + "' has no weights");
  }
  if (rank_override && *rank_override < 1) {
    throw validation_error("compress_layer: rank must be >= 1");
  }

  ConvLayerSpec spec = target->conv;
  spec.id = target->id;
  const Kernel4& weights = *target->weights;

  int rank = 0;
  if (rank_override) {
    rank = *rank_override;
  } else {
    LayerRankReport report = layer_rank(weights, spec, target->two_way);
    rank = report.chosen_rank;
    if (rank_report != nullptr) *rank_report = std::move(report);
  }

  ConvStack stack;
  std::string decomposer;
  if (target->two_way) {
    std::vector<Eigen::MatrixXd> mats;
    for (const Kernel4& gk : split_groups(weights, spec)) {
      mats.push_back(matricize(reshape_kernel_to_3way(gk), 1).m);
    }
    stack = svd_two_layer(mats, rank, spec);
    decomposer = "svd";
  } else {
    std::vector<CPFactors> factors;
    for (const Kernel4& gk : split_groups(weights, spec)) {
      const Tensor3 t3 = reshape_kernel_to_3way(gk);
      factors.push_back(opts.decomposer == CompressOptions::Decomposer::als
                            ? cp_als(t3, rank, opts.cp)
                            : cp_tpm(t3, rank, opts.cp));
    }
    stack = factors_to_conv_stack(factors, spec);
    decomposer = decomposer_name(opts.decomposer);
  }

  ModelManifest out;
  out.name = manifest.name;
  out.format_version = manifest.format_version;
  for (const LayerRecord& l : manifest.layers) {
    if (l.id != layer_id) {
      out.layers.push_back(l);
      continue;
    }
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
      out.layers.push_back(stack_record(stack.layers[i], layer_id, rank, decomposer,
                                        static_cast<int>(i) + 1, opts.timestamp));
    }
  }
  out.validate();
  return out;
}

std::vector<std::string> default_order(const ModelManifest& manifest,
                                       const std::vector<std::string>& skip) {
  std::unordered_set<std::string> skipped(skip.begin(), skip.end());
  std::vector<std::string> order;
  for (const LayerRecord& l : manifest.layers) {
    if (l.kind == LayerKind::conv && !l.decomposed && l.weights &&
        !skipped.contains(l.id)) {
      order.push_back(l.id);
    }
  }
  return order;
}

PipelineResult run_pipeline(const ModelManifest& manifest,
                            const std::vector<std::string>& order,
                            const PipelineOptions& opts) {
  manifest.validate();
  std::unordered_set<std::string> seen;
  for (const std::string& id : order) {
    if (!seen.insert(id).second) {
      throw validation_error("run_pipeline: duplicate layer '" + id + "' in order");
    }
    const LayerRecord* l = manifest.find(id);
    if (l == nullptr || l->kind != LayerKind::conv || l->decomposed || !l->weights) {
      throw validation_error("run_pipeline: layer '" + id +
                             "' is not an undecomposed conv layer with weights");
    }
  }
  if (opts.finetune_cmd) {
    if (opts.finetune_cmd->find("{in}") == std::string::npos ||
        opts.finetune_cmd->find("{out}") == std::string::npos) {
      throw validation_error("run_pipeline: hook template must contain {in} and {out}");
    }
    if (opts.work_dir.empty()) {
      throw validation_error("run_pipeline: hook requires a work_dir");
    }
    std::filesystem::create_directories(opts.work_dir);
  }

  PipelineResult result;
  result.manifest = manifest;
  for (std::size_t i = 0; i < order.size(); ++i) {
    IterationEntry entry;
    entry.layer_id = order[i];
    entry.pre_stats = model_stats(result.manifest);

    LayerRankReport ranks;
    result.manifest = compress_layer(result.manifest, order[i], {}, opts.compress, &ranks);
    entry.chosen_rank = ranks.chosen_rank;
    entry.ranks = std::move(ranks);
    entry.post_stats = model_stats(result.manifest);

    if (opts.finetune_cmd) {
      const std::string tag = "iter_" + std::to_string(i + 1);
      const std::filesystem::path in_path = opts.work_dir / (tag + "_in") / "manifest.json";
      const std::filesystem::path out_path = opts.work_dir / (tag + "_out") / "manifest.json";
      std::filesystem::create_directories(out_path.parent_path());
      save_manifest(result.manifest, in_path);
      const std::string cmd = substitute(
          substitute(*opts.finetune_cmd, "{in}", in_path.string()), "{out}",
          out_path.string());
      const int exit_code = run_hook(cmd);
      entry.hook_exit = exit_code;
      if (exit_code != 0) {
        entry.hook_status = IterationEntry::HookStatus::failed;
        entry.error = "fine-tune hook exited with code " + std::to_string(exit_code);
        result.report.iterations.push_back(std::move(entry));
        result.report.final_stats = model_stats(result.manifest);
        result.ok = false;
        return result;
      }
      try {
        ModelManifest tuned = load_manifest(out_path);
        result.manifest = std::move(tuned);
        entry.hook_status = IterationEntry::HookStatus::ok;
      } catch (const error& e) {
        entry.hook_status = IterationEntry::HookStatus::failed;
        entry.error = std::string("fine-tune hook output rejected: ") + e.what();
        result.report.iterations.push_back(std::move(entry));
        result.report.final_stats = model_stats(result.manifest);
        result.ok = false;
        return result;
      }
    }
    result.report.iterations.push_back(std::move(entry));
  }
  result.report.completed = true;
  result.report.final_stats = model_stats(result.manifest);
  result.ok = true;
  return result;
}

std::string report_to_json(const PipelineReport& report) {
  json j;
  j["completed"] = report.completed;
  j["final"] = stats_json(report.final_stats, true);
  json iterations = json::array();
  for (const IterationEntry& e : report.iterations) {
    json je;
    je["layer"] = e.layer_id;
    je["chosen_rank"] = e.chosen_rank;
    if (e.rank_override) {
      je["rank_override"] = *e.rank_override;
    } else {
      je["rank_override"] = nullptr;
    }
    if (e.ranks) {
      je["ranks"] = rank_report_json(*e.ranks);
    } else {
      je["ranks"] = nullptr;
    }
    je["pre"] = stats_json(e.pre_stats, false);
    je["post"] = stats_json(e.post_stats, false);
    const char* status = e.hook_status == IterationEntry::HookStatus::ok ? "ok"
                         : e.hook_status == IterationEntry::HookStatus::failed
                             ? "failed"
                             : "skipped";
    json hook{{"status", status}, {"exit_code", e.hook_exit}};
    if (!e.error.empty()) hook["error"] = e.error;
    je["hook"] = std::move(hook);
    iterations.push_back(std::move(je));
  }
  j["iterations"] = std::move(iterations);
  return j.dump(2) + "\n";
}

void save_report(const PipelineReport& report, const std::filesystem::path& path) {
  if (!path.parent_path().empty()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path.string());
  out << report_to_json(report);
  if (!out) throw io_error("write failed: " + path.string());
}

std::string stats_to_json(const ModelStats& stats) {
  return stats_json(stats, true).dump(2) + "\n";
}

std::string rank_reports_to_json(std::span<const LayerRankReport> reports) {
  json arr = json::array();
  for (const LayerRankReport& r : reports) arr.push_back(rank_report_json(r));
  return json{{"layers", std::move(arr)}}.dump(2) + "\n";
}

}  // namespace cprank
