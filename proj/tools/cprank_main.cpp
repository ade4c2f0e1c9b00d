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
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cprank/cost.hpp"
#include "cprank/manifest.hpp"
#include "cprank/pipeline.hpp"
#include "cprank/vbmf.hpp"

namespace {

using namespace cprank;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (!path.parent_path().empty()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw io_error("write failed: " + path.string());
}

std::string mode_name(int mode) {
  return mode == 0 ? "2way" : std::to_string(mode);
}

void print_rank_report(const LayerRankReport& r) {
  std::printf("layer %-16s chosen rank %d%s\n", r.layer_id.c_str(), r.chosen_rank,
              r.clamped ? " (clamped)" : "");
  for (const GroupModeEstimate& e : r.estimates) {
    std::printf("  group %d mode %-4s rank %-5d sigma2 %-12.6g threshold %.6g\n",
                e.group, mode_name(e.mode).c_str(), e.estimate.rank,
                e.estimate.sigma2, e.estimate.threshold);
  }
}

int cmd_estimate_rank(const std::string& model, const std::string& layer,
                      const std::string& json_path) {
  const ModelManifest m = load_manifest(model);
  std::vector<LayerRankReport> reports;
  for (const LayerRecord& l : m.layers) {
    if (l.kind != LayerKind::conv || l.decomposed || !l.weights) continue;
    if (!layer.empty() && l.id != layer) continue;
    ConvLayerSpec spec = l.conv;
    spec.id = l.id;
    reports.push_back(layer_rank(*l.weights, spec, l.two_way));
  }
  if (reports.empty()) {
    throw validation_error(layer.empty()
                               ? "no undecomposed conv layers with weights"
                               : "layer '" + layer + "' is not estimable");
  }
  for (const LayerRankReport& r : reports) print_rank_report(r);
  if (!json_path.empty()) {
    write_text(json_path, rank_reports_to_json(reports));
  }
  return kExitOk;
}

int cmd_decompose(const std::string& model, const std::string& layer, int rank,
                  const std::string& decomposer, const CpOptions& cp,
                  const std::string& out) {
  const ModelManifest m = load_manifest(model);
  CompressOptions opts;
  opts.cp = cp;
  if (decomposer == "als") {
    opts.decomposer = CompressOptions::Decomposer::als;
  } else if (decomposer == "tpm") {
    opts.decomposer = CompressOptions::Decomposer::tpm;
  } else {
    throw validation_error("decomposer must be 'als' or 'tpm'");
  }
  LayerRankReport report;
  std::optional<int> rank_override;
  if (rank > 0) rank_override = rank;
  const ModelManifest compressed =
      compress_layer(m, layer, rank_override, opts, &report);
  if (!rank_override) print_rank_report(report);
  save_manifest(compressed, out);
  const ModelStats before = model_stats(m);
  const ModelStats after = model_stats(compressed);
  std::printf("decomposed %s at rank %d: params %llu -> %llu, multadds %llu -> %llu\n",
              layer.c_str(), rank_override ? *rank_override : report.chosen_rank,
              static_cast<unsigned long long>(before.total.params),
              static_cast<unsigned long long>(after.total.params),
              static_cast<unsigned long long>(before.total.multadds),
              static_cast<unsigned long long>(after.total.multadds));
  return kExitOk;
}

int cmd_stats(const std::string& model, const std::string& baseline,
              const std::string& json_path) {
  const ModelManifest m = load_manifest(model);
  std::optional<ModelManifest> base;
  if (!baseline.empty()) base = load_manifest(baseline);
  const ModelStats stats = model_stats(m, base ? &*base : nullptr);
  std::printf("%-24s %16s %16s\n", "layer", "params", "multadds");
  for (const LayerCostEntry& e : stats.layers) {
    std::printf("%-24s %16llu %16llu\n", e.id.c_str(),
                static_cast<unsigned long long>(e.cost.params),
                static_cast<unsigned long long>(e.cost.multadds));
  }
  std::printf("%-24s %16llu %16llu\n", "total",
              static_cast<unsigned long long>(stats.total.params),
              static_cast<unsigned long long>(stats.total.multadds));
  if (stats.params_ratio) {
    std::printf("vs baseline: params x%.2f, multadds x%.2f\n", *stats.params_ratio,
                *stats.multadds_ratio);
  }
  if (!json_path.empty()) write_text(json_path, stats_to_json(stats));
  return kExitOk;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

int cmd_pipeline(const std::string& model, const std::string& order_csv,
                 const std::vector<std::string>& skips, const std::string& hook,
                 const CpOptions& cp, const std::string& decomposer,
                 const std::string& out, const std::string& report_path,
                 const std::string& work_dir, bool stamp) {
  const ModelManifest m = load_manifest(model);
  std::vector<std::string> order;
  if (!order_csv.empty()) {
    std::string token;
    std::stringstream ss(order_csv);
    while (std::getline(ss, token, ',')) {
      if (!token.empty()) order.push_back(token);
    }
    for (const std::string& skip : skips) {
      std::erase(order, skip);
    }
  } else {
    order = default_order(m, skips);
  }
  if (order.empty()) throw validation_error("pipeline: nothing to compress");

  PipelineOptions opts;
  opts.compress.cp = cp;
  opts.compress.decomposer = decomposer == "tpm" ? CompressOptions::Decomposer::tpm
                                                 : CompressOptions::Decomposer::als;
  if (stamp) opts.compress.timestamp = utc_timestamp();
  if (!hook.empty()) {
    opts.finetune_cmd = hook;
    opts.work_dir = work_dir.empty()
                        ? std::filesystem::path(out).parent_path() / "pipeline-work"
                        : std::filesystem::path(work_dir);
  }

  const PipelineResult result = run_pipeline(m, order, opts);
  save_manifest(result.manifest, out);
  save_report(result.report, report_path);
  for (const IterationEntry& e : result.report.iterations) {
    const char* hook_note = e.hook_status == IterationEntry::HookStatus::skipped
                                ? ""
                                : (e.hook_status == IterationEntry::HookStatus::ok
                                       ? " hook ok"
                                       : " hook FAILED");
    std::printf("%s: rank %d, multadds %llu -> %llu%s\n", e.layer_id.c_str(),
                e.chosen_rank,
                static_cast<unsigned long long>(e.pre_stats.total.multadds),
                static_cast<unsigned long long>(e.post_stats.total.multadds),
                hook_note);
    if (!e.error.empty()) std::printf("  %s\n", e.error.c_str());
  }
  if (!result.ok) {
    std::fprintf(stderr, "pipeline halted; partial manifest and report written\n");
    return kExitValidation;
  }
  std::printf("pipeline complete: params %llu, multadds %llu\n",
              static_cast<unsigned long long>(result.report.final_stats.total.params),
              static_cast<unsigned long long>(result.report.final_stats.total.multadds));
  return kExitOk;
}

struct VerifyPair {
  const LayerRecord* original;
  std::vector<const LayerRecord*> replacement;  // one record or a stack
};

int cmd_verify(const std::string& model_a, const std::string& model_b, int inputs,
               std::uint64_t seed, double tol) {
  const ModelManifest a = load_manifest(model_a);
  const ModelManifest b = load_manifest(model_b);
  std::vector<VerifyPair> pairs;
  for (const LayerRecord& l : a.layers) {
    if (l.kind != LayerKind::conv || l.decomposed || !l.weights) continue;
    VerifyPair pair{&l, {}};
    if (const LayerRecord* same = b.find(l.id);
        same != nullptr && !same->decomposed && same->kind == LayerKind::conv) {
      if (!same->weights) throw validation_error("verify: '" + l.id + "' has no weights in --against");
      pair.replacement.push_back(same);
    } else {
      for (const LayerRecord& r : b.layers) {
        if (r.provenance && r.provenance->source == l.id) {
          pair.replacement.push_back(&r);
        }
      }
      std::sort(pair.replacement.begin(), pair.replacement.end(),
                [](const LayerRecord* x, const LayerRecord* y) {
                  return x->provenance->stage < y->provenance->stage;
                });
      if (pair.replacement.empty()) {
        throw validation_error("verify: no counterpart for layer '" + l.id + "'");
      }
    }
    pairs.push_back(std::move(pair));
  }
  if (pairs.empty()) throw validation_error("verify: nothing to compare");

  bool all_ok = true;
  std::uint64_t layer_index = 0;
  for (const VerifyPair& pair : pairs) {
    ConvLayerSpec spec = pair.original->conv;
    spec.id = pair.original->id;
    std::mt19937_64 rng(seed * 1000003ull + layer_index++);
    std::normal_distribution<double> dist(0.0, 1.0);
    double worst = 0.0;
    for (int n = 0; n < inputs; ++n) {
      Activation in(spec.in_channels, spec.in_h, spec.in_w);
      for (double& v : in.data) v = dist(rng);
      const Activation want = conv_forward(in, spec, *pair.original->weights);
      Activation got = in;
      for (const LayerRecord* stage : pair.replacement) {
        ConvLayerSpec stage_spec = stage->conv;
        stage_spec.id = stage->id;
        got = conv_forward(got, stage_spec, *stage->weights);
      }
      if (got.data.size() != want.data.size()) {
        throw validation_error("verify: output shape mismatch for '" + spec.id + "'");
      }
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < want.data.size(); ++i) {
        const double d = got.data[i] - want.data[i];
        num += d * d;
        den += want.data[i] * want.data[i];
      }
      const double err = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
      worst = std::max(worst, err);
    }
    const bool ok = worst <= tol;
    all_ok = all_ok && ok;
    std::printf("%-24s max rel err %.3e (tol %.1e) %s\n", spec.id.c_str(), worst,
                tol, ok ? "PASS" : "FAIL");
  }
  return all_ok ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CP-decomposition rank selection and conv-layer compression"};
  app.require_subcommand(1);

  std::string model, layer, json_path, baseline, out, report_path;
  std::string against, order_csv, hook, work_dir;
  std::string decomposer = "als";
  std::vector<std::string> skips;
  CpOptions cp;
  int rank = 0;
  int inputs = 3;
  std::uint64_t seed = 0;
  double tol = 1e-4;
  bool stamp = false;

  CLI::App* est = app.add_subcommand("estimate-rank", "VBMF rank estimates per layer");
  est->add_option("--model", model, "model manifest path")->required();
  est->add_option("--layer", layer, "estimate a single layer");
  est->add_option("--json", json_path, "write the report as JSON");

  CLI::App* dec = app.add_subcommand("decompose", "decompose one layer");
  dec->add_option("--model", model)->required();
  dec->add_option("--layer", layer)->required();
  dec->add_option("--rank", rank, "rank override (default: VBMF estimate)");
  dec->add_option("--decomposer", decomposer, "als|tpm");
  dec->add_option("--sweeps", cp.max_sweeps);
  dec->add_option("--tol", cp.tol);
  dec->add_option("--seed", cp.seed);
  dec->add_option("--restarts", cp.restarts);
  dec->add_option("--out", out)->required();

  CLI::App* st = app.add_subcommand("stats", "parameter and mult-add accounting");
  st->add_option("--model", model)->required();
  st->add_option("--baseline", baseline, "baseline manifest for ratios");
  st->add_option("--json", json_path);

  CLI::App* pipe = app.add_subcommand("pipeline", "iterative compress + fine-tune");
  pipe->add_option("--model", model)->required();
  pipe->add_option("--order", order_csv, "comma-separated layer ids");
  pipe->add_option("--skip-layer", skips, "exclude a layer")->take_all();
  pipe->add_option("--finetune-cmd", hook, "hook template with {in} and {out}");
  pipe->add_option("--decomposer", decomposer, "als|tpm");
  pipe->add_option("--sweeps", cp.max_sweeps);
  pipe->add_option("--tol", cp.tol);
  pipe->add_option("--seed", cp.seed);
  pipe->add_option("--restarts", cp.restarts);
  pipe->add_option("--work-dir", work_dir, "hook staging directory");
  pipe->add_flag("--stamp", stamp, "record wall-clock timestamps in provenance");
  pipe->add_option("--out", out)->required();
  pipe->add_option("--report", report_path)->required();

  CLI::App* ver = app.add_subcommand("verify", "compare two models layer by layer");
  ver->add_option("--model", model)->required();
  ver->add_option("--against", against)->required();
  ver->add_option("--inputs", inputs);
  ver->add_option("--seed", seed);
  ver->add_option("--tol", tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (est->parsed()) return cmd_estimate_rank(model, layer, json_path);
    if (dec->parsed()) return cmd_decompose(model, layer, rank, decomposer, cp, out);
    if (st->parsed()) return cmd_stats(model, baseline, json_path);
    if (pipe->parsed()) {
      return cmd_pipeline(model, order_csv, skips, hook, cp, decomposer, out,
                          report_path, work_dir, stamp);
    }
    if (ver->parsed()) return cmd_verify(model, against, inputs, seed, tol);
    return kExitValidation;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
}
