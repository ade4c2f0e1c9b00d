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

// Writes the AlexNet geometry fixture as a manifest directory, optionally with
// generated weights. Handy for demos and for exercising the CLI end to end.

#include <cstdio>

#include <CLI11.hpp>

#include "cprank/alexnet.hpp"

int main(int argc, char** argv) {
  CLI::App app{"emit the AlexNet geometry fixture"};
  std::string out;
  bool with_weights = false;
  bool compressed = false;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "output manifest path")->required();
  app.add_flag("--weights", with_weights, "attach seeded gaussian conv weights");
  app.add_flag("--compressed", compressed,
               "emit the reference-rank compressed geometry instead");
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);
  try {
    const cprank::ModelManifest m = compressed
                                        ? cprank::alexnet_compressed_manifest(true)
                                        : cprank::alexnet_manifest(with_weights, seed);
    cprank::save_manifest(m, out);
    std::printf("wrote %s (%zu layers)\n", out.c_str(), m.layers.size());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
