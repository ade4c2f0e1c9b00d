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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cprank/manifest.hpp"

namespace cprank {

/// Standard AlexNet geometry (227x227 input): conv1 96@11x11/4, conv2
/// 256@5x5 g2 pad2, conv3 384@3x3 pad1, conv4 384@3x3 g2 pad1, conv5
/// 256@3x3 g2 pad1, fc6 9216->4096, fc7 4096->4096, fc8 4096->1000.
/// conv1 is flagged two_way. With with_weights, the conv layers get seeded
/// low-rank-plus-noise weights so rank estimation on the fixture is
/// meaningful (fc layers stay geometry-only).
ModelManifest alexnet_manifest(bool with_weights = false, std::uint64_t seed = 0);

/// Reference per-layer ranks used by the compressed fixture:
/// conv1 53, conv2 83 (per group), conv3 138, conv4 119, conv5 109.
const std::vector<std::pair<std::string, int>>& alexnet_reference_ranks();

/// Accounting fixture: every conv layer replaced by its decomposed-stack
/// geometry at the reference ranks (conv1 via the two-layer form when
/// compress_conv1 is set, left intact otherwise).
ModelManifest alexnet_compressed_manifest(bool compress_conv1 = true);

}  // namespace cprank
