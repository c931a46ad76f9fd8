/*
 * Copyright 2026 The Cotransport Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <optional>
#include <vector>

#include "cotransport/warning.hpp"

namespace oracle {

using cotransport::warning::Region;

struct Item {
  double distance;
  Region region;
};

struct Pick {
  std::optional<Region> region;
  std::optional<std::size_t> warned;
};

// Literal transcription of the selection pseudocode, written without the
// library's helpers. First minimum wins on ties.
inline Pick select(const std::vector<Item>& obstacles, std::optional<Region> previous,
                   double d_max, double switch_ratio) {
  std::vector<std::size_t> under;
  for (std::size_t i = 0; i < obstacles.size(); ++i)
    if (obstacles[i].distance <= d_max) under.push_back(i);
  if (under.empty()) return {};

  auto closest = [&](const std::vector<std::size_t>& ids) {
    std::size_t best = ids[0];
    for (std::size_t id : ids)
      if (obstacles[id].distance < obstacles[best].distance) best = id;
    return best;
  };

  const std::size_t o_hat = closest(under);
  std::vector<std::size_t> in_prev;
  for (std::size_t id : under)
    if (previous && obstacles[id].region == *previous) in_prev.push_back(id);

  std::size_t warned;
  if (in_prev.empty()) {
    warned = o_hat;
  } else {
    const std::size_t o_prev = closest(in_prev);
    if (obstacles[o_hat].region == *previous) {
      warned = o_hat;
    } else if (obstacles[o_hat].distance < obstacles[o_prev].distance * switch_ratio) {
      warned = o_hat;
    } else {
      warned = o_prev;
    }
  }
  return {obstacles[warned].region, warned};
}

}  // namespace oracle
