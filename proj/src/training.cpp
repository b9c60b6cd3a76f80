// Copyright (c) 2026 polyg2p authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "polyg2p/training.hpp"

namespace polyg2p {

// The four knockout rows of the contribution table: the full system, the
// conditional weight layer removed, the POS joint task also removed, and
// finally the hard mask removed (the bare encoder baseline).
std::vector<AblationCell> contribution_grid(const HeadConfig& base) {
  AblationCell full;
  full.name = "full";
  full.alpha_cross = base.alpha_cross;
  full.alpha_char = base.alpha_char;
  full.alpha_pos = base.alpha_pos;
  full.beta = base.beta;

  AblationCell no_soft = full;
  no_soft.name = "no_soft_weights";
  no_soft.use_soft_weights = false;

  AblationCell hard_only = no_soft;
  hard_only.name = "hard_mask_only";
  hard_only.beta = 0.0;

  AblationCell baseline = hard_only;
  baseline.name = "baseline";
  baseline.use_hard_mask = false;

  return {full, no_soft, hard_only, baseline};
}

std::vector<AblationCell> alpha_grid(double beta) {
  std::vector<AblationCell> cells;
  for (int cross = 1; cross >= 0; --cross) {
    for (int chr = 1; chr >= 0; --chr) {
      for (int pos = 1; pos >= 0; --pos) {
        AblationCell cell;
        cell.alpha_cross = cross;
        cell.alpha_char = chr;
        cell.alpha_pos = pos;
        cell.beta = beta;
        cell.name = "alphas_" + std::to_string(cross) + std::to_string(chr) +
                    std::to_string(pos);
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

std::vector<AblationCell> beta_grid(const std::vector<double>& betas) {
  std::vector<AblationCell> cells;
  for (double beta : betas) {
    AblationCell cell;
    cell.beta = beta;
    cell.name = "beta_" + std::to_string(beta);
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace polyg2p
