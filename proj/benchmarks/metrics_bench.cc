/*
 * Copyright 2026 The fairsteer Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "fairsteer/metrics.h"

namespace fairsteer {
namespace {

void BM_MacroF1AndDpr(benchmark::State& state) {
  const auto n = static_cast<size_t>(state.range(0));
  std::mt19937_64 rng(3);
  const LabelSpace space({"A", "B", "C", "D"});
  std::vector<size_t> preds(n), golds(n);
  std::vector<GroupKey> groups;
  for (size_t i = 0; i < n; ++i) {
    preds[i] = rng() % 4;
    golds[i] = rng() % 4;
    groups.emplace_back("race", "g" + std::to_string(rng() % 4));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(MacroF1(preds, golds, space));
    benchmark::DoNotOptimize(DemographicParityRatio(SelectionRates(preds, groups, 0)));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}
BENCHMARK(BM_MacroF1AndDpr)->Arg(1000)->Arg(100000);

}  // namespace
}  // namespace fairsteer
