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

#include "fairsteer/sae.h"

namespace fairsteer {
namespace {

void BM_Encode(benchmark::State& state) {
  const auto m = static_cast<size_t>(state.range(0));
  const SaeParams sae = InitSaeParams(m, 32, 1);
  const Vector h = Vector::Random(32);
  for (auto _ : state) benchmark::DoNotOptimize(Encode(h, sae));
}
BENCHMARK(BM_Encode)->Arg(128)->Arg(1024);

void BM_SaeLossWithGradients(benchmark::State& state) {
  const SaeParams sae = InitSaeParams(128, 32, 1);
  const Matrix batch = Matrix::Random(32, 64);
  SaeGradients grads;
  for (auto _ : state) benchmark::DoNotOptimize(SaeLoss(sae, batch, 1e-2, &grads));
}
BENCHMARK(BM_SaeLossWithGradients);

}  // namespace
}  // namespace fairsteer
