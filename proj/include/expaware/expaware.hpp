// Copyright 2026 The expaware Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "expaware/common.hpp"
#include "expaware/container.hpp"
#include "expaware/corpus.hpp"
#include "expaware/stochastic.hpp"
#include "expaware/language_model.hpp"
#include "expaware/facet_sampler.hpp"
#include "expaware/experience_sampler.hpp"
#include "expaware/trainer.hpp"
#include "expaware/evaluation.hpp"
#include "expaware/synthesizer.hpp"
