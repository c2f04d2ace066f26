// Copyright 2026 The edgebatch Authors
// SPDX-License-Identifier: Apache-2.0
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

// Umbrella header.

#pragma once

#include "edgebatch/core.hpp"
#include "edgebatch/model_catalog.hpp"
#include "edgebatch/radio.hpp"
#include "edgebatch/inference_cost.hpp"
#include "edgebatch/p2_reform.hpp"
#include "edgebatch/dftsp.hpp"
#include "edgebatch/baselines.hpp"
#include "edgebatch/sim.hpp"
#include "edgebatch/scenario_io.hpp"
#include "edgebatch/sweep.hpp"
