/*
 * Copyright 2026 The DMLP Authors.
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

#pragma once

#include "dmlp/config.hpp"
#include "dmlp/data_plane.hpp"
#include "dmlp/errors.hpp"
#include "dmlp/experiment.hpp"
#include "dmlp/gossip_sim.hpp"
#include "dmlp/metrics.hpp"
#include "dmlp/nn_core.hpp"
#include "dmlp/rng.hpp"
