// Copyright 2026 The zeropp-sim Authors. All Rights Reserved.
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
// =============================================================================
#pragma once

#include "zeropp/collectives.hpp"
#include "zeropp/engine.hpp"
#include "zeropp/error.hpp"
#include "zeropp/half.hpp"
#include "zeropp/optimizer.hpp"
#include "zeropp/partitioner.hpp"
#include "zeropp/quantizer.hpp"
#include "zeropp/simnet.hpp"
#include "zeropp/slice_reorder.hpp"
#include "zeropp/tensor.hpp"
#include "zeropp/topology.hpp"
#include "zeropp/toy_model.hpp"
#include "zeropp/wire_format.hpp"
