// Copyright 2026 The mrcl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "mrcl/autodiff.hpp"
#include "mrcl/codec.hpp"
#include "mrcl/config.hpp"
#include "mrcl/csv.hpp"
#include "mrcl/dataset.hpp"
#include "mrcl/errors.hpp"
#include "mrcl/gaussian.hpp"
#include "mrcl/lambert_w.hpp"
#include "mrcl/mlp.hpp"
#include "mrcl/model_format.hpp"
#include "mrcl/optim.hpp"
#include "mrcl/pipeline.hpp"
#include "mrcl/pruning.hpp"
#include "mrcl/random.hpp"
