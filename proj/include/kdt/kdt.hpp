// Copyright 2026 The kdt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KDT_KDT_HPP_
#define KDT_KDT_HPP_

#include "kdt/common.hpp"
#include "kdt/evaluate.hpp"
#include "kdt/features.hpp"
#include "kdt/ingest.hpp"
#include "kdt/kdf.hpp"
#include "kdt/models.hpp"
#include "kdt/nn/checkpoint.hpp"
#include "kdt/nn/gradcheck.hpp"
#include "kdt/nn/layers.hpp"
#include "kdt/nn/network.hpp"
#include "kdt/nn/optim.hpp"
#include "kdt/nn/train.hpp"
#include "kdt/tensor.hpp"

#endif  // KDT_KDT_HPP_
