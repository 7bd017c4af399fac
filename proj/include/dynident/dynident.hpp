// Copyright 2026 The dynident Authors
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

#ifndef DYNIDENT_DYNIDENT_HPP_
#define DYNIDENT_DYNIDENT_HPP_

#include "dynident/common.hpp"
#include "dynident/model.hpp"
#include "dynident/kinematics.hpp"
#include "dynident/parameters.hpp"
#include "dynident/regressor.hpp"
#include "dynident/excitation.hpp"
#include "dynident/excitation_optimizer.hpp"
#include "dynident/signals.hpp"
#include "dynident/identification.hpp"
#include "dynident/synthbench.hpp"

namespace dynident {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dynident

#endif  // DYNIDENT_DYNIDENT_HPP_
