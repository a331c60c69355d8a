// Copyright 2026 The flowinv Authors
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

#include "flowinv/binning.hpp"
#include "flowinv/calibration.hpp"
#include "flowinv/distribution.hpp"
#include "flowinv/error.hpp"
#include "flowinv/flowtable.hpp"
#include "flowinv/inversion.hpp"
#include "flowinv/packet.hpp"
#include "flowinv/random.hpp"
#include "flowinv/report.hpp"
#include "flowinv/sampling.hpp"
#include "flowinv/trace.hpp"
