/*
 * Copyright 2026 The cshap Authors.
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

#include "cshap/changepoint.hpp"
#include "cshap/convnet.hpp"
#include "cshap/dataset.hpp"
#include "cshap/decompose.hpp"
#include "cshap/error.hpp"
#include "cshap/experiment.hpp"
#include "cshap/explain.hpp"
#include "cshap/model.hpp"
#include "cshap/numeric.hpp"
#include "cshap/report.hpp"
#include "cshap/signal.hpp"
#include "cshap/synth.hpp"
#include "cshap/version.hpp"
