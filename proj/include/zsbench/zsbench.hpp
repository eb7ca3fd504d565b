/*
 * Copyright 2026 The zsbench Authors.
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

// Umbrella header for the whole library.

#include "zsbench/config.hpp"
#include "zsbench/datastore.hpp"
#include "zsbench/error.hpp"
#include "zsbench/eval.hpp"
#include "zsbench/io.hpp"
#include "zsbench/models.hpp"
#include "zsbench/pipeline.hpp"
#include "zsbench/semantics.hpp"
#include "zsbench/splitbuilder.hpp"
#include "zsbench/synthetic.hpp"
#include "zsbench/taxonomy.hpp"
