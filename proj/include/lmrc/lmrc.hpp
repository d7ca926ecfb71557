// Copyright 2026 The LMRC Authors
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

#ifndef LMRC_LMRC_HPP
#define LMRC_LMRC_HPP

#include "lmrc/common.hpp"
#include "lmrc/corpus.hpp"
#include "lmrc/embedder.hpp"
#include "lmrc/encoder.hpp"
#include "lmrc/evaluation.hpp"
#include "lmrc/fuzzy.hpp"
#include "lmrc/http_backend.hpp"
#include "lmrc/io.hpp"
#include "lmrc/llm_backend.hpp"
#include "lmrc/parsing.hpp"
#include "lmrc/pipeline.hpp"
#include "lmrc/prompting.hpp"
#include "lmrc/rcp_model.hpp"
#include "lmrc/rcp_train.hpp"

#endif  // LMRC_LMRC_HPP
