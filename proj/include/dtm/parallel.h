// Copyright 2026 The DTM Authors
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

#ifndef DTM_PARALLEL_H_
#define DTM_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace dtm {

// Runs body(0) .. body(n-1) on up to `threads` worker threads. Jobs are
// handed out in index order. The first exception caught stops further jobs
// and is rethrown once every worker has joined.
void ParallelFor(std::size_t n, unsigned threads,
                 const std::function<void(std::size_t)>& body);

}  // namespace dtm

#endif  // DTM_PARALLEL_H_
