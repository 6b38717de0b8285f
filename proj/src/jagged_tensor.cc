// Copyright 2026 The jaggedrec Authors.
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
#include "jaggedrec/jagged_tensor.h"

#include "json.hpp"

namespace jaggedrec {

std::vector<int64_t> OffsetsFromLengths(std::span<const int64_t> lengths) {
  std::vector<int64_t> offsets(lengths.size() + 1, 0);
  for (size_t i = 0; i < lengths.size(); ++i) {
    JR_CHECK_ARG(lengths[i] >= 0, "negative length ", lengths[i], " at ", i);
    offsets[i + 1] = offsets[i] + lengths[i];
  }
  return offsets;
}

namespace {

template <typename T>
std::string DebugStringImpl(const JaggedTensor<T>& jt) {
  nlohmann::ordered_json j;
  j["dim"] = jt.dim();
  j["offsets"] = jt.offsets();
  j["values"] = jt.values();
  return j.dump();
}

}  // namespace

std::string DebugString(const JaggedTensor<float>& jt) {
  return DebugStringImpl(jt);
}
std::string DebugString(const JaggedTensor<double>& jt) {
  return DebugStringImpl(jt);
}
std::string DebugString(const JaggedTensor<int64_t>& jt) {
  return DebugStringImpl(jt);
}

}  // namespace jaggedrec
