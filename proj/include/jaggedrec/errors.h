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
#ifndef JAGGEDREC_ERRORS_H_
#define JAGGEDREC_ERRORS_H_

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace jaggedrec {

// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a run-time invariant of a simulation or training loop breaks.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace internal {

template <typename... Args>
std::string StrCat(Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  return os.str();
}

}  // namespace internal

#define JR_CHECK_ARG(cond, ...)                                  \
  do {                                                           \
    if (!(cond)) {                                               \
      throw ::jaggedrec::ValidationError(                        \
          ::jaggedrec::internal::StrCat(__VA_ARGS__));           \
    }                                                            \
  } while (0)

#define JR_CHECK_INVARIANT(cond, ...)                            \
  do {                                                           \
    if (!(cond)) {                                               \
      throw ::jaggedrec::InvariantError(                         \
          ::jaggedrec::internal::StrCat(__VA_ARGS__));           \
    }                                                            \
  } while (0)

}  // namespace jaggedrec

#endif  // JAGGEDREC_ERRORS_H_
