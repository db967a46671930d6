/*
 * Copyright 2026 The fairsteer Authors.
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

#ifndef FAIRSTEER_ERROR_H_
#define FAIRSTEER_ERROR_H_

#include <stdexcept>
#include <string>

namespace fairsteer {

// Raised when inputs violate a documented precondition (bad dimensions,
// malformed manifests, unknown sample ids, ...). The CLI maps it to exit 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what)
      : std::runtime_error(what) {}
};

// Raised on filesystem failures. The CLI maps it to exit 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Throws ValidationError(message) when `condition` is false.
void Require(bool condition, const std::string& message);

}  // namespace fairsteer

#endif  // FAIRSTEER_ERROR_H_
