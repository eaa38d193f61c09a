/*
 * Copyright 2026 The DMLP Authors.
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

#include <stdexcept>
#include <string>

namespace dmlp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad layer shapes, impossible topologies, bad keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: dimension mismatches, unparseable rows, bad labels.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Broken internal contract (e.g. trace and model shapes disagree).
class InternalError : public Error {
 public:
  using Error::Error;
};

/// AUC requested on data with a single class.
class UndefinedAucError : public Error {
 public:
  using Error::Error;
};

/// Hanley-McNeil standard error requested at theta in {0, 1}.
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmlp
