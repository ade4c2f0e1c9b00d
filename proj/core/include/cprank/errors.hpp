/* Copyright 2026 The cprank Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <stdexcept>
#include <string>

namespace cprank {

/// Base class for all cprank errors.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, violated preconditions, or schema violations (CLI exit 1).
class validation_error : public error {
public:
  using error::error;
};

/// Malformed file content: bad magic, dtype, truncation, unknown fields.
class format_error : public validation_error {
public:
  using validation_error::validation_error;
};

/// Filesystem-level failure: unreadable or unwritable path.
class io_error : public error {
public:
  using error::error;
};

/// Numerical failure: non-finite data or a degenerate computation (CLI exit 2).
class numeric_error : public error {
public:
  using error::error;
};

}  // namespace cprank
