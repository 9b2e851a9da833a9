/*
 * Copyright 2026 The voxsynth Authors.
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

#ifndef VOXSYNTH_ERROR_HPP_
#define VOXSYNTH_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace voxsynth {

// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorClass { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

#define VOXSYNTH_DEFINE_ERROR(Name, Cls)                                    \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(ErrorClass::Cls, what) {} \
  };

VOXSYNTH_DEFINE_ERROR(SchemaMismatch, data)
VOXSYNTH_DEFINE_ERROR(ParseError, data)
VOXSYNTH_DEFINE_ERROR(EmptyInput, data)
VOXSYNTH_DEFINE_ERROR(InsufficientData, data)
VOXSYNTH_DEFINE_ERROR(DegenerateSplit, data)
VOXSYNTH_DEFINE_ERROR(InsufficientClassRows, data)
VOXSYNTH_DEFINE_ERROR(DegenerateLabels, data)
VOXSYNTH_DEFINE_ERROR(FoldInfeasible, data)
VOXSYNTH_DEFINE_ERROR(ConditionUnsatisfiable, data)
VOXSYNTH_DEFINE_ERROR(ModelFormatError, data)
VOXSYNTH_DEFINE_ERROR(IndexError, data)
VOXSYNTH_DEFINE_ERROR(ShapeError, data)
VOXSYNTH_DEFINE_ERROR(NumericalDivergence, numerical)
VOXSYNTH_DEFINE_ERROR(FormatError, config)
VOXSYNTH_DEFINE_ERROR(ConfigError, config)

#undef VOXSYNTH_DEFINE_ERROR

}  // namespace voxsynth

#endif  // VOXSYNTH_ERROR_HPP_
