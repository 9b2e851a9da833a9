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

#ifndef VOXSYNTH_FORMAT_HPP_
#define VOXSYNTH_FORMAT_HPP_

#include <array>
#include <charconv>
#include <string>

namespace voxsynth {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

}  // namespace voxsynth

#endif  // VOXSYNTH_FORMAT_HPP_
