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

#ifndef VOXSYNTH_SRC_BINARY_IO_HPP_
#define VOXSYNTH_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "voxsynth/error.hpp"

namespace voxsynth::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(std::string_view bytes, std::size_t offset) : bytes_(bytes), offset_(offset) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto out = bytes_.substr(offset_, n);
    offset_ += n;
    return out;
  }

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - offset_ < n) throw ModelFormatError("unexpected end of model data");
  }

  std::string_view bytes_;
  std::size_t offset_;
};

}  // namespace voxsynth::detail

#endif  // VOXSYNTH_SRC_BINARY_IO_HPP_
