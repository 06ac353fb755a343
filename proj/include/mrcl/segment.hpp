// Copyright 2026 The mrcl Authors
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrcl {

// Contiguous [start, start + length) range of a flat parameter vector.
struct Segment {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }
  bool operator==(const Segment&) const = default;
};

// Checks that segments are ordered, disjoint, non-empty and cover [0, total).
inline void check_partition(const std::vector<Segment>& segments, std::size_t total) {
  std::size_t expected = 0;
  for (const Segment& s : segments) {
    if (s.start != expected || s.length == 0) {
      throw std::invalid_argument("segments do not form an ordered partition at offset " +
                                  std::to_string(expected));
    }
    expected = s.end();
  }
  if (expected != total) {
    throw std::invalid_argument("segments cover " + std::to_string(expected) + " of " +
                                std::to_string(total) + " elements");
  }
}

}  // namespace mrcl
