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

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Strict CSV reader for tests: skips leading '#' lines, requires a header,
// rejects ragged rows and empty fields.

namespace mrcl::testing {

struct CsvTable {
  std::vector<std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable parse_csv_strict(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool in_meta = true;
  while (std::getline(in, line)) {
    if (line.find('\r') != std::string::npos) throw std::runtime_error("CR in CSV");
    if (in_meta && !line.empty() && line[0] == '#') {
      t.meta.push_back(line);
      continue;
    }
    in_meta = false;
    const auto fields = split_csv_line(line);
    for (const auto& f : fields) {
      if (f.empty()) throw std::runtime_error("empty field in line '" + line + "'");
    }
    if (t.header.empty()) {
      t.header = fields;
      continue;
    }
    if (fields.size() != t.header.size()) throw std::runtime_error("ragged row '" + line + "'");
    t.rows.push_back(fields);
  }
  if (t.header.empty()) throw std::runtime_error("CSV without header");
  if (!text.empty() && text.back() != '\n') throw std::runtime_error("CSV not LF-terminated");
  return t;
}

}  // namespace mrcl::testing
