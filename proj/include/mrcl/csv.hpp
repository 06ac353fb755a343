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

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include "mrcl/pipeline.hpp"
#include "mrcl/pruning.hpp"

// CSV writers. Optional metadata goes on leading '#' lines; every data row has
// exactly as many fields as the header.

namespace mrcl {

/// Shortest representation that round-trips the double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) return "nan";
  return {buf, res.ptr};
}

using CsvMeta = std::vector<std::pair<std::string, std::string>>;

inline void write_meta(std::ostream& out, const CsvMeta& meta) {
  for (const auto& [k, v] : meta) out << "# " << k << ": " << v << '\n';
}

inline void write_trace_csv(std::ostream& out, const TrainTrace& trace, const CsvMeta& meta = {}) {
  write_meta(out, meta);
  out << "iter,cross_entropy,kl_nats,beta_or_kappa\n";
  for (const auto& r : trace.records) {
    out << r.iter << ',' << format_double(r.cross_entropy) << ',' << format_double(r.kl_nats) << ','
        << format_double(r.beta_or_kappa) << '\n';
  }
}

inline void write_histogram_csv(std::ostream& out, const std::vector<HistogramRow>& rows,
                                const CsvMeta& meta = {}) {
  write_meta(out, meta);
  out << "layer,mean,log_std\n";
  for (const auto& r : rows) {
    out << r.layer << ',' << format_double(r.mean) << ',' << format_double(r.log_std) << '\n';
  }
}

inline void write_sweep_csv(std::ostream& out, const std::vector<PruneCurve>& curves,
                            const CsvMeta& meta = {}) {
  write_meta(out, meta);
  out << "strategy,fraction,accuracy,seed\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      out << to_string(c.strategy.kind) << ',' << format_double(p.fraction) << ','
          << format_double(p.accuracy) << ',' << c.strategy.seed << '\n';
    }
  }
}

struct SummaryRow {
  std::size_t block_size = 0;
  double ratio = 0.0;
  double error_mean = 0.0;
  double error_stderr = 0.0;
  std::size_t iters = 0;
};

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                              const CsvMeta& meta = {}) {
  write_meta(out, meta);
  out << "block_size,ratio,error_mean,error_stderr,iters\n";
  for (const auto& r : rows) {
    out << r.block_size << ',' << format_double(r.ratio) << ',' << format_double(r.error_mean) << ','
        << format_double(r.error_stderr) << ',' << r.iters << '\n';
  }
}

}  // namespace mrcl
