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
#ifndef JAGGEDREC_DATA_PIPELINE_H_
#define JAGGEDREC_DATA_PIPELINE_H_

// Interaction-log preprocessing: negative filtering, k-core pruning,
// chronological grouping, leave-one-out split and top-K metrics.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace jaggedrec {

struct Interaction {
  int64_t user_id = 0;
  int64_t item_id = 0;
  int64_t timestamp = 0;
  bool click = false;
  bool like = false;
  bool follow = false;
  bool comment = false;
  bool forward = false;
  bool long_view = false;
  bool dislike = false;

  bool positive() const {
    return click || like || follow || comment || forward || long_view;
  }
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Header names of the delimiter-separated input. Empty names mark absent
// columns. Without a long-view flag column, long_view is derived as
// play_time >= long_view_fraction * duration.
struct ColumnMapping {
  char delimiter = ',';
  std::string user = "user_id";
  std::string item = "video_id";
  std::string timestamp = "time_ms";
  std::string click = "is_click";
  std::string like = "is_like";
  std::string follow = "is_follow";
  std::string comment = "is_comment";
  std::string forward = "is_forward";
  std::string dislike = "is_hate";
  std::string long_view = "long_view";
  std::string play_time = "play_time_ms";
  std::string duration = "duration_ms";
  double long_view_fraction = 0.8;
};

struct ParsedLog {
  std::vector<Interaction> records;
  int64_t skipped = 0;  // malformed lines
};

ParsedLog ReadInteractions(std::istream& is, const ColumnMapping& mapping = {});
ParsedLog ReadInteractionsFile(const std::string& path,
                               const ColumnMapping& mapping = {});

// Drops dislike records, then every record of users left without a positive
// signal.
std::vector<Interaction> FilterInteractions(
    std::span<const Interaction> records);

struct CoreFilterResult {
  std::vector<Interaction> records;  // input order preserved
  int64_t iterations = 0;
  bool empty = false;
};

// Prunes to the fixed point where every user has >= k records and every item
// has >= k distinct users.
CoreFilterResult FiveCoreFilter(std::span<const Interaction> records,
                                int64_t k = 5);

struct UserSequence {
  int64_t user_id = 0;
  std::vector<int64_t> items;
  std::vector<int64_t> timestamps;
  friend bool operator==(const UserSequence&, const UserSequence&) = default;
};

// Per-user sequences ordered by timestamp; ties keep input order. Users are
// returned in ascending ID order.
std::vector<UserSequence> GroupByUser(std::span<const Interaction> records);

struct SplitSequence {
  int64_t user_id = 0;
  std::vector<int64_t> train;
  int64_t test_item = 0;
  friend bool operator==(const SplitSequence&, const SplitSequence&) = default;
};

// Holds out the last item of every sequence; sequences must have >= 2 items.
std::vector<SplitSequence> LeaveOneOutSplit(
    std::span<const UserSequence> sequences);

// Mean of [truth in ranked[:K]] and of 1/log2(rank + 1) for 1-based rank <= K.
double HitRateAtK(std::span<const std::vector<int64_t>> ranked,
                  std::span<const int64_t> truth, int64_t k);
double NdcgAtK(std::span<const std::vector<int64_t>> ranked,
               std::span<const int64_t> truth, int64_t k);

// Same metrics from precomputed 1-based ranks of the truth item.
double HitRateFromRanks(std::span<const int64_t> ranks, int64_t k);
double NdcgFromRanks(std::span<const int64_t> ranks, int64_t k);

// Text sequence file, one user per line:
//   user_id length item_1 ... item_n ts_1 ... ts_n
void WriteSequenceFile(std::ostream& os,
                       std::span<const UserSequence> sequences);
std::vector<UserSequence> ReadSequenceFile(std::istream& is);

struct PreprocessStats {
  int64_t raw_records = 0;
  int64_t skipped_lines = 0;
  int64_t after_filter = 0;
  int64_t after_core = 0;
  int64_t users = 0;
  int64_t items = 0;
  int64_t core_iterations = 0;
};

struct PreprocessResult {
  std::vector<UserSequence> sequences;
  std::vector<SplitSequence> split;
  PreprocessStats stats;
};

// Filter, 5-core, group and split in one pass.
PreprocessResult Preprocess(const ParsedLog& log, int64_t k = 5);

// Synthetic interaction log for demos and tests.
std::vector<Interaction> MakeSyntheticLog(int64_t num_users, int64_t num_items,
                                          int64_t records_per_user,
                                          uint64_t seed);

}  // namespace jaggedrec

#endif  // JAGGEDREC_DATA_PIPELINE_H_
