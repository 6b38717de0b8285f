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
#include "jaggedrec/data_pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "jaggedrec/errors.h"
#include "jaggedrec/workload.h"

namespace jaggedrec {
namespace {

std::vector<std::string> Split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

bool ParseInt(const std::string& s, int64_t* out) {
  if (s.empty()) return false;
  size_t pos = 0;
  try {
    *out = std::stoll(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size();
}

bool ParseDouble(const std::string& s, double* out) {
  if (s.empty()) return false;
  size_t pos = 0;
  try {
    *out = std::stod(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size();
}

}  // namespace

ParsedLog ReadInteractions(std::istream& is, const ColumnMapping& mapping) {
  std::string line;
  JR_CHECK_ARG(static_cast<bool>(std::getline(is, line)),
               "interaction input has no header");
  const std::vector<std::string> header = Split(line, mapping.delimiter);
  auto column = [&](const std::string& name, bool required) -> int64_t {
    if (name.empty()) {
      JR_CHECK_ARG(!required, "required column name is empty");
      return -1;
    }
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      JR_CHECK_ARG(!required, "missing required column '", name, "'");
      return -1;
    }
    return it - header.begin();
  };
  const int64_t c_user = column(mapping.user, true);
  const int64_t c_item = column(mapping.item, true);
  const int64_t c_time = column(mapping.timestamp, true);
  const int64_t c_click = column(mapping.click, false);
  const int64_t c_like = column(mapping.like, false);
  const int64_t c_follow = column(mapping.follow, false);
  const int64_t c_comment = column(mapping.comment, false);
  const int64_t c_forward = column(mapping.forward, false);
  const int64_t c_dislike = column(mapping.dislike, false);
  const int64_t c_long = column(mapping.long_view, false);
  const int64_t c_play = column(mapping.play_time, false);
  const int64_t c_dur = column(mapping.duration, false);

  ParsedLog log;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = Split(line, mapping.delimiter);
    Interaction r;
    bool ok = static_cast<int64_t>(f.size()) == static_cast<int64_t>(header.size()) &&
              ParseInt(f[c_user], &r.user_id) &&
              ParseInt(f[c_item], &r.item_id) &&
              ParseInt(f[c_time], &r.timestamp);
    auto flag = [&](int64_t c, bool* out) {
      if (!ok || c < 0) return;
      int64_t v = 0;
      if (!ParseInt(f[c], &v) || (v != 0 && v != 1)) {
        ok = false;
        return;
      }
      *out = v == 1;
    };
    flag(c_click, &r.click);
    flag(c_like, &r.like);
    flag(c_follow, &r.follow);
    flag(c_comment, &r.comment);
    flag(c_forward, &r.forward);
    flag(c_dislike, &r.dislike);
    if (c_long >= 0) {
      flag(c_long, &r.long_view);
    } else if (ok && c_play >= 0 && c_dur >= 0) {
      double play = 0.0;
      double dur = 0.0;
      ok = ParseDouble(f[c_play], &play) && ParseDouble(f[c_dur], &dur);
      r.long_view = ok && dur > 0.0 && play >= mapping.long_view_fraction * dur;
    }
    if (!ok) {
      ++log.skipped;
      continue;
    }
    log.records.push_back(r);
  }
  return log;
}

ParsedLog ReadInteractionsFile(const std::string& path,
                               const ColumnMapping& mapping) {
  std::ifstream is(path);
  JR_CHECK_ARG(is.good(), "cannot open interaction file '", path, "'");
  return ReadInteractions(is, mapping);
}

std::vector<Interaction> FilterInteractions(
    std::span<const Interaction> records) {
  std::unordered_set<int64_t> positive_users;
  for (const Interaction& r : records) {
    if (!r.dislike && r.positive()) positive_users.insert(r.user_id);
  }
  std::vector<Interaction> out;
  for (const Interaction& r : records) {
    if (!r.dislike && positive_users.count(r.user_id)) out.push_back(r);
  }
  return out;
}

CoreFilterResult FiveCoreFilter(std::span<const Interaction> records,
                                int64_t k) {
  JR_CHECK_ARG(k >= 1, "core size must be >= 1");
  std::vector<bool> alive(records.size(), true);
  CoreFilterResult result;
  while (true) {
    ++result.iterations;
    std::unordered_map<int64_t, int64_t> user_count;
    std::unordered_map<int64_t, std::unordered_set<int64_t>> item_users;
    for (size_t i = 0; i < records.size(); ++i) {
      if (!alive[i]) continue;
      ++user_count[records[i].user_id];
      item_users[records[i].item_id].insert(records[i].user_id);
    }
    bool changed = false;
    for (size_t i = 0; i < records.size(); ++i) {
      if (!alive[i]) continue;
      if (user_count[records[i].user_id] < k ||
          static_cast<int64_t>(item_users[records[i].item_id].size()) < k) {
        alive[i] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (size_t i = 0; i < records.size(); ++i) {
    if (alive[i]) result.records.push_back(records[i]);
  }
  result.empty = result.records.empty();
  return result;
}

std::vector<UserSequence> GroupByUser(std::span<const Interaction> records) {
  std::map<int64_t, std::vector<size_t>> by_user;
  for (size_t i = 0; i < records.size(); ++i) {
    by_user[records[i].user_id].push_back(i);
  }
  std::vector<UserSequence> out;
  for (auto& [user, idx] : by_user) {
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return records[a].timestamp < records[b].timestamp;
    });
    UserSequence s;
    s.user_id = user;
    for (size_t i : idx) {
      s.items.push_back(records[i].item_id);
      s.timestamps.push_back(records[i].timestamp);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SplitSequence> LeaveOneOutSplit(
    std::span<const UserSequence> sequences) {
  std::vector<SplitSequence> out;
  out.reserve(sequences.size());
  for (const UserSequence& s : sequences) {
    JR_CHECK_ARG(s.items.size() >= 2, "user ", s.user_id, " has ",
                 s.items.size(), " items; leave-one-out needs >= 2");
    SplitSequence split;
    split.user_id = s.user_id;
    split.train.assign(s.items.begin(), s.items.end() - 1);
    split.test_item = s.items.back();
    out.push_back(std::move(split));
  }
  return out;
}

namespace {

std::vector<int64_t> RanksOf(std::span<const std::vector<int64_t>> ranked,
                             std::span<const int64_t> truth) {
  JR_CHECK_ARG(ranked.size() == truth.size(), "ranked lists (", ranked.size(),
               ") and truths (", truth.size(), ") differ in count");
  std::vector<int64_t> ranks;
  ranks.reserve(truth.size());
  for (size_t u = 0; u < truth.size(); ++u) {
    auto it = std::find(ranked[u].begin(), ranked[u].end(), truth[u]);
    ranks.push_back(it == ranked[u].end() ? 0 : (it - ranked[u].begin()) + 1);
  }
  return ranks;  // 0 marks "absent"
}

}  // namespace

double HitRateFromRanks(std::span<const int64_t> ranks, int64_t k) {
  JR_CHECK_ARG(k >= 1, "K must be >= 1");
  if (ranks.empty()) return 0.0;
  int64_t hits = 0;
  for (int64_t r : ranks) hits += (r >= 1 && r <= k);
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double NdcgFromRanks(std::span<const int64_t> ranks, int64_t k) {
  JR_CHECK_ARG(k >= 1, "K must be >= 1");
  if (ranks.empty()) return 0.0;
  double sum = 0.0;
  for (int64_t r : ranks) {
    if (r >= 1 && r <= k) sum += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return sum / static_cast<double>(ranks.size());
}

double HitRateAtK(std::span<const std::vector<int64_t>> ranked,
                  std::span<const int64_t> truth, int64_t k) {
  return HitRateFromRanks(RanksOf(ranked, truth), k);
}

double NdcgAtK(std::span<const std::vector<int64_t>> ranked,
               std::span<const int64_t> truth, int64_t k) {
  return NdcgFromRanks(RanksOf(ranked, truth), k);
}

void WriteSequenceFile(std::ostream& os,
                       std::span<const UserSequence> sequences) {
  for (const UserSequence& s : sequences) {
    os << s.user_id << ' ' << s.items.size();
    for (int64_t i : s.items) os << ' ' << i;
    for (int64_t t : s.timestamps) os << ' ' << t;
    os << '\n';
  }
}

std::vector<UserSequence> ReadSequenceFile(std::istream& is) {
  std::vector<UserSequence> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    UserSequence s;
    int64_t n = 0;
    JR_CHECK_ARG(static_cast<bool>(ls >> s.user_id >> n) && n >= 0,
                 "bad sequence header on line ", line_no);
    s.items.resize(n);
    s.timestamps.resize(n);
    for (auto& v : s.items) {
      JR_CHECK_ARG(static_cast<bool>(ls >> v), "short item list on line ",
                   line_no);
    }
    for (auto& v : s.timestamps) {
      JR_CHECK_ARG(static_cast<bool>(ls >> v), "short timestamp list on line ",
                   line_no);
    }
    out.push_back(std::move(s));
  }
  return out;
}

PreprocessResult Preprocess(const ParsedLog& log, int64_t k) {
  PreprocessResult result;
  result.stats.raw_records = static_cast<int64_t>(log.records.size());
  result.stats.skipped_lines = log.skipped;
  const std::vector<Interaction> filtered = FilterInteractions(log.records);
  result.stats.after_filter = static_cast<int64_t>(filtered.size());
  CoreFilterResult core = FiveCoreFilter(filtered, k);
  result.stats.after_core = static_cast<int64_t>(core.records.size());
  result.stats.core_iterations = core.iterations;
  std::set<int64_t> items;
  for (const Interaction& r : core.records) items.insert(r.item_id);
  result.stats.items = static_cast<int64_t>(items.size());
  result.sequences = GroupByUser(core.records);
  result.stats.users = static_cast<int64_t>(result.sequences.size());
  result.split = LeaveOneOutSplit(result.sequences);
  return result;
}

std::vector<Interaction> MakeSyntheticLog(int64_t num_users, int64_t num_items,
                                          int64_t records_per_user,
                                          uint64_t seed) {
  JR_CHECK_ARG(num_users >= 1 && num_items >= 1 && records_per_user >= 1,
               "synthetic log sizes must be positive");
  std::mt19937_64 rng(seed);
  ZipfSampler popularity(num_items, 0.8);
  std::bernoulli_distribution coin(0.3);
  std::bernoulli_distribution rare(0.05);
  std::uniform_int_distribution<int64_t> jitter(1, 5000);
  std::uniform_int_distribution<int64_t> count(1, 2 * records_per_user);
  std::vector<Interaction> out;
  for (int64_t u = 0; u < num_users; ++u) {
    int64_t t = jitter(rng) * 1000;
    const int64_t n = count(rng);
    for (int64_t i = 0; i < n; ++i) {
      Interaction r;
      r.user_id = u;
      r.item_id = popularity(rng) - 1;
      t += jitter(rng);
      r.timestamp = t;
      r.click = coin(rng);
      r.like = rare(rng);
      r.long_view = coin(rng);
      r.dislike = rare(rng);
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace jaggedrec
