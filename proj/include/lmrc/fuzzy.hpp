// Copyright 2026 The LMRC Authors
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

#ifndef LMRC_FUZZY_HPP
#define LMRC_FUZZY_HPP

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "lmrc/common.hpp"

namespace lmrc::fuzzy {

// Lowercases (ASCII), replaces non-alphanumeric ASCII bytes with spaces,
// splits, sorts the tokens, and rejoins with single spaces. Bytes >= 0x80
// are kept as word characters so UTF-8 sequences survive intact.
inline std::string token_sort_key(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (unsigned char c : s) {
    if (c >= 0x80 || std::isalnum(c)) {
      cleaned.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                             : static_cast<char>(c));
    } else {
      cleaned.push_back(' ');
    }
  }
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    size_t j = i;
    while (j < cleaned.size() && cleaned[j] != ' ') ++j;
    if (j > i) tokens.emplace_back(cleaned.substr(i, j - i));
    i = j;
  }
  std::sort(tokens.begin(), tokens.end());
  return join(tokens, " ");
}

inline size_t lcs_length(std::string_view a, std::string_view b) {
  if (a.empty() || b.empty()) return 0;
  // One-row DP; strings here are entity names, so O(|a||b|) is fine.
  std::vector<size_t> row(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    size_t diag = 0;
    for (size_t j = 1; j <= b.size(); ++j) {
      size_t tmp = row[j];
      if (a[i - 1] == b[j - 1]) {
        row[j] = diag + 1;
      } else {
        row[j] = std::max(row[j], row[j - 1]);
      }
      diag = tmp;
    }
  }
  return row[b.size()];
}

// Indel similarity on [0,100]: 100 * 2*LCS(a,b) / (|a|+|b|).
// Equivalent to 100 * (1 - D/(|a|+|b|)) with substitutions costed as
// one deletion plus one insertion.
inline double ratio(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 100.0;
  double lcs = static_cast<double>(lcs_length(a, b));
  return 200.0 * lcs / static_cast<double>(a.size() + b.size());
}

inline double token_sort_ratio(std::string_view a, std::string_view b) {
  return ratio(token_sort_key(a), token_sort_key(b));
}

}  // namespace lmrc::fuzzy

#endif  // LMRC_FUZZY_HPP
