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

#include <catch2/catch_amalgamated.hpp>

#include "lmrc/fuzzy.hpp"

using namespace lmrc;

TEST_CASE("token_sort_key folds case, strips punctuation, sorts tokens") {
  CHECK(fuzzy::token_sort_key("Barack Obama") == "barack obama");
  CHECK(fuzzy::token_sort_key("Obama, Barack") == "barack obama");
  CHECK(fuzzy::token_sort_key("  a   B ") == "a b");
  CHECK(fuzzy::token_sort_key("AC|DC") == "ac dc");
  CHECK(fuzzy::token_sort_key("") == "");
  CHECK(fuzzy::token_sort_key("...") == "");
}

TEST_CASE("ratio endpoints") {
  CHECK(fuzzy::ratio("abc", "abc") == 100.0);
  CHECK(fuzzy::ratio("", "") == 100.0);
  CHECK(fuzzy::ratio("abc", "") == 0.0);
  CHECK(fuzzy::ratio("abc", "xyz") == 0.0);
}

TEST_CASE("token_sort_ratio is order and case insensitive") {
  CHECK(fuzzy::token_sort_ratio("fuzzy wuzzy was a bear", "wuzzy fuzzy bear was a") == 100.0);
  CHECK(fuzzy::token_sort_ratio("Barack Obama", "obama BARACK") == 100.0);
}

TEST_CASE("token_sort_ratio is symmetric") {
  const char* pairs[][2] = {{"Barack Obama Jr", "Barack Obama"},
                            {"date of birth", "place of birth"},
                            {"Ulm", "Germany"}};
  for (const auto& p : pairs) {
    CHECK(fuzzy::token_sort_ratio(p[0], p[1]) == fuzzy::token_sort_ratio(p[1], p[0]));
  }
}

TEST_CASE("close surface scores high, unrelated scores low") {
  // "barack jr obama" vs "barack obama": LCS = "barack obama" = 12 chars.
  double close = fuzzy::token_sort_ratio("Barack Obama Jr", "Barack Obama");
  CHECK(close == Catch::Approx(200.0 * 12.0 / (15.0 + 12.0)));
  CHECK(close > 80.0);
  double far = fuzzy::token_sort_ratio("XYZZY", "Barack Obama");
  CHECK(far < 40.0);
}

TEST_CASE("lcs_length basics") {
  CHECK(fuzzy::lcs_length("abcde", "ace") == 3);
  CHECK(fuzzy::lcs_length("abc", "abc") == 3);
  CHECK(fuzzy::lcs_length("abc", "") == 0);
  CHECK(fuzzy::lcs_length("abc", "cba") == 1);
}

TEST_CASE("ratio bounded in [0,100]") {
  const char* samples[] = {"", "a", "ab", "Albert Einstein", "employer", "AC|DC", "1879"};
  for (const char* a : samples) {
    for (const char* b : samples) {
      double r = fuzzy::token_sort_ratio(a, b);
      CHECK(r >= 0.0);
      CHECK(r <= 100.0);
    }
  }
}
