// Copyright 2026 The cxrvlp Authors. All Rights Reserved.
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

/// @file vocab.hpp
/// @brief WordPiece vocabulary, tokenizer and vocabulary induction.
///
/// Text is normalized by ASCII lowercasing, then split into words at
/// whitespace, with every ASCII punctuation character forming a word of its
/// own. Each word is tokenized greedily, longest match first, with
/// non-initial pieces carrying the continuation prefix ("##").

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cxrvlp::text {

inline constexpr std::array<std::string_view, 5> kSpecialTokens = {"[PAD]", "[UNK]", "[CLS]",
                                                                   "[SEP]", "[MASK]"};

class VocabError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;

  Vocabulary() = default;
  /// tokens[0..4] must be the special tokens in kSpecialTokens order; all unique.
  explicit Vocabulary(std::vector<std::string> tokens, std::string continuation_prefix = "##");

  int size() const { return static_cast<int>(tokens_.size()); }
  /// Returns -1 when absent.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const { return id(token) >= 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& continuation_prefix() const { return prefix_; }
  static bool is_special(int id) { return id >= 0 && id < static_cast<int>(kSpecialTokens.size()); }

  /// One token per line; line number is the id.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_ && prefix_ == o.prefix_; }

 private:
  std::vector<std::string> tokens_;
  std::string prefix_ = "##";
  std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;
  std::vector<bool> word_starts;  // true on the first piece of each source word
  std::string text_ref;           // normalized source text

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

/// Lowercases ASCII letters; other bytes pass through unchanged.
std::string normalize(std::string_view text);

/// Normalizes and splits into words (punctuation characters are separate words).
std::vector<std::string> split_words(std::string_view text);

/// Splits UTF-8 into code points; invalid bytes become single-byte units.
std::vector<std::string> utf8_chars(std::string_view s);

/// WordPiece tokenization of one word (already normalized). Characters that
/// cannot be matched map to [UNK] individually.
std::vector<int> tokenize_word(std::string_view word, const Vocabulary& v);

TokenSequence tokenize(std::string_view text, const Vocabulary& v);

/// Prepends [CLS] and appends [SEP]; specials are not word starts.
TokenSequence with_specials(const TokenSequence& seq);

/// Induces a WordPiece vocabulary of at most `size` tokens. Starts from the
/// special tokens plus every character of the corpus in both initial and
/// continuation form, then repeatedly merges the adjacent symbol pair with
/// the largest corpus log-likelihood gain
///     gain(a, b) = f(ab) * log( f(ab) * N / (f(a) * f(b)) )
/// under a unigram model over N symbol occurrences. Stops at `size` tokens or
/// when every word is a single symbol. Ties break lexicographically.
/// Throws VocabError if size cannot hold the specials and the alphabet, or if
/// the corpus is empty.
Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t size);

struct TokenStats {
  double avg_tokens = 0.0;
  double avg_words = 0.0;
  double pct_increase_vs_words = 0.0;
};

/// Mean tokens per document and the percentage increase over mean words.
TokenStats token_stats(std::span<const std::string> corpus, const Vocabulary& v);

}  // namespace cxrvlp::text
