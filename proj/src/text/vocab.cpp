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

#include "cxrvlp/text/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <limits>
#include <set>
#include <tuple>

namespace cxrvlp::text {

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::string continuation_prefix)
    : tokens_(std::move(tokens)), prefix_(std::move(continuation_prefix)) {
  if (tokens_.size() < kSpecialTokens.size()) throw VocabError("vocabulary lacks special tokens");
  for (std::size_t i = 0; i < kSpecialTokens.size(); ++i) {
    if (tokens_[i] != kSpecialTokens[i]) {
      throw VocabError("special token " + std::string(kSpecialTokens[i]) + " must have id " +
                       std::to_string(i));
    }
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw VocabError("empty token at id " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw VocabError("duplicate token '" + tokens_[i] + "'");
    }
  }
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw VocabError("cannot write vocabulary to " + path.string());
  for (const auto& t : tokens_) os << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw VocabError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

std::string normalize(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  const std::string norm = normalize(text);
  std::vector<std::string> words;
  std::string cur;
  for (char ch : norm) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur)), cur.clear();
    } else if (is_ascii_punct(c)) {
      if (!cur.empty()) words.push_back(std::move(cur)), cur.clear();
      words.emplace_back(1, ch);
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0 && c <= 0xF7) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<int> tokenize_word(std::string_view word, const Vocabulary& v) {
  const auto chars = utf8_chars(word);
  std::vector<int> out;
  std::size_t start = 0;
  const std::string& prefix = v.continuation_prefix();
  while (start < chars.size()) {
    int found = -1;
    std::size_t found_end = start;
    std::string piece;
    for (std::size_t k = start; k < chars.size(); ++k) piece += chars[k];
    // Shrink the candidate from the right until it is in the vocabulary.
    for (std::size_t end = chars.size(); end > start; --end) {
      const std::string candidate = start > 0 ? prefix + piece : piece;
      const int id = v.id(candidate);
      if (id >= 0) {
        found = id;
        found_end = end;
        break;
      }
      piece.resize(piece.size() - chars[end - 1].size());
    }
    if (found < 0) {
      out.push_back(Vocabulary::kUnk);
      start += 1;
    } else {
      out.push_back(found);
      start = found_end;
    }
  }
  return out;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& v) {
  TokenSequence seq;
  seq.text_ref = normalize(text);
  for (const auto& w : split_words(text)) {
    const auto ids = tokenize_word(w, v);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      seq.ids.push_back(ids[i]);
      seq.word_starts.push_back(i == 0);
    }
  }
  return seq;
}

TokenSequence with_specials(const TokenSequence& seq) {
  TokenSequence out;
  out.text_ref = seq.text_ref;
  out.ids.reserve(seq.ids.size() + 2);
  out.ids.push_back(Vocabulary::kCls);
  out.word_starts.push_back(false);
  out.ids.insert(out.ids.end(), seq.ids.begin(), seq.ids.end());
  out.word_starts.insert(out.word_starts.end(), seq.word_starts.begin(), seq.word_starts.end());
  out.ids.push_back(Vocabulary::kSep);
  out.word_starts.push_back(false);
  return out;
}

Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t size) {
  if (corpus.empty()) throw VocabError("build_vocab: corpus is empty");

  // Word frequencies in first-occurrence order.
  std::vector<std::string> words;
  std::vector<long long> freq;
  std::map<std::string, std::size_t> word_index;
  for (const auto& doc : corpus) {
    for (auto& w : split_words(doc)) {
      auto [it, inserted] = word_index.emplace(w, words.size());
      if (inserted) {
        words.push_back(w);
        freq.push_back(0);
      }
      ++freq[it->second];
    }
  }
  if (words.empty()) throw VocabError("build_vocab: corpus contains no words");

  const std::string prefix = "##";
  std::set<std::string> alphabet;
  for (const auto& w : words) {
    for (auto& c : utf8_chars(w)) alphabet.insert(c);
  }
  std::vector<std::string> tokens(kSpecialTokens.begin(), kSpecialTokens.end());
  for (const auto& c : alphabet) tokens.push_back(c);
  for (const auto& c : alphabet) tokens.push_back(prefix + c);
  if (size < tokens.size()) {
    throw VocabError("vocabulary size " + std::to_string(size) + " cannot hold the " +
                     std::to_string(alphabet.size()) + "-character alphabet plus specials (" +
                     std::to_string(tokens.size()) + " tokens)");
  }
  std::map<std::string, int> token_id;
  for (std::size_t i = 0; i < tokens.size(); ++i) token_id[tokens[i]] = static_cast<int>(i);

  // Each word as a sequence of symbol ids.
  std::vector<std::vector<int>> symbols(words.size());
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto chars = utf8_chars(words[w]);
    for (std::size_t k = 0; k < chars.size(); ++k) {
      symbols[w].push_back(token_id.at(k == 0 ? chars[k] : prefix + chars[k]));
    }
  }

  auto strip = [&](const std::string& t) {
    return t.rfind(prefix, 0) == 0 ? t.substr(prefix.size()) : t;
  };

  while (tokens.size() < size) {
    std::map<std::pair<int, int>, long long> pair_freq;
    std::vector<long long> sym_freq(tokens.size(), 0);
    long long total = 0;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& s = symbols[w];
      for (std::size_t k = 0; k < s.size(); ++k) {
        sym_freq[static_cast<std::size_t>(s[k])] += freq[w];
        total += freq[w];
        if (k + 1 < s.size()) pair_freq[{s[k], s[k + 1]}] += freq[w];
      }
    }
    if (pair_freq.empty()) break;

    std::pair<int, int> best{-1, -1};
    double best_gain = -std::numeric_limits<double>::infinity();
    for (const auto& [p, f] : pair_freq) {
      const double fa = static_cast<double>(sym_freq[static_cast<std::size_t>(p.first)]);
      const double fb = static_cast<double>(sym_freq[static_cast<std::size_t>(p.second)]);
      const double fab = static_cast<double>(f);
      const double gain = fab * std::log(fab * static_cast<double>(total) / (fa * fb));
      const bool better =
          gain > best_gain + 1e-12 ||
          (std::abs(gain - best_gain) <= 1e-12 &&
           std::tie(tokens[static_cast<std::size_t>(p.first)],
                    tokens[static_cast<std::size_t>(p.second)]) <
               std::tie(tokens[static_cast<std::size_t>(best.first)],
                        tokens[static_cast<std::size_t>(best.second)]));
      if (best.first < 0 || better) {
        best = p;
        best_gain = gain;
      }
    }

    const std::string merged =
        tokens[static_cast<std::size_t>(best.first)] + strip(tokens[static_cast<std::size_t>(best.second)]);
    int merged_id;
    if (auto it = token_id.find(merged); it != token_id.end()) {
      merged_id = it->second;
    } else {
      merged_id = static_cast<int>(tokens.size());
      tokens.push_back(merged);
      token_id.emplace(merged, merged_id);
    }
    for (auto& s : symbols) {
      std::vector<int> next;
      next.reserve(s.size());
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k + 1 < s.size() && s[k] == best.first && s[k + 1] == best.second) {
          next.push_back(merged_id);
          ++k;
        } else {
          next.push_back(s[k]);
        }
      }
      s = std::move(next);
    }
  }
  return Vocabulary(std::move(tokens), prefix);
}

TokenStats token_stats(std::span<const std::string> corpus, const Vocabulary& v) {
  if (corpus.empty()) throw VocabError("token_stats: corpus is empty");
  double tokens = 0.0;
  double words = 0.0;
  for (const auto& doc : corpus) {
    tokens += static_cast<double>(tokenize(doc, v).size());
    words += static_cast<double>(split_words(doc).size());
  }
  TokenStats s;
  const double n = static_cast<double>(corpus.size());
  s.avg_tokens = tokens / n;
  s.avg_words = words / n;
  s.pct_increase_vs_words =
      s.avg_words > 0.0 ? 100.0 * (s.avg_tokens - s.avg_words) / s.avg_words : 0.0;
  return s;
}

}  // namespace cxrvlp::text
