/*
 * Copyright 2026 The zsbench Authors.
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

#pragma once

// Word embeddings, corpus occurrence counts, and per-class semantic vectors.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zsbench/error.hpp"
#include "zsbench/io.hpp"
#include "zsbench/taxonomy.hpp"

namespace zsbench {

using Vector = std::vector<double>;

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  void add(std::string word, std::vector<float> v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_ || dim_ == 0) {
      fail(ErrorCode::kDimensionMismatch, "embedding for '" + word + "' has " +
                                              std::to_string(v.size()) + " components, expected " +
                                              std::to_string(dim_));
    }
    for (float x : v) {
      if (!std::isfinite(x)) fail(ErrorCode::kInvalidArgument, "non-finite component in '" + word + "'");
    }
    if (!entries_.emplace(word, std::move(v)).second) {
      fail(ErrorCode::kDuplicate, "duplicate embedding word '" + word + "'");
    }
    words_.push_back(std::move(word));
  }

  const std::vector<float>* find(std::string_view word) const {
    auto it = entries_.find(std::string(word));
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool contains(std::string_view word) const { return find(word) != nullptr; }

  bool has_header = false;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<float>> entries_;
  std::vector<std::string> words_;
};

// Text format: optional header "count dim", then "word v1 ... vd" rows.
inline EmbeddingTable load_embeddings(std::istream& in, std::string source = "<embeddings>") {
  io::LineReader reader(in, std::move(source));
  EmbeddingTable table;
  std::string line;
  std::optional<std::size_t> declared_count;
  bool first = true;
  while (reader.next(line)) {
    auto fields = io::split_spaces(io::trim(line));
    if (fields.empty()) continue;
    if (first) {
      first = false;
      std::size_t count = 0, dim = 0;
      if (fields.size() == 2 && io::parse_number(fields[0], count) &&
          io::parse_number(fields[1], dim)) {
        if (dim == 0) reader.error("header declares zero dimension");
        table = EmbeddingTable(dim);
        table.has_header = true;
        declared_count = count;
        continue;
      }
    }
    if (fields.size() < 2) reader.error("expected 'word v1 ... vd'");
    std::vector<float> v;
    v.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      float x;
      if (!io::parse_number(fields[i], x)) reader.error("bad number '" + std::string(fields[i]) + "'");
      v.push_back(x);
    }
    try {
      table.add(std::string(fields[0]), std::move(v));
    } catch (const Error& e) {
      reader.error(e.what());
    }
  }
  if (declared_count && *declared_count != table.size()) {
    fail(ErrorCode::kParse, reader.source() + ": header declares " +
                                std::to_string(*declared_count) + " rows, found " +
                                std::to_string(table.size()));
  }
  return table;
}

inline void save_embeddings(const EmbeddingTable& table, std::ostream& out) {
  std::string buf;
  if (table.has_header) {
    out << table.size() << ' ' << table.dim() << '\n';
  }
  for (const auto& w : table.words()) {
    buf.clear();
    buf += w;
    for (float x : *table.find(w)) {
      buf += ' ';
      io::append_float(buf, x);
    }
    buf += '\n';
    out << buf;
  }
}

class FrequencyTable {
 public:
  std::uint64_t count(std::string_view word) const {
    auto it = counts_.find(std::string(word));
    return it == counts_.end() ? 0 : it->second;
  }

  void set(const std::string& word, std::uint64_t n) {
    auto [it, inserted] = counts_.emplace(word, n);
    if (inserted) {
      order_.push_back(word);
    } else {
      it->second = n;
    }
  }

  void add(const std::string& word, std::uint64_t n) { set(word, count(word) + n); }

  // Per-word addition; order-independent, so shards may merge in any order.
  void merge(const FrequencyTable& other) {
    for (const auto& w : other.order_) add(w, other.count(w));
  }

  const std::vector<std::string>& words() const { return order_; }
  std::size_t size() const { return order_.size(); }

  bool operator==(const FrequencyTable& other) const { return counts_ == other.counts_; }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::vector<std::string> order_;
};

inline FrequencyTable load_frequencies(std::istream& in, std::string source = "<frequencies>") {
  io::LineReader reader(in, std::move(source));
  FrequencyTable table;
  std::string line;
  std::unordered_map<std::string, bool> seen;
  while (reader.next(line)) {
    if (io::is_blank_or_comment(line)) continue;
    auto fields = io::split(io::trim(line), '\t');
    std::uint64_t n = 0;
    if (fields.size() != 2 || fields[0].empty() || !io::parse_number(fields[1], n)) {
      reader.error("expected word<TAB>count");
    }
    std::string word(fields[0]);
    if (!seen.emplace(word, true).second) reader.error("duplicate word '" + word + "'");
    table.set(word, n);
  }
  return table;
}

inline void save_frequencies(const FrequencyTable& table, std::ostream& out) {
  for (const auto& w : table.words()) out << w << '\t' << table.count(w) << '\n';
}

// ---------------------------------------------------------------------------
// Corpus counting

// Lowercases and maps every non-alphanumeric ASCII byte to a separator.
// Bytes >= 0x80 are kept so UTF-8 words survive intact.
inline bool is_token_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Counts contiguous-token matches of each vocabulary entry in one streaming
// pass. Memory is bounded by the vocabulary, not the corpus. Vocabulary
// entries go through the same tokenizer ("chair_of_state" -> chair of state).
class OccurrenceCounter {
 public:
  template <typename Range>
  explicit OccurrenceCounter(const Range& vocabulary) {
    std::unordered_map<std::string, bool> seen;
    for (const auto& word : vocabulary) {
      auto tokens = tokenize(word);
      if (tokens.empty() || !seen.emplace(std::string(word), true).second) continue;
      // Reversed trie: matching walks backwards from the newest token.
      std::size_t node = 0;
      for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
        auto& next = nodes_[node].next;
        auto found = next.find(*it);
        if (found == next.end()) {
          nodes_.emplace_back();
          found = nodes_[node].next.emplace(*it, nodes_.size() - 1).first;
        }
        node = found->second;
      }
      nodes_[node].words.push_back(std::string(word));
      max_len_ = std::max(max_len_, tokens.size());
      result_.set(std::string(word), 0);
    }
  }

  void feed(std::string_view chunk) {
    for (unsigned char c : chunk) {
      if (is_token_byte(c)) {
        current_.push_back(static_cast<char>(std::tolower(c)));
      } else {
        end_token();
      }
    }
  }

  void feed(std::istream& in) {
    std::string buf(1 << 16, '\0');
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      auto got = in.gcount();
      if (got <= 0) break;
      feed(std::string_view(buf.data(), static_cast<std::size_t>(got)));
    }
    if (in.bad()) fail(ErrorCode::kIo, "corpus read failure");
  }

  // Flushes the pending token and breaks phrase continuity (document end).
  FrequencyTable finish() {
    end_token();
    window_.clear();
    return result_;
  }

 private:
  struct Node {
    std::unordered_map<std::string, std::size_t> next;
    std::vector<std::string> words;
  };

  void end_token() {
    if (current_.empty()) return;
    window_.push_back(std::move(current_));
    current_.clear();
    if (window_.size() > max_len_) window_.erase(window_.begin());
    std::size_t node = 0;
    for (auto it = window_.rbegin(); it != window_.rend(); ++it) {
      auto found = nodes_[node].next.find(*it);
      if (found == nodes_[node].next.end()) break;
      node = found->second;
      for (const auto& w : nodes_[node].words) result_.add(w, 1);
    }
  }

  std::vector<Node> nodes_{Node{}};
  std::size_t max_len_ = 0;
  std::vector<std::string> window_;
  std::string current_;
  FrequencyTable result_;
};

template <typename Range>
FrequencyTable count_occurrences(std::istream& corpus, const Range& vocabulary) {
  OccurrenceCounter counter(vocabulary);
  counter.feed(corpus);
  return counter.finish();
}

// ---------------------------------------------------------------------------
// Class semantics

struct ClassSemantics {
  std::string class_id;
  Vector embedding;
  std::uint64_t frequency = 0;
  bool primary = false;
};

// Classes with frequency strictly greater than `threshold`.
inline std::vector<std::string> filter_by_frequency(const std::vector<ClassSemantics>& classes,
                                                    std::uint64_t threshold) {
  std::vector<std::string> kept;
  for (const auto& c : classes) {
    if (c.frequency > threshold) kept.push_back(c.class_id);
  }
  return kept;
}

inline double norm(const Vector& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline std::optional<double> cosine(const Vector& a, const Vector& b) {
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  double na = norm(a), nb = norm(b);
  if (na == 0 || nb == 0) return std::nullopt;
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

// Raw vector for a lemma: the joined lemma if embedded, otherwise the mean of
// its embedded tokens. nullopt when nothing is embedded.
inline std::optional<Vector> lemma_vector(std::string_view lemma, const EmbeddingTable& e) {
  if (const auto* v = e.find(lemma)) return Vector(v->begin(), v->end());
  Vector sum(e.dim(), 0.0);
  std::size_t n = 0;
  for (const auto& tok : tokenize(lemma)) {
    if (const auto* v = e.find(tok)) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  for (auto& x : sum) x /= static_cast<double>(n);
  return sum;
}

// Unit-normalized semantic vector of a class, built from its first lemma.
inline Vector class_embedding(const Taxonomy& t, std::string_view class_id, const EmbeddingTable& e) {
  const auto& concept_ = t.concept_at(t.index_of(class_id));
  auto v = lemma_vector(concept_.lemmas.front(), e);
  if (!v) fail(ErrorCode::kUndefined, "no embedded token for class " + concept_.id);
  double n = norm(*v);
  if (n == 0) fail(ErrorCode::kUndefined, "zero embedding for class " + concept_.id);
  for (auto& x : *v) x /= n;
  return *v;
}

// Unweighted mean of the primary-lemma vectors of every parent and child of
// the class that has one.
inline std::optional<Vector> neighbor_mean(const Taxonomy& t, ConceptIndex c, const EmbeddingTable& e) {
  Vector sum(e.dim(), 0.0);
  std::size_t n = 0;
  auto accumulate = [&](ConceptIndex nb) {
    if (auto v = lemma_vector(t.concept_at(nb).lemmas.front(), e)) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
      ++n;
    }
  };
  for (auto p : t.parents(c)) accumulate(p);
  for (auto ch : t.children(c)) accumulate(ch);
  if (n == 0) return std::nullopt;
  for (auto& x : sum) x /= static_cast<double>(n);
  return sum;
}

// Cosine similarity between a word and the average embedding of the class's
// parents and children. Throws kUndefined when the class is unscorable.
inline double polysemy_score(std::string_view word, std::string_view class_id, const Taxonomy& t,
                             const EmbeddingTable& e) {
  auto w = lemma_vector(word, e);
  if (!w) fail(ErrorCode::kUnknownId, "word '" + std::string(word) + "' has no embedding");
  auto mean = neighbor_mean(t, t.index_of(class_id), e);
  if (!mean) fail(ErrorCode::kUndefined, "class " + std::string(class_id) + " has no embedded neighbor");
  auto s = cosine(*w, *mean);
  if (!s) fail(ErrorCode::kUndefined, "zero vector while scoring class " + std::string(class_id));
  return *s;
}

struct PrimaryMeaning {
  std::string chosen;
  std::vector<std::pair<std::string, double>> scores;  // scorable candidates, id order
  std::vector<std::string> unscorable;
};

// argmax of polysemy_score over the candidates; ties go to the smallest id.
// Unscorable candidates are excluded and listed.
inline PrimaryMeaning resolve_primary_meaning(std::string_view word, const ClassSet& candidates,
                                              const Taxonomy& t, const EmbeddingTable& e) {
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "no candidate classes for '" + std::string(word) + "'");
  PrimaryMeaning out;
  if (candidates.size() == 1) {
    out.chosen = *candidates.begin();
    return out;
  }
  if (!lemma_vector(word, e)) fail(ErrorCode::kUnknownId, "word '" + std::string(word) + "' has no embedding");
  std::optional<double> best;
  for (const auto& c : candidates) {
    try {
      double s = polysemy_score(word, c, t, e);
      out.scores.emplace_back(c, s);
      if (!best || s > *best) {
        best = s;
        out.chosen = c;
      }
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kUndefined) throw;
      out.unscorable.push_back(c);
    }
  }
  if (!best) fail(ErrorCode::kUndefined, "no scorable class for '" + std::string(word) + "'");
  return out;
}

inline void mark_primary(std::vector<ClassSemantics>& classes, const ClassSet& candidates,
                         const PrimaryMeaning& resolved) {
  for (auto& c : classes) {
    if (candidates.count(c.class_id)) c.primary = (c.class_id == resolved.chosen);
  }
}

struct PrimaryAssignment {
  std::map<std::string, bool> primary;      // class id -> is primary meaning of its label
  std::vector<std::string> unresolved_words;  // polysemous labels with no scorable sense
};

// Groups classes by label word (first lemma) and resolves every shared label.
inline PrimaryAssignment assign_primary_meanings(const Taxonomy& t, const EmbeddingTable& e,
                                                 const ClassSet& universe) {
  std::map<std::string, ClassSet> by_label;
  for (const auto& id : universe) {
    by_label[t.concept_at(t.index_of(id)).lemmas.front()].insert(id);
  }
  PrimaryAssignment out;
  for (const auto& [label, group] : by_label) {
    if (group.size() == 1) {
      out.primary[*group.begin()] = true;
      continue;
    }
    std::string chosen;
    try {
      chosen = resolve_primary_meaning(label, group, t, e).chosen;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kUndefined && err.code() != ErrorCode::kUnknownId) throw;
      out.unresolved_words.push_back(label);
    }
    for (const auto& id : group) out.primary[id] = (id == chosen);
  }
  return out;
}

}  // namespace zsbench
