#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "emo/core/affect.hpp"

namespace emo {

/// Category-indexed compensation L(k) added to the innate appraisal.
class CompensationTable {
 public:
  explicit CompensationTable(double learning_rate = 0.1) : gamma_(learning_rate) {}

  double learning_rate() const { return gamma_; }
  // Unseen categories read as the zero vector.
  AffectVector at(int category) const;
  void set(int category, const AffectVector& value) { table_[category] = value; }
  AffectVector compensate(const AffectVector& innate, int category) const { return innate + at(category); }
  const std::map<int, AffectVector>& entries() const { return table_; }
  void clear() { table_.clear(); }

 private:
  double gamma_;
  std::map<int, AffectVector> table_;
};

struct MemoryRecord {
  std::uint64_t time = 0;
  int category = 0;
  AffectVector interoception;
};

/// Bounded, strictly time-ordered record of (t, k, a(t)).
class EpisodeStore {
 public:
  explicit EpisodeStore(std::size_t capacity = 1000);

  // Rejects t that does not exceed the last stored time; evicts the oldest
  // record once full.
  void record(std::uint64_t time, int category, const AffectVector& interoception);

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return records_.empty(); }
  const MemoryRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::deque<MemoryRecord>& records() const { return records_; }
  // Most recent n records, oldest first.
  std::vector<MemoryRecord> window(std::size_t n) const;

  // Positions i of records in category k that have a successor record i+1.
  std::vector<std::size_t> index_set(int category) const;

 private:
  std::size_t capacity_;
  std::deque<MemoryRecord> records_;
};

// L(k) += gamma * mean_{i in phi_k} (a(i+1) - a(i)), where the successor is the
// next stored record in time regardless of its category.
void update_table(const EpisodeStore& store, CompensationTable& table);

}  // namespace emo
