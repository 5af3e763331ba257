#include "emo/core/memory.hpp"

#include <string>

#include "emo/core/errors.hpp"

namespace emo {

AffectVector CompensationTable::at(int category) const {
  auto it = table_.find(category);
  return it == table_.end() ? AffectVector{} : it->second;
}

EpisodeStore::EpisodeStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("memory.capacity must be positive");
}

void EpisodeStore::record(std::uint64_t time, int category, const AffectVector& interoception) {
  if (!records_.empty() && time <= records_.back().time)
    throw InvalidArgument("episode store: time " + std::to_string(time) + " does not follow " +
                          std::to_string(records_.back().time));
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back({time, category, interoception});
}

std::vector<MemoryRecord> EpisodeStore::window(std::size_t n) const {
  const std::size_t start = n >= records_.size() ? 0 : records_.size() - n;
  return {records_.begin() + static_cast<std::ptrdiff_t>(start), records_.end()};
}

std::vector<std::size_t> EpisodeStore::index_set(int category) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < records_.size(); ++i)
    if (records_[i].category == category) out.push_back(i);
  return out;
}

void update_table(const EpisodeStore& store, CompensationTable& table) {
  if (store.empty()) throw InvalidArgument("update_table: empty episode store");
  struct Accumulator {
    AffectVector sum;
    std::size_t count = 0;
  };
  std::map<int, Accumulator> deltas;
  const auto& r = store.records();
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    auto& acc = deltas[r[i].category];
    acc.sum += r[i + 1].interoception - r[i].interoception;
    ++acc.count;
  }
  const double gamma = table.learning_rate();
  for (const auto& [k, acc] : deltas) {
    const double scale = gamma / static_cast<double>(acc.count);
    table.set(k, table.at(k) + scale * acc.sum);
  }
}

}  // namespace emo
